"""Tests for the bag-of-words document classifier."""
import math

import numpy as np
import pytest

from stsp import classifier
from stsp.classifier import Corpus, build_vocab, tokenize
from stsp.fitting import FitSpec
from stsp.sysexit import ConfigurationError

# ----------------------------------------------------------------------------------------

SPACE = ["orbit", "rocket", "planet", "launch", "nasa", "moon", "shuttle", "star"]
SPORT = ["goal", "team", "match", "score", "league", "coach", "player", "season"]
COOKING = ["flour", "sugar", "oven", "butter", "whisk", "recipe", "dough", "bake"]

FIXED = dict(alpha=0.5, c=1.0, theta=1.0, r=1.0)

# ----------------------------------------------------------------------------------------


def make_doc(words, i, size=6):
    picked = [words[(i + j) % len(words)] for j in range(size)]
    return " ".join(picked + picked[:1])


def make_labeled(n_per_class, offset=0, size=6):
    docs = []
    for i in range(n_per_class):
        docs.append(("space", make_doc(SPACE, i + offset, size)))
        docs.append(("sport", make_doc(SPORT, i + offset, size)))
    return docs


@pytest.fixture(scope="module")
def corpus():
    return Corpus.from_labeled(make_labeled(24), stopwords=[], min_doc_freq=1)


@pytest.fixture(scope="module")
def fixed_classifier(corpus):
    return classifier.train(corpus, fit_spec=FitSpec("nb_stsp", (), FIXED))


# ----------------------------------------------------------------------------------------


def test_tokenize():
    assert tokenize("The Moon-landing, 1969!") == ["the", "moon", "landing"]
    assert tokenize("") == []


def test_shipped_stopwords():
    words = classifier.load_stopwords()
    assert {"the", "and", "of"} <= words
    assert all(not word.startswith("#") for word in words)


def test_bag_of_words_forms():
    stop = frozenset(["the"])
    assert classifier.bag_of_words("the moon the moon star", stop) == dict(moon=2, star=1)
    assert classifier.bag_of_words(["moon", "moon", "the"], stop) == dict(moon=2)
    assert classifier.bag_of_words(dict(moon=2, star=0), stop, vocabulary={"moon"}) == dict(moon=2)


def test_build_vocab():
    vocab = build_vocab(["the moon rises", "a moon sets", "star"], min_doc_freq=1)
    assert "the" not in vocab and "a" not in vocab
    assert vocab.tokens == ["moon", "rises", "sets", "star"]
    assert vocab.doc_freq["moon"] == 2
    assert len(build_vocab(["the moon rises", "a moon sets"], min_doc_freq=2)) == 1


@pytest.mark.parametrize("docs, min_doc_freq", [(["the of and"], 1), (["moon", "star"], 2)])
def test_build_vocab_empty(docs, min_doc_freq):
    with pytest.raises(ConfigurationError):
        build_vocab(docs, min_doc_freq=min_doc_freq)


def test_corpus_keeps_vocabulary_tokens(corpus):
    assert corpus.classes == ("space", "sport")
    assert len(corpus.documents["space"]) == 24
    data = corpus.class_dataset("sport")
    assert data.n_obs == 24
    assert set(data.trait_ids) == set(SPORT)
    restricted = Corpus.from_labeled([("space", "moon comet")], vocabulary=corpus.vocabulary)
    assert restricted.documents["space"] == [dict(moon=1)]


# ----------------------------------------------------------------------------------------


def test_separable_corpus(fixed_classifier):
    result = classifier.evaluate(fixed_classifier, make_labeled(4, offset=1))
    assert result.accuracy == 1.0
    assert result.probabilities.shape == (8, 2)
    assert np.all(result.probabilities[:4, 0] > 0.99)
    assert np.all(result.probabilities[4:, 1] > 0.99)
    assert np.allclose(result.probabilities.sum(axis=1), 1.0)
    assert result.labels == ["space"] * 4 + ["sport"] * 4
    assert result.confusion["space"] == dict(space=4, sport=0)
    summary = result.summary()
    assert summary["documents"] == 8 and summary["classes"] == ["space", "sport"]


def test_unseen_words_count_as_new_traits(fixed_classifier):
    p = classifier.classify(fixed_classifier, "rocket rocket comet asteroid")
    assert p[0] > p[1]
    assert p.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("doc", ["", "1999 2024", {}])
def test_empty_document_is_uniform(fixed_classifier, doc):
    assert np.allclose(classifier.classify(fixed_classifier, doc), [0.5, 0.5])


def test_empirical_prior():
    labeled = make_labeled(4) + [("space", make_doc(SPACE, 5))] * 4
    corpus = Corpus.from_labeled(labeled, stopwords=[], min_doc_freq=1)
    clf = classifier.train(corpus, fit_spec=FitSpec("nb_stsp", (), FIXED), class_prior="empirical")
    assert np.allclose(np.exp(clf.log_prior), [8 / 12, 4 / 12])
    uniform = classifier.train(corpus, fit_spec=FitSpec("nb_stsp", (), FIXED))
    assert np.allclose(uniform.log_prior, -math.log(2.0))


def test_fitted_models_classify(corpus):
    test_docs = make_labeled(4, offset=3)
    for model in classifier.CLASSIFIER_MODELS:
        spec = FitSpec.for_model(model, multistart=2, maxiter=100)
        clf = classifier.train(corpus, model, spec, threads=2)
        assert all(cm.fit is not None and np.isfinite(cm.log_marginal) for cm in clf.class_models)
        assert classifier.evaluate(clf, test_docs, threads=2).accuracy >= 0.9


def three_class_docs(n_per_class, offset=0, rare_words=0):
    """Each class reuses one word of the next class's list in every document."""
    lists = dict(space=SPACE, sport=SPORT, cooking=COOKING)
    nexts = dict(space=SPORT, sport=COOKING, cooking=SPACE)
    docs = []
    for label, words in lists.items():
        for i in range(n_per_class):
            rare = [f"rare{label}{chr(97 + i)}{chr(97 + j)}" for j in range(rare_words)]
            text = " ".join([make_doc(words, i + offset), nexts[label][(i + offset) % 8]] + rare)
            docs.append((label, text))
    return docs


def test_three_class_models_compared():
    corpus = Corpus.from_labeled(three_class_docs(24), stopwords=[], min_doc_freq=1)
    test_docs = three_class_docs(6, offset=2, rare_words=3)
    accuracy = {}
    for model in classifier.CLASSIFIER_MODELS:
        clf = classifier.train(corpus, model, FitSpec.for_model(model, multistart=2, maxiter=100))
        accuracy[model] = classifier.evaluate(clf, test_docs).accuracy
    assert accuracy["nb_stsp"] >= 0.9
    assert accuracy["nb_stsp"] >= accuracy["nbga"]


def test_train_and_evaluate_errors(corpus, fixed_classifier):
    with pytest.raises(ConfigurationError):
        classifier.train(corpus, class_prior="flat")
    with pytest.raises(ConfigurationError):
        classifier.train(corpus, model="sbsp")
    with pytest.raises(ConfigurationError):
        classifier.evaluate(fixed_classifier, [("cooking", "flour sugar")])


def test_doctests():
    import doctest

    failures, _ = doctest.testmod(classifier)
    assert failures == 0
