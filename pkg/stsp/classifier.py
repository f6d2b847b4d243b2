"""Nonparametric naive-Bayes text classification by predictive marginal ratios.

Each class is a trait-allocation dataset (documents x words with counts) fitted
separately by empirical Bayes.  A test document is scored for class j by

    log m(train_j ∪ {doc}) - log m(train_j),

the log predictive probability of the document given the class, with the
training marginal cached at train time.  Words never seen in class j enter the
augmented marginal as new traits with m = 1.
"""
import os
import re
import math
import collections
import collections.abc
import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from stsp import log
from stsp.models import get_model
from stsp.fitting import FitSpec, fit_stats
from stsp.stsp_core import TraitDataset
from stsp.sysexit import ConfigurationError, FitFailureError

# -----------------------------------------------------------------------------

STOPWORDS_PATH = os.path.join(os.path.dirname(__file__), "data", "stopwords_en.txt")

DEFAULT_MIN_DOC_FREQ = 3

CLASS_PRIORS = ("uniform", "empirical")

CLASSIFIER_MODELS = ("nb_stsp", "nbga")

TOKEN_RE = re.compile(r"[^\W_]+")

# -----------------------------------------------------------------------------


def load_stopwords(path=None):
    """Return the stopword set stored one per line in `path` (the shipped
    English list by default); blank lines and #-comments are skipped."""
    path = path or STOPWORDS_PATH
    with open(path, encoding="utf-8") as handle:
        return frozenset(
            line.strip().lower() for line in handle if line.strip() and not line.lstrip().startswith("#")
        )


def _as_stopwords(stopwords):
    if stopwords is None:
        return load_stopwords()
    if isinstance(stopwords, (str, os.PathLike)):
        return load_stopwords(stopwords)
    return frozenset(word.lower() for word in stopwords)


def tokenize(text):
    """Lowercase `text`, split it on non-alphanumerics and drop pure digits.

    >>> tokenize("Re: 2 cats, 1999 dogs & CAT-food")
    ['re', 'cats', 'dogs', 'cat', 'food']
    """
    return [token for token in TOKEN_RE.findall(text.lower()) if not token.isdigit()]


def bag_of_words(doc, stopwords=frozenset(), vocabulary=None):
    """Token -> count mapping of `doc` (text, token list or mapping), without
    stopwords and, when `vocabulary` is given, restricted to it."""
    if isinstance(doc, str):
        counts = collections.Counter(tokenize(doc))
    elif isinstance(doc, collections.abc.Mapping):
        counts = collections.Counter({str(token): int(count) for token, count in doc.items() if count > 0})
    else:
        counts = collections.Counter(str(token) for token in doc)
    return {
        token: count
        for token, count in counts.items()
        if token not in stopwords and (vocabulary is None or token in vocabulary)
    }


# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Retained training tokens.

    Attributes
    ----------
    token_ids : dict
        token -> dense id, assigned in order of first appearance.
    doc_freq : dict
        token -> number of training documents containing it.
    stopwords : frozenset
    min_doc_freq : int
    """

    token_ids: dict
    doc_freq: dict
    stopwords: frozenset
    min_doc_freq: int

    def __len__(self):
        return len(self.token_ids)

    def __contains__(self, token):
        return token in self.token_ids

    @property
    def tokens(self):
        return list(self.token_ids)


def build_vocab(raw_docs, stopwords=None, min_doc_freq=DEFAULT_MIN_DOC_FREQ):
    """Build the vocabulary of tokens, not stopwords, found in at least
    `min_doc_freq` of `raw_docs`.

    Parameters
    ----------
    raw_docs : iterable
        Documents as text, token lists or token -> count mappings.
    stopwords : path, iterable of str, or None
        None loads the shipped English list.
    min_doc_freq : int

    Returns
    -------
    Vocabulary

    >>> vocab = build_vocab(["a b", "b c", "b"], stopwords=[], min_doc_freq=2)
    >>> vocab.tokens, vocab.doc_freq["b"]
    (['b'], 3)
    """
    stopwords = _as_stopwords(stopwords)
    doc_freq = collections.Counter()
    order = {}
    for doc in raw_docs:
        for token in bag_of_words(doc, stopwords):
            doc_freq[token] += 1
            order.setdefault(token, len(order))
    kept = [token for token in sorted(order, key=order.get) if doc_freq[token] >= min_doc_freq]
    if not kept:
        raise ConfigurationError(
            f"empty vocabulary: no token outside the stopwords appears in {min_doc_freq} or more documents"
        )
    log.verbose("vocabulary keeps", len(kept), "of", len(order), "tokens", verbosity=55)
    return Vocabulary(
        {token: i for i, token in enumerate(kept)}, {token: doc_freq[token] for token in kept}, stopwords, min_doc_freq
    )


@dataclass(frozen=True)
class Corpus:
    """Labeled training documents as bags of words over a shared vocabulary.

    Attributes
    ----------
    classes : tuple
        Class labels in order of first appearance.
    documents : dict
        label -> list of token -> count mappings.
    vocabulary : Vocabulary
    """

    classes: tuple
    documents: dict
    vocabulary: Vocabulary

    @classmethod
    def from_labeled(cls, labeled_docs, stopwords=None, min_doc_freq=DEFAULT_MIN_DOC_FREQ, vocabulary=None):
        """Build the vocabulary from `labeled_docs`, (label, document) pairs, unless
        one is given, and keep each document's in-vocabulary counts."""
        labeled_docs = list(labeled_docs)
        if vocabulary is None:
            vocabulary = build_vocab([doc for _, doc in labeled_docs], stopwords, min_doc_freq)
        documents = {}
        for label, doc in labeled_docs:
            documents.setdefault(label, []).append(bag_of_words(doc, vocabulary.stopwords, vocabulary))
        return cls(tuple(documents), documents, vocabulary)

    def class_dataset(self, label):
        """The documents of class `label` as a count TraitDataset over tokens."""
        return documents_dataset(self.documents[label])


def documents_dataset(bags):
    """Count TraitDataset with one row per token -> count mapping in `bags`."""
    triples = ((i, token, count) for i, bag in enumerate(bags) for token, count in bag.items())
    return TraitDataset.from_triples(len(bags), triples, "count")


# -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassModel:
    """Fitted state of one class."""

    label: str
    n_docs: int
    stats: object
    params: object
    log_marginal: float
    positions: dict
    fit: object = None


@dataclass(frozen=True, eq=False)
class TrainedClassifier:
    """Per-class fits of one score model.

    Attributes
    ----------
    model : ScoreModel
    classes : tuple
    class_models : tuple of ClassModel
    log_prior : ndarray
        Log class prior, uniform unless trained with class_prior="empirical".
    stopwords : frozenset
        Removed from test documents before scoring.
    """

    model: object
    classes: tuple
    class_models: tuple
    log_prior: np.ndarray
    stopwords: frozenset = field(default_factory=frozenset)


def _train_class(model, label, bags, spec):
    data = documents_dataset(bags)
    stats = model.prepare(data)
    try:
        result = fit_stats(stats, spec, model)
    except FitFailureError as exc:
        raise FitFailureError(f"class {label!r}: {exc}", exc.diagnostics) from exc
    params = model.make_params(result.params)
    log.info("Class", repr(label), "docs", data.n_obs, "words", data.k, "params", log.PP(result.params))
    positions = {token: j for j, token in enumerate(data.trait_ids)}
    return ClassModel(label, data.n_obs, stats, params, result.log_marginal, positions, result)


def train(corpus, model="nb_stsp", fit_spec=None, class_prior="uniform", threads=1):
    """Fit one score model per class of `corpus`.

    Parameters
    ----------
    corpus : Corpus
    model : str
        "nb_stsp" or "nbga".
    fit_spec : FitSpec, optional
        Defaults to every parameter free except θ for nb_stsp.
    class_prior : str
        "uniform" or "empirical" (proportional to training class sizes).
    threads : int
        Classes fitted concurrently.

    Returns
    -------
    TrainedClassifier
    """
    if class_prior not in CLASS_PRIORS:
        raise ConfigurationError(f"unknown class prior {class_prior!r}, expected one of {CLASS_PRIORS}")
    spec = fit_spec or FitSpec.for_model(model)
    score_model = get_model(spec.model, spec.quad_order, spec.i_method)
    if score_model.model_name not in CLASSIFIER_MODELS:
        raise ConfigurationError(f"classifier supports {CLASSIFIER_MODELS}, not {score_model.model_name}")
    empty = [label for label in corpus.classes if not corpus.documents[label]]
    if empty:
        raise ConfigurationError(f"classes without training documents: {empty}")
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        class_models = tuple(
            pool.map(lambda label: _train_class(score_model, label, corpus.documents[label], spec), corpus.classes)
        )
    sizes = np.array([cm.n_docs for cm in class_models], dtype=float)
    if class_prior == "empirical":
        log_prior = np.log(sizes / sizes.sum())
    else:
        log_prior = np.full(len(sizes), -math.log(len(sizes)))
    return TrainedClassifier(score_model, tuple(corpus.classes), class_models, log_prior, corpus.vocabulary.stopwords)


def log_predictive(clf, class_model, bag):
    """log m(train ∪ {doc}) - log m(train) for one class."""
    known = [(class_model.positions[token], count) for token, count in bag.items() if token in class_model.positions]
    new = [count for token, count in bag.items() if token not in class_model.positions]
    positions = [j for j, _ in known]
    scores = [count for _, count in known]
    augmented = class_model.stats.augment(positions, scores, new)
    return clf.model.log_marginal(augmented, class_model.params) - class_model.log_marginal


def classify(clf, doc):
    """Class assignment probabilities of `doc` (text, token list or token -> count mapping).

    Stopwords are removed; out-of-vocabulary words are kept as new traits.
    An empty document gets uniform probabilities.

    Returns
    -------
    ndarray
        Probabilities in the order of `clf.classes`, summing to 1.
    """
    bag = bag_of_words(doc, clf.stopwords)
    if not bag:
        log.warning("Empty document after stopword removal; returning uniform class probabilities")
        return np.full(len(clf.classes), 1.0 / len(clf.classes))
    logits = np.array([log_predictive(clf, cm, bag) for cm in clf.class_models]) + clf.log_prior
    return special.softmax(logits)


@dataclass(frozen=True, eq=False)
class Evaluation:
    """Outcome of `evaluate`.

    Attributes
    ----------
    accuracy : float
    classes : tuple
    labels : list
        True labels, sorted by class order.
    probabilities : ndarray, shape (documents, classes)
        Rows in the order of `labels`.
    predicted : list
    confusion : dict
        true label -> predicted label -> count.
    """

    accuracy: float
    classes: tuple
    labels: list
    probabilities: np.ndarray
    predicted: list
    confusion: dict

    def summary(self):
        return dict(
            accuracy=self.accuracy,
            documents=len(self.labels),
            classes=[str(label) for label in self.classes],
            confusion={str(k): {str(p): c for p, c in v.items()} for k, v in self.confusion.items()},
        )


def evaluate(clf, labeled_docs, threads=1):
    """Classify every (label, document) pair and report accuracy.

    Rows of the probability matrix are grouped by true class in the order of
    `clf.classes`, keeping input order within a class.
    """
    order = {label: i for i, label in enumerate(clf.classes)}
    labeled_docs = list(labeled_docs)
    unknown = sorted({str(label) for label, _ in labeled_docs if label not in order})
    if unknown:
        raise ConfigurationError(f"test labels not among the trained classes: {unknown}")
    labeled_docs.sort(key=lambda item: order[item[0]])
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        rows = list(pool.map(lambda item: classify(clf, item[1]), labeled_docs))
    probabilities = np.array(rows).reshape(len(labeled_docs), len(clf.classes))
    labels = [label for label, _ in labeled_docs]
    predicted = [clf.classes[i] for i in np.argmax(probabilities, axis=1)] if labels else []
    confusion = {label: {other: 0 for other in clf.classes} for label in clf.classes}
    for truth, guess in zip(labels, predicted):
        confusion[truth][guess] += 1
    correct = sum(truth == guess for truth, guess in zip(labels, predicted))
    accuracy = correct / len(labels) if labels else float("nan")
    log.info("Accuracy", f"{accuracy:.4f}", "on", len(labels), "documents")
    return Evaluation(accuracy, clf.classes, labels, probabilities, predicted, confusion)
