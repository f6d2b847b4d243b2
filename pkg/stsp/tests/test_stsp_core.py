"""Tests for trait datasets, sufficient statistics, marginals and predictive laws
of stsp_core.

Most marginal checks use the chain rule: the ratio of marginals before and
after one more observation must equal the predictive probability of that
observation, and marginals summed over all possible observations equal 1.
"""
import math

import numpy as np
import pytest
from scipy import integrate, special

from stsp import stsp_core
from stsp import special_math
from stsp.special_math import StableParams
from stsp.stsp_core import (
    SuffStats,
    TraitDataset,
    log_marginal_nb,
    log_marginal_poisson,
    predictive_old_trait_pmf,
    predictive_old_trait_table,
    suff_stats,
    unseen_traits_law,
)
from stsp.sysexit import ConfigurationError, DomainError, GridTruncationError, ModelMismatchError
from stsp.tests.helpers import QUAD_SETTINGS, gamma_poisson_pmf, half_line_integral

# ----------------------------------------------------------------------------------------

# Three documents over four words.
DENSE = np.array(
    [
        [2, 0, 1, 0],
        [1, 3, 0, 0],
        [0, 1, 0, 5],
    ]
)

# alpha, c, theta, r; integer and real dispersions exercise both I(r, n) paths.
PARAMS = [
    StableParams(0.1, 1.0, 1.0, 1.0),
    StableParams(0.5, 3.0, 2.0, 2.0),
    StableParams(0.7, 0.5, 1.0, 2.5),
]

# ----------------------------------------------------------------------------------------


def dense_stats(r=1.0):
    return suff_stats(TraitDataset.from_dense(DENSE, ["w0", "w1", "w2", "w3"]), r)


def test_dataset_from_dense():
    data = TraitDataset.from_dense(DENSE, ["w0", "w1", "w2", "w3"])
    assert data.n_obs == 3
    assert data.k == data.n_traits == 4
    assert data.total_score == DENSE.sum()
    assert sorted(data.triples()) == sorted(
        [(0, "w0", 2), (1, "w0", 1), (1, "w1", 3), (2, "w1", 1), (0, "w2", 1), (2, "w3", 5)]
    )
    record = data.traits[1]
    assert (record.trait_id, record.m, record.q, record.entries) == ("w1", 2, 4, {1: 3, 2: 1})


def test_dataset_drops_zero_scores_and_keeps_empty_rows():
    data = TraitDataset.from_triples(5, [(0, "a", 1), (1, "b", 0), (3, "a", 2)])
    assert data.trait_ids == ("a",)
    assert data.n_obs == 5
    assert TraitDataset.empty(4).k == 0


@pytest.mark.parametrize(
    "n_obs, triples, kind, error",
    [
        (2, [(0, "a", 1), (0, "a", 2)], "count", ConfigurationError),
        (2, [(2, "a", 1)], "count", ConfigurationError),
        (2, [(0, "a", -1)], "count", ConfigurationError),
        (2, [(0, "a", 1.5)], "count", ModelMismatchError),
        (2, [(0, "a", 1)], "ordinal", ConfigurationError),
    ],
)
def test_dataset_validation(n_obs, triples, kind, error):
    with pytest.raises(error):
        TraitDataset.from_triples(n_obs, triples, kind)


def test_dataset_rows():
    data = TraitDataset.from_dense(DENSE, ["w0", "w1", "w2", "w3"])
    head, tail = data.head(2), data.tail(2)
    assert (head.n_obs, head.trait_ids) == (2, ("w0", "w1", "w2"))
    assert (tail.n_obs, tail.trait_ids) == (1, ("w1", "w3"))
    assert list(tail.triples()) == [(0, "w1", 1), (0, "w3", 5)]
    assert data.rows(5, 9).n_obs == 0


# ----------------------------------------------------------------------------------------


def test_suff_stats():
    stats = dense_stats(2.0)
    assert (stats.n, stats.k_n) == (3, 4)
    assert stats.m.tolist() == [2, 2, 1, 1]
    assert stats.q.tolist() == [3, 4, 1, 5]
    scores = DENSE[DENSE > 0]
    assert stats.log_binom_sum == pytest.approx(float(np.sum(special_math.log_binom(scores, 2.0))))
    assert stats.log_factorial_sum == pytest.approx(float(np.sum(special.gammaln(scores + 1.0))))
    assert stats.at_r(0.5).log_binom_sum == pytest.approx(float(np.sum(special_math.log_binom(scores, 0.5))))


def test_suff_stats_rejects_real_scores():
    data = TraitDataset.from_triples(1, [(0, "a", 0.25)], "real")
    with pytest.raises(ModelMismatchError):
        suff_stats(data, 1.0)


def test_augment_matches_recomputed_stats():
    stats = dense_stats(1.5)
    augmented = stats.augment([0, 3], [4, 1], [2, 7])
    extended = np.zeros((4, 6), dtype=int)
    extended[:3, :4] = DENSE
    extended[3] = [4, 0, 0, 1, 2, 7]
    direct = suff_stats(TraitDataset.from_dense(extended), 1.5)
    assert (augmented.n, augmented.k_n) == (4, 6)
    assert augmented.m.tolist() == direct.m.tolist()
    assert augmented.q.tolist() == direct.q.tolist()
    assert augmented.log_binom_sum == pytest.approx(direct.log_binom_sum)
    assert augmented.log_factorial_sum == pytest.approx(direct.log_factorial_sum)


# ----------------------------------------------------------------------------------------


def test_empty_marginal_is_zero():
    assert log_marginal_nb(SuffStats.empty(0), PARAMS[1]) == 0.0


@pytest.mark.parametrize("params", PARAMS)
def test_nb_empty_row_chain_rule(params):
    """m(data + empty row) / m(data) = Pr(no new traits) * prod_l Pr(A_l = 0)."""
    stats = dense_stats(params.r)
    augmented = stats.augment([], [])
    ratio = log_marginal_nb(augmented, params) - log_marginal_nb(stats, params)
    no_new = unseen_traits_law(stats, params, 1).logpmf(0)
    zeros = sum(predictive_old_trait_pmf(q, stats.n, params, grid_max=0)[0][0] for q in stats.q.tolist())
    assert ratio == pytest.approx(no_new + zeros, abs=1e-9)


@pytest.mark.parametrize("params", PARAMS)
def test_nb_old_trait_chain_rule(params):
    """An observation scoring only trait 2 with a = 3."""
    stats = dense_stats(params.r)
    augmented = stats.augment([2], [3])
    ratio = log_marginal_nb(augmented, params) - log_marginal_nb(stats, params)
    tables = [predictive_old_trait_pmf(q, stats.n, params, grid_max=3)[0] for q in stats.q.tolist()]
    no_new = unseen_traits_law(stats, params, 1).logpmf(0)
    expected = no_new + tables[0][0] + tables[1][0] + tables[2][3] + tables[3][0]
    assert ratio == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("alpha, c", [(0.5, 2.0), (0.2, 0.7)])
def test_nb_single_row_marginals_sum_to_unseen_pmf(alpha, c):
    """With r = 1 the marginals of every one-trait first row, summed over the
    score, equal the probability that the first row shows exactly one trait."""
    params = StableParams(alpha, c, r=1.0)
    n_scores = 5000
    total = 0.0
    for a in range(1, n_scores + 1):
        stats = SuffStats.from_scores(1, [1], [a], [a], [1], 1.0)
        total += math.exp(log_marginal_nb(stats, params))
    law = unseen_traits_law(SuffStats.empty(0), params, 1)
    assert total == pytest.approx(float(law.pmf(1)), rel=1e-3)


def shuffled(dense, seed):
    rng = np.random.default_rng(seed)
    return dense[rng.permutation(dense.shape[0])][:, rng.permutation(dense.shape[1])]


@pytest.mark.parametrize("params", PARAMS)
def test_marginals_ignore_row_and_trait_order(params):
    dense = np.random.default_rng(8).poisson(0.9, size=(7, 6))
    stats = suff_stats(TraitDataset.from_dense(dense), params.r)
    for seed in range(3):
        other = suff_stats(TraitDataset.from_dense(shuffled(dense, seed)), params.r)
        assert (other.n, other.k_n) == (stats.n, stats.k_n)
        assert sorted(zip(other.m.tolist(), other.q.tolist())) == sorted(zip(stats.m.tolist(), stats.q.tolist()))
        assert other.log_binom_sum == pytest.approx(stats.log_binom_sum, abs=1e-12)
        assert log_marginal_nb(other, params) == pytest.approx(log_marginal_nb(stats, params), abs=1e-12)
        assert log_marginal_poisson(other, params) == pytest.approx(log_marginal_poisson(stats, params), abs=1e-12)


def test_theta_cancels():
    stats = dense_stats(2.0)
    a = StableParams(0.4, 2.0, theta=1.0, r=2.0)
    b = a.replace(theta=37.0)
    assert log_marginal_nb(stats, a) == log_marginal_nb(stats, b)
    assert log_marginal_poisson(stats, a) == log_marginal_poisson(stats, b)


@pytest.mark.parametrize("params", PARAMS)
def test_poisson_empty_row_is_a_probability(params):
    stats = dense_stats(params.r)
    ratio = log_marginal_poisson(stats.augment([], []), params) - log_marginal_poisson(stats, params)
    assert -50.0 < ratio < 0.0


def test_poisson_single_trait_direct():
    """One observation scoring one trait a = 2: direct quadrature of the Poisson rate integral."""
    params = StableParams(0.4, 1.5, r=1.0)
    stats = SuffStats.from_scores(1, [1], [2], [2], [1], 1.0)
    alpha, c = params.alpha, params.c

    def integrand(s):
        return math.exp(-s * 1 - s) * (-math.expm1(-s)) ** (-1.0 - alpha) * s**2

    f = half_line_integral(integrand)
    i_1 = special_math.i_integral(1, 1, alpha)
    expected = math.log(c) + math.log(alpha) - (c + 1.0) * math.log1p(alpha * i_1) + math.log(f) - math.log(2.0)
    assert log_marginal_poisson(stats, params) == pytest.approx(expected, abs=1e-7)


# ----------------------------------------------------------------------------------------


def test_spike_slab_g_direct():
    n, scores, eta, alpha = 3, [1.3], 0.2, 0.4
    spread = (1.3 - 0.2) ** 2

    def integrand(s):
        return math.exp(-s * (n - 1) - s) * (-math.expm1(-s)) ** (-alpha) * math.sqrt(s) * math.exp(-s * spread / 2)

    value = half_line_integral(integrand)
    expected = math.log(value) - 0.5 * math.log(2.0 * math.pi)
    assert stsp_core.log_spike_slab_g(n, scores, eta, alpha) == pytest.approx(expected, abs=1e-8)


def test_spike_slab_marginal():
    data = TraitDataset.from_triples(
        3, [(0, "a", 0.5), (2, "a", 1.1), (1, "b", 2.0)], "real", atom_params={"a": 0.0, "b": 1.0}
    )
    params = StableParams(0.3, 2.0)
    value = stsp_core.log_marginal_spike_slab(data, params)
    i_3 = special_math.i_integral(1, 3, 0.3)
    expected = (
        special.gammaln(4.0)
        - special.gammaln(2.0)
        + 2 * math.log(0.3)
        - 4.0 * math.log1p(0.3 * i_3)
        + stsp_core.log_spike_slab_g(3, [0.5, 1.1], 0.0, 0.3)
        + stsp_core.log_spike_slab_g(3, [2.0], 1.0, 0.3)
    )
    assert value == pytest.approx(expected, abs=1e-10)


def test_spike_slab_errors():
    counts = TraitDataset.from_triples(1, [(0, "a", 1)])
    with pytest.raises(ModelMismatchError):
        stsp_core.log_marginal_spike_slab(counts, StableParams(0.3, 2.0))
    real = TraitDataset.from_triples(1, [(0, "a", 0.5)], "real")
    with pytest.raises(ConfigurationError):
        stsp_core.log_marginal_spike_slab(real, StableParams(0.3, 2.0))


# ----------------------------------------------------------------------------------------


def test_posterior_tilt():
    stats = dense_stats(1.0)
    params = StableParams(0.5, 3.0, theta=2.0, r=1.0)
    law = stsp_core.posterior_tilt(stats, params)
    i_3 = special_math.i_integral(1, 3, 0.5)
    assert law.shape == 7.0
    assert law.rate == pytest.approx(2.0 * (1.0 + 0.5 * i_3))


@pytest.mark.parametrize("params, m", [(PARAMS[1], 5), (PARAMS[2], 40)])
def test_unseen_law_is_tilt_mixture(params, m):
    """Poisson(θ α x (I(r, n+m) - I(r, n))) new traits mixed over the posterior tilt x."""
    stats = dense_stats(params.r)
    tilt = stsp_core.posterior_tilt(stats, params)
    i_n = special_math.i_integral(params.r, stats.n, params.alpha)
    gap = special_math.i_integral(params.r, stats.n + m, params.alpha) - i_n
    law = unseen_traits_law(stats, params, m)
    for k in range(51):
        mixed = gamma_poisson_pmf(k, tilt.shape, tilt.rate, params.theta * params.alpha * gap)
        assert abs(mixed - float(law.pmf(k))) < 1e-8


def test_unseen_traits_law():
    params = StableParams(0.5, 2.0, r=1.0)
    # I(1, 1) = 2, so the first row shows NegBin(2, 1/2) traits
    law = unseen_traits_law(SuffStats.empty(0), params, 1)
    assert law.success_prob == pytest.approx(0.5)
    assert law.mean == pytest.approx(2.0)
    stats = dense_stats(1.0)
    assert unseen_traits_law(stats, params, 0).success_prob == 1.0
    means = [unseen_traits_law(stats, params, m).mean for m in (1, 10, 100)]
    assert means[0] < means[1] < means[2]
    with pytest.raises(DomainError):
        unseen_traits_law(stats, params, -1)


# ----------------------------------------------------------------------------------------


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_predictive_pmf_sums_to_one(r):
    params = StableParams(0.1, 1.0, r=r)
    table, tail = predictive_old_trait_pmf(2, 8, params)
    assert abs(np.exp(table).sum() - 1.0) < 1e-6
    assert tail < 1e-6


def test_predictive_pmf_closed_form():
    # n = 0, q = 1, r = 1: Pr(k) = (1 - alpha) / ((1 + k - alpha)(2 + k - alpha))
    alpha = 0.5
    table, tail = predictive_old_trait_pmf(1, 0, StableParams(alpha, 1.0), grid_max=10)
    k = np.arange(11)
    assert np.allclose(np.exp(table), (1 - alpha) / ((1 + k - alpha) * (2 + k - alpha)), rtol=1e-12)
    assert tail == pytest.approx((1 - alpha) / (12 - alpha), rel=1e-8)


def log_jump_integral(a, b):
    """log of the integral of (1 - e^-s)^a e^-bs over s > 0, by adaptive quadrature."""
    peak = math.log1p(a / b)

    def log_f(s):
        return a * math.log(-math.expm1(-s)) - b * s

    top = log_f(peak)

    def f(s):
        return math.exp(log_f(s) - top) if s > 0 else 0.0

    pieces = [(0.0, peak), (peak, 8.0 * peak), (8.0 * peak, np.inf)]
    return top + math.log(sum(integrate.quad(f, lo, hi, **QUAD_SETTINGS)[0] for lo, hi in pieces))


@pytest.mark.parametrize("n, q, r, alpha", [(5, 3, 2.0, 0.3), (50, 10, 10.0, 0.5)])
def test_predictive_pmf_matches_jump_density(n, q, r, alpha):
    """Pr(k) is the NegBin(r, 1 - e^-s) pmf averaged over the posterior jump density
    of the trait, ∝ (1 - e^-s)^(q-α-1) e^-s(rn+1)."""
    table, _ = predictive_old_trait_pmf(q, n, StableParams(alpha, 1.0, r=r), grid_max=10)
    norm = log_jump_integral(q - alpha - 1.0, r * n + 1.0)
    for k in range(11):
        log_coef = special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1.0)
        expected = log_coef + log_jump_integral(q + k - alpha - 1.0, r * (n + 1) + 1.0) - norm
        assert math.exp(table[k]) == pytest.approx(math.exp(expected), rel=1e-6)


def test_predictive_table_grows_grid():
    # tail beyond M is 0.5 / (M + 1.5): below 1e-3 first at M = 512
    table, tail = predictive_old_trait_table(1, 0, StableParams(0.5, 1.0), grid_max=16, tolerance=1e-3)
    assert len(table) == 513
    assert tail < 1e-3


def test_predictive_table_gives_up():
    with pytest.raises(GridTruncationError):
        predictive_old_trait_table(1, 0, StableParams(0.5, 1.0), grid_max=1024, tolerance=1e-12)


def test_predictive_pmf_needs_positive_total():
    with pytest.raises(DomainError):
        predictive_old_trait_pmf(0, 3, StableParams(0.5, 1.0))


# ----------------------------------------------------------------------------------------


def test_sbsp_single_row_marginals_sum_to_one():
    """Dividing by k! removes trait labels: the one-row marginals then form the
    NegBin law of the number of features in the first row."""
    params = StableParams(0.5, 2.0, theta=1.0)
    total = 0.0
    for k in range(0, 200):
        stats = SuffStats.from_scores(1, np.ones(k), np.ones(k), [1], [k], 1.0)
        total += math.exp(stsp_core.log_marginal_sbsp(stats, params) - special.gammaln(k + 1.0))
    assert total == pytest.approx(1.0, abs=1e-10)


def test_sbsp_needs_binary():
    with pytest.raises(ModelMismatchError):
        stsp_core.log_marginal_sbsp(dense_stats(1.0), StableParams(0.5, 2.0))


def test_doctests():
    import doctest

    failures, _ = doctest.testmod(stsp_core)
    assert failures == 0
