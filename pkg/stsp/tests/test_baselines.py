"""Tests for the NB-Ga and SB-SP comparator models."""
import math

import numpy as np
import pytest

from stsp import baselines
from stsp.baselines import GammaProcParams, log_marginal_nbga, log_nbga_trait_integral
from stsp.special_math import StableParams
from stsp.stsp_core import SuffStats, TraitDataset, stable_beta_mass, suff_stats
from stsp.sysexit import ConfigurationError, DivergentIntegralError, DomainError, ModelMismatchError
from stsp.tests.helpers import gamma_poisson_pmf, half_line_integral

# ----------------------------------------------------------------------------------------


def direct_trait_integral(n, q, r):
    def integrand(s):
        return math.exp(-s * r * n - s) * (-math.expm1(-s)) ** q / s

    return half_line_integral(integrand)


@pytest.mark.parametrize("n, q, r", [(0, 1, 1.0), (2, 2, 1.5), (40, 5, 0.5), (3, 60, 2.0)])
def test_trait_integral_direct(n, q, r):
    expected = math.log(direct_trait_integral(n, q, r))
    assert log_nbga_trait_integral(n, q, r, method="adaptive") == pytest.approx(expected, abs=1e-7)
    assert log_nbga_trait_integral(n, q, r) == pytest.approx(expected, abs=1e-7)


@pytest.mark.parametrize("n, q", [(50, 3), (200, 20), (12, 1)])
def test_trait_integral_laguerre_matches_adaptive(n, q):
    adaptive = log_nbga_trait_integral(n, q, 1.0, method="adaptive")
    laguerre = log_nbga_trait_integral(n, q, 1.0, method="laguerre")
    assert laguerre == pytest.approx(adaptive, abs=1e-6)


def test_trait_integral_errors():
    with pytest.raises(DivergentIntegralError):
        log_nbga_trait_integral(3, 0, 1.0)
    with pytest.raises(ConfigurationError):
        log_nbga_trait_integral(3, 2, 1.0, method="simpson")
    with pytest.raises(DomainError):
        GammaProcParams(0.0)


def test_nbga_single_row_marginals_sum_to_unseen_pmf():
    """Summing the marginals of every one-trait first row over the score gives
    Pr(first row shows exactly one trait) under the Poisson unseen law."""
    params = GammaProcParams(1.3, 1.0)
    total = 0.0
    for a in range(1, 1001):
        stats = SuffStats.from_scores(1, [1], [a], [a], [1], 1.0)
        total += math.exp(log_marginal_nbga(stats, params))
    law = baselines.unseen_traits_law_nbga(0, 1, params)
    assert law.mean == pytest.approx(1.3 * math.log(2.0))
    assert total == pytest.approx(float(law.pmf(1)), rel=5e-3)


def test_nbga_empty_row_chain_rule():
    stats = suff_stats(TraitDataset.from_dense([[2, 0, 1], [1, 3, 0]]), 2.0)
    params = GammaProcParams(2.0, 2.0)
    ratio = log_marginal_nbga(stats.augment([], []), params) - log_marginal_nbga(stats, params)
    zeros = sum(
        log_nbga_trait_integral(3, q, 2.0) - log_nbga_trait_integral(2, q, 2.0)
        for q in stats.q.tolist()
    )
    no_new = float(baselines.unseen_traits_law_nbga(2, 1, params).logpmf(0))
    assert ratio == pytest.approx(no_new + zeros, abs=1e-8)


def test_nbga_unseen_law():
    params = GammaProcParams(2.0, 0.5)
    assert baselines.unseen_traits_law_nbga(10, 0, params).mean == 0.0
    law = baselines.unseen_traits_law_nbga(10, 30, params)
    assert law.mean == pytest.approx(2.0 * math.log((1 + 40 * 0.5) / (1 + 10 * 0.5)))


# ----------------------------------------------------------------------------------------


def test_binarize():
    data = TraitDataset.from_dense([[2, 0, 1], [1, 3, 0]], ["x", "y", "z"])
    binary = baselines.binarize(data)
    assert binary.score_kind == "binary"
    assert binary.trait_ids == data.trait_ids
    assert set(binary.score.tolist()) == {1}
    stats = suff_stats(binary, 1.0)
    assert stats.q.tolist() == stats.m.tolist() == [2, 1, 1]


def test_sbsp_unseen_law():
    params = StableParams(0.5, 2.0, theta=1.0)
    empty = SuffStats.empty(0)
    law = baselines.unseen_traits_law_sbsp(empty, params, 1)
    gamma_1 = stable_beta_mass(1, 0.5)
    assert gamma_1 == pytest.approx(1.0)
    assert law.size == 3.0
    assert law.success_prob == pytest.approx(1.0 / (1.0 + gamma_1))
    assert baselines.unseen_traits_law_sbsp(empty, params, 0).success_prob == 1.0


@pytest.mark.parametrize("theta, m", [(1.0, 3), (2.5, 25)])
def test_sbsp_unseen_law_is_gamma_mixture(theta, m):
    """New features of m more rows are Poisson(x (γ₀(n+m) - γ₀(n))) with the tilt x
    ~ Gamma(k_n + c + 1, θ + γ₀(n))."""
    params = StableParams(0.4, 1.5, theta=theta)
    data = baselines.binarize(TraitDataset.from_dense([[2, 0, 1], [1, 3, 0], [0, 0, 4], [1, 0, 0]]))
    stats = suff_stats(data, 1.0)
    gamma_n = stable_beta_mass(stats.n, 0.4)
    gap = stable_beta_mass(stats.n + m, 0.4) - gamma_n
    law = baselines.unseen_traits_law_sbsp(stats, params, m)
    for k in range(51):
        mixed = gamma_poisson_pmf(k, stats.k_n + 1.5 + 1.0, theta + gamma_n, gap)
        assert abs(mixed - float(law.pmf(k))) < 1e-8


def test_sbsp_unseen_law_needs_binary():
    stats = suff_stats(TraitDataset.from_dense([[2, 1]]), 1.0)
    with pytest.raises(ModelMismatchError):
        baselines.unseen_traits_law_sbsp(stats, StableParams(0.5, 2.0), 3)


def test_doctests():
    import doctest

    failures, _ = doctest.testmod(baselines)
    assert failures == 0
