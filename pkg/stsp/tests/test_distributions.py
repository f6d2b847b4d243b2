"""Tests for the parametric laws and samplers of distributions."""
import math

import numpy as np
import pytest
from scipy import stats

from stsp import distributions
from stsp.distributions import (
    GammaLaw,
    NegBinLaw,
    PoissonLaw,
    RngSeed,
    sample_grid_pmf,
    sample_h_new_trait,
    sample_score_given_rate,
    zero_truncated_negbin_logpmf,
)
from stsp.special_math import StableParams
from stsp.sysexit import DegenerateDistributionError, DomainError
from stsp.tests.helpers import check_mean, half_line_integral

# ----------------------------------------------------------------------------------------

N_DRAWS = 20000

# ----------------------------------------------------------------------------------------


def test_rng_streams_are_reproducible_and_distinct():
    seed = RngSeed(2**63 + 11)
    a = seed.generator(3).random(5)
    b = RngSeed(2**63 + 11).generator(3).random(5)
    c = seed.generator(4).random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert len(seed.generators(3)) == 3


@pytest.mark.parametrize("seed", [-1, 2**64, 1.5])
def test_rng_bad_seed(seed):
    with pytest.raises(DomainError):
        RngSeed(seed)


def test_as_generator_accepts_every_form():
    g = np.random.default_rng(0)
    assert distributions.as_generator(g) is g
    x = distributions.as_generator(5).random()
    y = distributions.as_generator(RngSeed(5)).random()
    assert x == y


# ----------------------------------------------------------------------------------------


def test_negbin_law_matches_scipy():
    law = NegBinLaw(3.5, 0.6)
    k = np.arange(0, 50)
    assert np.allclose(law.logpmf(k), stats.nbinom.logpmf(k, 3.5, 0.6), atol=1e-12)
    assert law.mean == pytest.approx(stats.nbinom.mean(3.5, 0.6))
    assert law.variance == pytest.approx(stats.nbinom.var(3.5, 0.6))
    assert law.ppf(0.5) == int(stats.nbinom.ppf(0.5, 3.5, 0.6))


def test_negbin_point_mass():
    law = NegBinLaw(2.0, 1.0)
    assert law.mean == 0.0
    assert law.ppf(0.975) == 0
    assert law.pmf(0) == pytest.approx(1.0)
    assert law.sample(np.random.default_rng(1)) == 0


@pytest.mark.parametrize("size, p", [(0.0, 0.5), (1.0, 0.0), (1.0, 1.5)])
def test_negbin_domain(size, p):
    with pytest.raises(DomainError):
        NegBinLaw(size, p)


def test_negbin_sampler_mean():
    law = NegBinLaw(4.0, 0.3)
    check_mean(law.sample(RngSeed(1).generator(), N_DRAWS), law.mean, law.variance)


def test_gamma_and_poisson_laws():
    gamma = GammaLaw(3.0, 2.0)
    check_mean(gamma.sample(RngSeed(2).generator(), N_DRAWS), 1.5, 3.0 / 4.0)
    poisson = PoissonLaw(2.5)
    assert poisson.ppf(0.5) == 2
    assert PoissonLaw(0.0).ppf(0.99) == 0
    check_mean(poisson.sample(RngSeed(3).generator(), N_DRAWS), 2.5, 2.5)
    with pytest.raises(DomainError):
        PoissonLaw(-1.0)


# ----------------------------------------------------------------------------------------


def h_density_moments(n, params):
    r, alpha = params.r, params.alpha

    def density(s):
        return -math.expm1(-r * s) * (-math.expm1(-s)) ** (-1.0 - alpha) * math.exp(-s * (r * n + 1.0))

    def moment(power):
        f = lambda s: s**power * density(s)  # noqa: E731
        return half_line_integral(f)

    z = moment(0)
    mean = moment(1) / z
    return mean, moment(2) / z - mean**2


@pytest.mark.parametrize("n, r, alpha", [(0, 1.0, 0.5), (2, 1.5, 0.4), (10, 0.5, 0.2)])
def test_h_new_trait_mean(n, r, alpha):
    params = StableParams(alpha, 1.0, r=r)
    draws = sample_h_new_trait(n, params, RngSeed(4).generator(), size=N_DRAWS)
    assert draws.shape == (N_DRAWS,)
    assert np.all(draws > 0)
    mean, variance = h_density_moments(n, params)
    check_mean(draws, mean, variance)


def test_h_new_trait_scalar_and_empty():
    params = StableParams(0.5, 1.0, r=2.0)
    assert isinstance(sample_h_new_trait(3, params, 7), float)
    assert sample_h_new_trait(3, params, 7, size=0).shape == (0,)


@pytest.mark.parametrize("s, r", [(0.5, 2.0), (3.0, 1.0), (0.01, 10.0)])
def test_truncated_score_law(s, r):
    k = np.arange(1, 4000)
    pmf = np.exp(zero_truncated_negbin_logpmf(k, s, r))
    assert pmf.sum() == pytest.approx(1.0, abs=1e-8)
    mean = float(np.dot(k, pmf))
    variance = float(np.dot(k**2, pmf)) - mean**2
    draws = sample_score_given_rate(s, r, RngSeed(5).generator(), size=N_DRAWS)
    assert draws.min() >= 1
    check_mean(draws, mean, variance)


def test_truncated_score_shapes():
    rng = RngSeed(6).generator()
    assert isinstance(sample_score_given_rate(0.5, 2.0, rng), int)
    rates = np.array([0.1, 1.0, 5.0])
    draws = sample_score_given_rate(rates, 2.0, rng)
    assert draws.shape == (3,) and np.all(draws >= 1)
    with pytest.raises(DomainError):
        sample_score_given_rate(0.0, 1.0, rng)


# ----------------------------------------------------------------------------------------


def test_grid_pmf_sampler():
    table = np.log([0.2, 0.3, 0.5])
    draws, tail = sample_grid_pmf(table, RngSeed(8).generator(), size=N_DRAWS)
    assert tail == pytest.approx(0.0, abs=1e-12)
    freq = np.bincount(draws, minlength=3) / N_DRAWS
    assert np.allclose(freq, [0.2, 0.3, 0.5], atol=0.02)


def test_grid_pmf_reports_tail():
    _, tail = sample_grid_pmf(np.log([0.5, 0.25]), RngSeed(9).generator())
    assert tail == pytest.approx(0.25)


@pytest.mark.parametrize("table", [[-np.inf, -np.inf], [], [0.0, np.nan]])
def test_grid_pmf_degenerate(table):
    with pytest.raises(DegenerateDistributionError):
        sample_grid_pmf(np.array(table, dtype=float), RngSeed(10).generator())
