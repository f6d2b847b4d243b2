"""Shared numerical checks for the stsp tests."""
import math

import numpy as np
from scipy import integrate, special

# Sample means must lie within this many standard errors of the exact mean.
Z_LIMIT = 5.0

QUAD_SETTINGS = dict(limit=200, epsabs=0.0, epsrel=1e-10)


def half_line_integral(f):
    """∫ f(s) ds over s > 0 by adaptive quadrature on (0, 1) and (1, ∞)."""
    return integrate.quad(f, 0, 1, **QUAD_SETTINGS)[0] + integrate.quad(f, 1, np.inf, **QUAD_SETTINGS)[0]


def gamma_poisson_pmf(k, shape, rate, intensity):
    """Pr(K = k) for K ~ Poisson(intensity X), X ~ Gamma(shape, rate), integrating over X."""
    const = shape * math.log(rate) - special.gammaln(shape) - special.gammaln(k + 1.0)

    def integrand(x):
        mean = intensity * x
        return math.exp(const + special.xlogy(k, mean) - mean + (shape - 1.0) * math.log(x) - rate * x)

    mode = max(shape + k - 1.0, 0.0) / (rate + intensity)
    if mode == 0.0:
        return integrate.quad(integrand, 0, np.inf, **QUAD_SETTINGS)[0]
    below = integrate.quad(integrand, 0, mode, **QUAD_SETTINGS)[0]
    return below + integrate.quad(integrand, mode, np.inf, **QUAD_SETTINGS)[0]


def check_mean(draws, mean, variance):
    se = math.sqrt(variance / len(draws))
    assert abs(np.mean(draws) - mean) < Z_LIMIT * se, (np.mean(draws), mean, se)
