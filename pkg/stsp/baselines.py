"""Comparator priors: the gamma-process negative-binomial model (NB-Ga) and the
binary stable-Beta scaled process (SB-SP).

NB-Ga uses the CRM with Lévy intensity θ s^{-1} e^{-s} ds and per-observation
scores NegBin(r, e^{-s}); its unseen-trait counts are Poisson.  SB-SP is the
Bernoulli-score special case of the ST-SP model, whose marginal lives in
stsp_core; its unseen-feature law follows by mixing Poisson counts over the
Gamma(k_n + c + 1, θ + γ₀(n)) posterior of the tilt.
"""
import math
import functools
from dataclasses import dataclass, asdict

import numpy as np

from stsp import log
from stsp import special_math
from stsp.special_math import check_positive, log_beta_integral, log_s_over_y
from stsp.distributions import NegBinLaw, PoissonLaw
from stsp.stsp_core import TraitDataset, stable_beta_mass
from stsp.sysexit import ConfigurationError, DivergentIntegralError, ModelMismatchError

# -----------------------------------------------------------------------------

NBGA_METHODS = ("auto", "adaptive", "laguerre")

# Rescaled Gauss–Laguerre is used for scores up to this size when rn+1 >= 4q.
LAGUERRE_MAX_SCORE = 32

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaProcParams:
    """NB-Ga hyperparameters: CRM mass θ and score dispersion r."""

    theta: float
    r: float = 1.0

    def __post_init__(self):
        check_positive("theta", self.theta)
        check_positive("r", self.r)

    def as_dict(self):
        return asdict(self)


# -----------------------------------------------------------------------------


def _log_h(u):
    """log((1 - e^{-u}) / u), continuous at u = 0."""
    u = np.asarray(u, dtype=float)
    small = u < 1e-8
    safe = np.where(small, 1.0, u)
    return np.where(small, -0.5 * u, np.log(-np.expm1(-safe)) - np.log(safe))


@functools.lru_cache(maxsize=8192)
def _log_trait_integral_adaptive(rn, q):
    return log_beta_integral(lambda y: -log_s_over_y(y), float(q), rn + 1.0)


def _log_trait_integral_laguerre(rn, q, rule):
    lam = rn + 1.0
    t = rule.nodes
    return rule.log_integrate((q - 1.0) * np.log(t) + q * _log_h(t / lam)) - q * math.log(lam)


def log_nbga_trait_integral(n, q, r, rule=None, method="auto"):
    """log ∫ e^{-srn} e^{-s} (1 - e^{-s})^q s^{-1} ds over s > 0.

    "adaptive" integrates (1-y)^{rn} y^{q-1} [y / -log(1-y)] on (0, 1) with the
    Beta engine.  "laguerre" substitutes t = (rn+1) s, leaving
    t^{q-1} ((1 - e^{-u}) / u)^q with u = t / (rn+1) against e^{-t}, which a
    Gauss–Laguerre rule integrates accurately for small q.  "auto" picks
    "laguerre" only for q <= 32 with rn+1 >= 4q.

    >>> abs(math.exp(log_nbga_trait_integral(0, 1, 1.0)) - math.log(2.0)) < 1e-9
    True
    """
    special_math.check_count("n", n)
    check_positive("r", r)
    if q < 1:
        raise DivergentIntegralError(f"NB-Ga trait integral diverges for total score q = {q}")
    if method not in NBGA_METHODS:
        raise ConfigurationError(f"unknown NB-Ga integral method {method!r}, expected one of {NBGA_METHODS}")
    rn = float(r * n)
    if method == "auto":
        method = "laguerre" if q <= LAGUERRE_MAX_SCORE and rn + 1.0 >= 4.0 * q else "adaptive"
    if method == "laguerre":
        return _log_trait_integral_laguerre(rn, q, rule or special_math.gauss_laguerre())
    return _log_trait_integral_adaptive(rn, int(q))


def log_marginal_nbga(stats, params, rule=None, method="auto"):
    """Log marginal likelihood of count data under the NB-Ga model.

        k_n log θ - θ log(1 + nr) + Σ_l log ∫ e^{-srn} e^{-s} (1-e^{-s})^{q_l} s^{-1} ds
            + Σ log C(a+r-1, a)

    The exponent is the Lévy-intensity mass θ ∫ (1 - e^{-srn}) s^{-1} e^{-s} ds,
    which telescopes to θ log(1 + nr).

    Parameters
    ----------
    stats : SuffStats
    params : GammaProcParams
    rule : QuadratureRule, optional
    method : str
        See `log_nbga_trait_integral`.

    Returns
    -------
    float
    """
    theta, r = params.theta, params.r
    stats = stats.at_r(r)
    value = stats.k_n * math.log(theta) - theta * math.log1p(stats.n * r)
    if stats.k_n:
        unique_q, counts = np.unique(stats.q, return_counts=True)
        logs = [log_nbga_trait_integral(stats.n, int(q), r, rule, method) for q in unique_q]
        value += float(np.dot(counts, logs))
    return float(value + stats.log_binom_sum)


def unseen_traits_law_nbga(n, m, params):
    """Poisson(θ log((1 + (n+m) r) / (1 + nr))) law of the traits first shown by m more rows.

    >>> law = unseen_traits_law_nbga(1, 1, GammaProcParams(1.0, 1.0))
    >>> abs(law.mean - math.log(1.5)) < 1e-12
    True
    """
    special_math.check_count("n", n)
    special_math.check_count("m", m)
    return PoissonLaw(params.theta * (math.log1p((n + m) * params.r) - math.log1p(n * params.r)))


def unseen_traits_law_sbsp(binary_stats, params, m, rule=None):
    """NegBin(k_n + c + 1, (θ + γ₀(n)) / (θ + γ₀(n+m))) law of the features first
    shown by m more rows under SB-SP, with γ₀(n) = α I(1, n)."""
    special_math.check_count("m", m)
    if np.any(binary_stats.q != binary_stats.m):
        raise ModelMismatchError("SB-SP unseen-feature law needs binary data; binarize counts first")
    alpha, c, theta = params.alpha, params.c, params.theta
    n = binary_stats.n
    gamma_n = stable_beta_mass(n, alpha, rule)
    gamma_nm = gamma_n if m == 0 else stable_beta_mass(n + m, alpha, rule)
    return NegBinLaw(binary_stats.k_n + c + 1.0, min(1.0, (theta + gamma_n) / (theta + gamma_nm)))


def binarize(data):
    """Return `data` with every positive score replaced by 1 (presence/absence)."""
    if data.score_kind == "real":
        log.verbose("binarizing real-valued scores by presence")
    return TraitDataset(
        data.n_obs,
        data.trait_ids,
        data.obs,
        data.trait_index,
        np.ones(len(data.score), dtype=np.int64),
        "binary",
        None,
    )
