"""Special functions and quadrature underlying every marginal and predictive
formula of the ST-SP models.

The central quantity is

    I(r, k) = ∫ (1 - e^{-rsk}) (1 - e^{-s})^{-1-α} e^{-s} ds   over s > 0,

which controls the posterior of the tilt variable and every negative-binomial
predictive law.  For integer r it is a finite sum of Beta functions; for real
r it is integrated adaptively after the change of variable y = 1 - e^{-s}.
All per-trait integrals of the package reduce to the log-domain engine
`log_beta_integral`, ∫₀¹ y^{a-1} (1-y)^{b-1} g(y) dy, which removes the
integrable y^{a-1} endpoint singularity by a power substitution.
"""
import math
import functools
from dataclasses import dataclass, asdict, replace

import numpy as np
from scipy import integrate
from scipy import special

from stsp import log
from stsp.sysexit import ConfigurationError, DivergentIntegralError, DomainError, NumericalError

# -----------------------------------------------------------------------------

DEFAULT_QUAD_ORDER = 128
MAX_QUAD_ORDER = 512

INTEGER_TOLERANCE = 1e-9

I_METHODS = ("auto", "closed", "adaptive", "laguerre")

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class StableParams:
    """ST-SP hyperparameters.

    Attributes
    ----------
    alpha : float
        Stability index in (0, 1).
    c : float
        Order of the polynomial tilt, > 0.
    theta : float
        Mass of the Stable CRM, > 0.  Cancels from the NB and Poisson marginals.
    r : float
        Score dispersion, > 0.
    """

    alpha: float
    c: float
    theta: float = 1.0
    r: float = 1.0

    def __post_init__(self):
        check_alpha(self.alpha)
        for name in ("c", "theta", "r"):
            check_positive(name, getattr(self, name))

    def as_dict(self):
        return asdict(self)

    def replace(self, **changes):
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss–Laguerre nodes and weights for ∫ f(s) e^{-s} ds over s > 0.

    The arrays are read-only so one rule can be shared between threads.
    """

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values):
        """Return Σ w_i f(x_i) for `values` = f(nodes)."""
        return float(np.dot(self.weights, values))

    def log_integrate(self, log_values):
        """Return log Σ w_i exp(log f(x_i)) for `log_values` = log f(nodes)."""
        with np.errstate(divide="ignore"):
            log_weights = np.log(self.weights)
        return float(special.logsumexp(log_weights + log_values))


# -----------------------------------------------------------------------------


def check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha =", alpha, "is not in (0, 1)")


def check_positive(name, value):
    if not value > 0.0:
        raise DomainError(name, "=", value, "is not positive")


def check_count(name, value):
    if value < 0 or int(value) != value:
        raise DomainError(name, "=", value, "is not a nonnegative integer")


def is_integer_valued(r):
    """Return True when `r` is within INTEGER_TOLERANCE of an integer.

    >>> is_integer_valued(10.0), is_integer_valued(2.5), is_integer_valued(3 + 1e-12)
    (True, False, True)
    """
    return abs(r - round(r)) < INTEGER_TOLERANCE


# -----------------------------------------------------------------------------


def log_gamma(x):
    """Natural log of Γ(x) for x > 0, scalar or array.

    >>> log_gamma(1.0), log_gamma(2.0)
    (0.0, 0.0)
    >>> round(log_gamma(0.5), 10)
    0.5723649429
    """
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("log_gamma argument", x, "must be positive")
    result = special.gammaln(x)
    return float(result) if result.ndim == 0 else result


def log_beta(a, b):
    """Natural log of B(a, b) = Γ(a)Γ(b)/Γ(a+b) for a, b > 0, scalar or array.

    >>> abs(log_beta(1.0, 1.0)) < 1e-14
    True
    >>> abs(log_beta(0.5, 1.0) - math.log(2.0)) < 1e-14
    True
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("log_beta arguments", a, b, "must be positive")
    result = special.betaln(a, b)
    return float(result) if result.ndim == 0 else result


def log_binom(k, r):
    """log C(k + r - 1, k), the negative-binomial coefficient for real r > 0."""
    k = np.asarray(k, dtype=float)
    return special.gammaln(k + r) - special.gammaln(r) - special.gammaln(k + 1.0)


# -----------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def gauss_laguerre(order=DEFAULT_QUAD_ORDER):
    """Return the Gauss–Laguerre QuadratureRule with `order` nodes.

    Above order ~180 the weights of the largest nodes underflow to 0 in double
    precision; they stay in the rule as exact zeros.

    >>> rule = gauss_laguerre(1)
    >>> rule.nodes.tolist(), rule.weights.tolist()
    ([1.0], [1.0])
    """
    if int(order) != order or not 1 <= order <= MAX_QUAD_ORDER:
        raise ConfigurationError(f"quadrature order {order} outside 1..{MAX_QUAD_ORDER}")
    nodes, weights = special.roots_laguerre(int(order))
    nodes = np.array(nodes, dtype=float)
    weights = np.array(weights, dtype=float)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(int(order), nodes, weights)


# -----------------------------------------------------------------------------


def log_s_over_y(y):
    """log(s / y) where s = -log(1 - y), continuous at y = 0."""
    if y < 1e-8:
        return 0.5 * y
    return math.log(-math.log1p(-y)) - math.log(y)


def log_beta_integral(log_g, a, b, breakpoints=(), epsrel=1e-11, limit=200):
    """Return log ∫₀¹ y^{a-1} (1-y)^{b-1} exp(log_g(y)) dy.

    Parameters
    ----------
    log_g : callable
        Scalar function returning log g(y) for y in (0, 1).
    a, b : float
        Positive Beta exponents.  When a < 1 the substitution y = u^{1/a}
        absorbs the y^{a-1} singularity; otherwise y is integrated directly.
    breakpoints : sequence of float
        Extra y locations where g changes quickly, passed to the adaptive
        integrator together with the Beta kernel's bulk.

    Returns
    -------
    float
        The log of the integral.  The integrand is rescaled by its largest
        sampled value so quantities far outside floating range stay finite.
    """
    p = min(a, 1.0)
    log_p = math.log(p)
    inv_p = 1.0 / p

    def log_integrand(u):
        y = u ** inv_p
        if y >= 1.0:
            return -math.inf
        if y <= 0.0:
            if a > p:
                return -math.inf
            y = 5e-324
        logy = math.log(y)
        return (a - p) * logy + (b - 1.0) * math.log1p(-y) + log_g(y) - log_p

    total = a + b
    mean = a / total
    sd = math.sqrt(a * b / (total * total * (total + 1.0)))
    ys = [mean + k * sd for k in (-20, -8, -3, 0, 3, 8, 20)] + list(breakpoints)
    if a > 1.0 and b > 1.0:
        ys.append((a - 1.0) / (total - 2.0))
    points = sorted({y**p for y in ys if 0.0 < y < 1.0})
    points = [u for u in points if 0.0 < u < 1.0]

    samples = [log_integrand(u) for u in points + [0.5]]
    samples = [value for value in samples if math.isfinite(value)]
    if not samples:
        raise NumericalError(f"log_beta_integral: integrand not finite anywhere for a={a}, b={b}")
    shift = max(samples)

    def integrand(u):
        return math.exp(log_integrand(u) - shift)

    result = integrate.quad(
        integrand, 0.0, 1.0, points=points or None, epsabs=0.0, epsrel=epsrel, limit=limit, full_output=1
    )
    value, abserr = result[0], result[1]
    if len(result) > 3:
        log.verbose("log_beta_integral a =", a, "b =", b, "quad:", result[3].split("\n")[0], verbosity=70)
    if not (value > 0.0 and math.isfinite(value)):
        raise NumericalError(f"log_beta_integral: quadrature returned {value} (error {abserr}) for a={a}, b={b}")
    return shift + math.log(value)


# -----------------------------------------------------------------------------


def _i_closed(r, k, alpha):
    n_terms = int(round(r)) * int(k)
    if n_terms == 0:
        return 0.0
    return _beta_sum(alpha, 1, n_terms)


def _beta_sum(alpha, first, last):
    """Σ_{i=first}^{last} B(1-α, i)."""
    if last < first:
        return 0.0
    i = np.arange(first, last + 1, dtype=float)
    return float(np.sum(np.exp(special.betaln(1.0 - alpha, i))))


@functools.lru_cache(maxsize=4096)
def _i_adaptive(r, k, alpha):
    x = r * k
    if x == 0:
        return 0.0

    def log_g(y):
        # (1 - (1-y)^x) / y
        if y < 1e-15:
            return math.log(x)
        return math.log(-math.expm1(x * math.log1p(-y))) - math.log(y)

    return math.exp(log_beta_integral(log_g, 1.0 - alpha, 1.0, breakpoints=(1.0 / x, 10.0 / x)))


def _i_laguerre(r, k, alpha, rule):
    s = rule.nodes
    values = -np.expm1(-r * k * s) * np.exp((-1.0 - alpha) * np.log(-np.expm1(-s)))
    return rule.integrate(values)


def _check_i_args(r, k, alpha, method):
    check_positive("r", r)
    check_count("k", k)
    check_alpha(alpha)
    if method not in I_METHODS:
        raise ConfigurationError(f"unknown I(r, k) method {method!r}, expected one of {I_METHODS}")


def i_integral(r, k, alpha, rule=None, method="auto"):
    """Return I(r, k) = ∫ (1 - e^{-rsk}) (1 - e^{-s})^{-1-α} e^{-s} ds.

    Parameters
    ----------
    r : float
        Score dispersion, > 0.
    k : int
        Number of observations, >= 0.
    alpha : float
        Stability index in (0, 1).
    rule : QuadratureRule, optional
        Gauss–Laguerre rule for method "laguerre"; the default order is used
        when omitted.
    method : str
        "auto" uses the closed form Σ_{i=1}^{rk} B(1-α, i) for integer r and
        adaptive quadrature otherwise; "closed", "adaptive" and "laguerre"
        force one evaluation path.

    Returns
    -------
    float

    >>> round(i_integral(1, 1, 0.5), 12)
    2.0
    >>> i_integral(2.5, 0, 0.3)
    0.0
    """
    _check_i_args(r, k, alpha, method)
    if k == 0:
        return 0.0
    if method == "auto":
        method = "closed" if is_integer_valued(r) else "adaptive"
    if method == "closed":
        if not is_integer_valued(r):
            raise ConfigurationError(f"closed form I(r, k) requires integer r, got r = {r}")
        return _i_closed(r, k, alpha)
    elif method == "adaptive":
        return _i_adaptive(r, k, alpha)
    else:
        return _i_laguerre(r, k, alpha, rule or gauss_laguerre())


def i_tilde(r, n, alpha, rule=None, method="auto"):
    """Return the one-step increment I(r, n+1) - I(r, n).

    The increment is evaluated directly rather than as a difference: for
    integer r as Σ_{i=rn+1}^{r(n+1)} B(1-α, i), otherwise as the integral of
    e^{-rsn} (1 - e^{-rs}) (1 - e^{-s})^{-1-α} e^{-s}.

    >>> round(i_tilde(1, 0, 0.5), 12)
    2.0
    """
    _check_i_args(r, n, alpha, method)
    if method == "auto":
        method = "closed" if is_integer_valued(r) else "adaptive"
    if method == "closed":
        if not is_integer_valued(r):
            raise ConfigurationError(f"closed form I(r, k) requires integer r, got r = {r}")
        ri = int(round(r))
        return _beta_sum(alpha, ri * int(n) + 1, ri * (int(n) + 1))
    elif method == "adaptive":
        rn = r * n

        def log_g(y):
            # (1 - (1-y)^r) / y
            if y < 1e-15:
                return math.log(r)
            return math.log(-math.expm1(r * math.log1p(-y))) - math.log(y)

        return math.exp(log_beta_integral(log_g, 1.0 - alpha, rn + 1.0, breakpoints=(1.0 / r, 10.0 / r)))
    else:
        rule = rule or gauss_laguerre()
        s = rule.nodes
        values = np.exp(-r * n * s) * -np.expm1(-r * s) * np.exp((-1.0 - alpha) * np.log(-np.expm1(-s)))
        return rule.integrate(values)


# -----------------------------------------------------------------------------


def log_f_integral(n, q, r, alpha, rule=None, method="adaptive"):
    """Return log F(n, q, r, α) where

        F = ∫ e^{-rsn} e^{-s} (1 - e^{-s})^{-1-α} (rs)^q ds.

    With y = 1 - e^{-s}, F = r^q B(q-α, rn+1) E[(s/y)^q] under Beta(q-α, rn+1),
    which the adaptive path integrates in log space.
    """
    check_count("n", n)
    check_positive("r", r)
    check_alpha(alpha)
    if q < 1:
        raise DivergentIntegralError(f"F(n, q, r, alpha) diverges for total score q = {q}")
    if method == "adaptive":
        return q * math.log(r) + log_beta_integral(lambda y: q * log_s_over_y(y), q - alpha, r * n + 1.0)
    elif method == "laguerre":
        rule = rule or gauss_laguerre()
        s = rule.nodes
        log_values = -r * n * s + (-1.0 - alpha) * np.log(-np.expm1(-s)) + q * np.log(r * s)
        return rule.log_integrate(log_values)
    raise ConfigurationError(f"unknown F method {method!r}, expected 'adaptive' or 'laguerre'")


def f_integral(n, q, r, alpha, rule=None, method="adaptive"):
    """Return F(n, q, r, α); see `log_f_integral`."""
    return math.exp(log_f_integral(n, q, r, alpha, rule=rule, method=method))


# -----------------------------------------------------------------------------


def test():
    import doctest
    from stsp import special_math

    return doctest.testmod(special_math)


if __name__ == "__main__":
    print(test())
