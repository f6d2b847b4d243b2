"""Parametric laws returned by the posterior and predictive operations, and
the samplers the restaurant process needs.

Random streams are numpy Generators on the PCG64 bit generator seeded through
a SeedSequence, so a seed plus a stream id identifies a bit-identical stream
on every platform.  Samplers never touch global random state.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy import special
from scipy import stats

from stsp.special_math import check_positive
from stsp.sysexit import DegenerateDistributionError, DomainError

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class RngSeed:
    """64-bit unsigned seed from which independent PCG64 streams are derived.

    >>> a = RngSeed(7).generator().integers(0, 1000, 3)
    >>> b = RngSeed(7).generator().integers(0, 1000, 3)
    >>> bool((a == b).all())
    True
    """

    seed: int

    def __post_init__(self):
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise DomainError("seed", self.seed, "is not a 64-bit unsigned integer")

    def generator(self, stream=None):
        """Return the Generator for `stream` (None for the root stream)."""
        if stream is None:
            sequence = np.random.SeedSequence(int(self.seed))
        else:
            sequence = np.random.SeedSequence(int(self.seed), spawn_key=(int(stream),))
        return np.random.Generator(np.random.PCG64(sequence))

    def generators(self, count):
        """Return `count` independent Generators for streams 0..count-1."""
        return [self.generator(stream) for stream in range(count)]


def as_generator(rng):
    """Accept a Generator, an RngSeed or an integer seed and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngSeed):
        return rng.generator()
    return RngSeed(int(rng)).generator()


# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class NegBinLaw:
    """Negative binomial law Pr(X=k) = C(k+a-1, k) p^a (1-p)^k.

    Attributes
    ----------
    size : float
        a > 0.
    success_prob : float
        p in (0, 1]; p = 1 is the point mass at 0.
    """

    size: float
    success_prob: float

    def __post_init__(self):
        check_positive("size", self.size)
        if not 0.0 < self.success_prob <= 1.0:
            raise DomainError("success_prob =", self.success_prob, "is not in (0, 1]")

    @property
    def mean(self):
        return self.size * (1.0 - self.success_prob) / self.success_prob

    @property
    def variance(self):
        return self.size * (1.0 - self.success_prob) / self.success_prob**2

    def logpmf(self, k):
        return negbin_logpmf(self, k)

    def pmf(self, k):
        return np.exp(self.logpmf(k))

    def ppf(self, q):
        """Smallest k with Pr(X <= k) >= q."""
        if self.success_prob == 1.0:
            return 0
        return int(stats.nbinom.ppf(q, self.size, self.success_prob))

    def sample(self, rng, size=None):
        return sample_negbin(self, rng, size)


@dataclass(frozen=True)
class GammaLaw:
    """Gamma law with density ∝ x^{shape-1} e^{-rate x}."""

    shape: float
    rate: float

    def __post_init__(self):
        check_positive("shape", self.shape)
        check_positive("rate", self.rate)

    @property
    def mean(self):
        return self.shape / self.rate

    @property
    def variance(self):
        return self.shape / self.rate**2

    def logpdf(self, x):
        return stats.gamma.logpdf(x, self.shape, scale=1.0 / self.rate)

    def sample(self, rng, size=None):
        return sample_gamma(self, rng, size)


@dataclass(frozen=True)
class PoissonLaw:
    mean: float

    def __post_init__(self):
        if not self.mean >= 0.0:
            raise DomainError("Poisson mean =", self.mean, "is negative")

    @property
    def variance(self):
        return self.mean

    def logpmf(self, k):
        return stats.poisson.logpmf(k, self.mean)

    def pmf(self, k):
        return stats.poisson.pmf(k, self.mean)

    def ppf(self, q):
        if self.mean == 0.0:
            return 0
        return int(stats.poisson.ppf(q, self.mean))

    def sample(self, rng, size=None):
        return sample_poisson(self, rng, size)


@dataclass(frozen=True)
class BetaLaw:
    a: float
    b: float

    def __post_init__(self):
        check_positive("a", self.a)
        check_positive("b", self.b)

    @property
    def mean(self):
        return self.a / (self.a + self.b)

    def sample(self, rng, size=None):
        return sample_beta(self, rng, size)


# -----------------------------------------------------------------------------


def negbin_logpmf(law, k):
    """log Pr(X = k) under `law`, for scalar or array k.

    >>> round(float(negbin_logpmf(NegBinLaw(1.0, 0.5), 0)), 12) == round(math.log(0.5), 12)
    True
    """
    k = np.asarray(k, dtype=float)
    a, p = law.size, law.success_prob
    result = (
        special.gammaln(k + a)
        - special.gammaln(a)
        - special.gammaln(k + 1.0)
        + a * math.log(p)
        + special.xlog1py(k, -p)
    )
    result = np.where(k < 0, -np.inf, result)
    return float(result) if result.ndim == 0 else result


def sample_negbin(law, rng, size=None):
    """Gamma–Poisson mixture draws (numpy's negative_binomial) under the NegBinLaw convention."""
    rng = as_generator(rng)
    if law.success_prob == 1.0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    return rng.negative_binomial(law.size, law.success_prob, size=size)


def sample_gamma(law, rng, size=None):
    """Marsaglia–Tsang draws from `law`."""
    return as_generator(rng).gamma(law.shape, 1.0 / law.rate, size=size)


def sample_poisson(law, rng, size=None):
    """Inversion / PTRS draws from `law`; Poisson(0) is always 0."""
    return as_generator(rng).poisson(law.mean, size=size)


def sample_beta(law, rng, size=None):
    """Beta draws built from two Gamma variates."""
    return as_generator(rng).beta(law.a, law.b, size=size)


# -----------------------------------------------------------------------------


def sample_h_new_trait(n, params, rng, size=None):
    """Draw the latent rate H of a trait first displayed by customer n+1.

    The target density on s > 0 is

        f(s) ∝ (1 - e^{-rs}) (1 - e^{-s})^{-1-α} e^{-s(rn+1)}.

    With y = 1 - e^{-s} it becomes (1 - (1-y)^r) y^{-1-α} (1-y)^{rn}, bounded
    by max(r, 1) y^{-α} (1-y)^{rn}.  Proposals Y ~ Beta(1-α, rn+1) are
    accepted with probability (1 - (1-Y)^r) / (max(r, 1) Y) and mapped back
    with s = -log(1 - Y).

    Parameters
    ----------
    n : int
        Customers already served.
    params : StableParams
    rng : numpy Generator, RngSeed or int
    size : int, optional
        Number of draws; a single float is returned when omitted.

    Returns
    -------
    float or ndarray of float
    """
    rng = as_generator(rng)
    count = 1 if size is None else int(size)
    r, alpha = params.r, params.alpha
    bound = max(r, 1.0)
    accepted = [np.empty(0)]
    needed = count
    while needed > 0:
        batch = max(2 * needed, 16)
        y = rng.beta(1.0 - alpha, r * n + 1.0, size=batch)
        u = rng.random(batch)
        inside = (y > 0.0) & (y < 1.0)
        y, u = y[inside], u[inside]
        ratio = -np.expm1(r * np.log1p(-y)) / (bound * y)
        keep = y[u < ratio][:needed]
        accepted.append(keep)
        needed -= len(keep)
    s = -np.log1p(-np.concatenate(accepted))
    return float(s[0]) if size is None else s


def sample_score_given_rate(s, r, rng, size=None):
    """Draw from the zero-truncated NegBin(size=r, success_prob=e^{-s}) law.

    Proposals from the untruncated law are repeated until they are >= 1; the
    expected number of proposals is 1 / (1 - e^{-sr}).  `s` may be an array,
    one truncated draw per entry.
    """
    rng = as_generator(rng)
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if size is not None:
        s_arr = np.broadcast_to(s_arr, (int(size),)).copy()
    if np.any(~(s_arr > 0.0)):
        raise DomainError("score rate s must be positive, got", s_arr[~(s_arr > 0.0)][:3])
    out = np.zeros(len(s_arr), dtype=np.int64)
    pending = np.ones(len(s_arr), dtype=bool)
    while pending.any():
        idx = np.flatnonzero(pending)
        accept_prob = -np.expm1(-s_arr[idx] * r)
        tries = np.minimum(np.ceil(2.0 / accept_prob), 4096).astype(np.int64)
        draws = rng.negative_binomial(r, np.repeat(np.exp(-s_arr[idx]), tries))
        offsets = np.concatenate(([0], np.cumsum(tries)[:-1]))
        hits = np.flatnonzero(draws >= 1)
        if len(hits) == 0:
            continue
        j = np.searchsorted(hits, offsets)
        first = hits[np.minimum(j, len(hits) - 1)]
        found = (j < len(hits)) & (first < offsets + tries)
        out[idx[found]] = draws[first[found]]
        pending[idx[found]] = False
    if size is None and np.ndim(s) == 0:
        return int(out[0])
    return out


def sample_grid_pmf(logpmf, rng, size=None):
    """Sample an index of the log-pmf table `logpmf` over {0..M}.

    Returns
    -------
    (sample, tail_mass)
        The categorical draw(s) after log-sum-exp normalization, and the mass
        1 - Σ exp(logpmf) missing from the table before normalization, which
        callers use to decide whether M must grow.
    """
    table = np.asarray(logpmf, dtype=float)
    if table.ndim != 1 or len(table) == 0 or np.any(np.isnan(table)) or np.any(table == np.inf):
        raise DegenerateDistributionError("grid log-pmf must be a nonempty finite table")
    if not np.any(np.isfinite(table)):
        raise DegenerateDistributionError("grid log-pmf has no mass: every entry is -inf")
    log_total = special.logsumexp(table)
    tail_mass = max(0.0, -math.expm1(log_total))
    cdf = np.cumsum(np.exp(table - log_total))
    u = as_generator(rng).random(size) * cdf[-1]
    sample = np.minimum(np.searchsorted(cdf, u, side="right"), len(table) - 1)
    if size is None:
        sample = int(sample)
    return sample, tail_mass


def zero_truncated_negbin_logpmf(a, s, r):
    """log of G_A(a) / (1 - e^{-sr}) for a >= 1, the law drawn by sample_score_given_rate."""
    law = NegBinLaw(r, math.exp(-s))
    return negbin_logpmf(law, a) - math.log(-math.expm1(-s * r))

