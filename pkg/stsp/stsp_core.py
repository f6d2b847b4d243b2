"""Sufficient statistics, exact log-marginals, the posterior law of the tilt
variable, unseen-trait predictive laws and per-trait predictive pmfs for the
ST-SP model under the negative-binomial, Poisson and Gaussian spike-and-slab
score models.

Every marginal is accumulated in the log domain.  θ cancels from the NB and
Poisson marginals, so those functions accept it only for symmetry with the
baselines.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from stsp import log
from stsp import special_math
from stsp.special_math import log_beta_integral, log_s_over_y
from stsp.distributions import GammaLaw, NegBinLaw
from stsp.sysexit import (
    ConfigurationError,
    DomainError,
    GridTruncationError,
    ModelMismatchError,
)

# -----------------------------------------------------------------------------

SCORE_KINDS = ("count", "binary", "real")

DEFAULT_GRID_MAX = 512
DEFAULT_GRID_TOLERANCE = 1e-8
MAX_GRID_SIZE = 2**22

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class TraitRecord:
    """One displayed trait: its id, observation-index -> score map and optional
    spike-and-slab location η."""

    trait_id: str
    entries: dict
    atom_param: float = None

    @property
    def m(self):
        return len(self.entries)

    @property
    def q(self):
        return sum(self.entries.values())


@dataclass(frozen=True, eq=False)
class TraitDataset:
    """Sparse observation-by-trait matrix of positive scores.

    Stored column-wise as parallel arrays (`obs`, `trait_index`, `score`), one
    element per nonzero entry; zeros are implicit.  `trait_ids[j]` names the
    trait of `trait_index == j`; traits are kept in order of first appearance.

    Attributes
    ----------
    n_obs : int
        Number of observations (rows), including rows without any trait.
    trait_ids : tuple of str
    obs, trait_index : ndarray of int
    score : ndarray
        Positive integers for "count" and "binary" data, positive reals for
        "real" (spike-and-slab) data.
    score_kind : str
        One of "count", "binary", "real".
    atom_params : dict, optional
        trait id -> η for spike-and-slab data.
    """

    n_obs: int
    trait_ids: tuple
    obs: np.ndarray
    trait_index: np.ndarray
    score: np.ndarray
    score_kind: str = "count"
    atom_params: dict = field(default=None)

    def __post_init__(self):
        if self.score_kind not in SCORE_KINDS:
            raise ConfigurationError(f"score_kind {self.score_kind!r} not in {SCORE_KINDS}")
        special_math.check_count("n_obs", self.n_obs)
        if len(set(self.trait_ids)) != len(self.trait_ids):
            raise ConfigurationError("trait ids are not unique")
        if not (len(self.obs) == len(self.trait_index) == len(self.score)):
            raise ConfigurationError("obs, trait_index and score differ in length")
        if len(self.score):
            if np.any(~(self.score > 0)):
                raise ConfigurationError("stored scores must be positive; zeros are implicit")
            if self.obs.min() < 0 or self.obs.max() >= self.n_obs:
                raise ConfigurationError(f"observation index outside [0, {self.n_obs})")
            if self.score_kind != "real" and np.any(self.score != np.round(self.score)):
                raise ModelMismatchError(f"{self.score_kind} data must hold integer scores")
            pairs = self.obs.astype(np.int64) * max(len(self.trait_ids), 1) + self.trait_index
            if len(np.unique(pairs)) != len(pairs):
                raise ConfigurationError("an observation lists the same trait twice")
        if np.any(np.bincount(self.trait_index, minlength=len(self.trait_ids)) == 0):
            raise ConfigurationError("every trait must have at least one nonzero entry")

    # .........................................................................

    @classmethod
    def from_triples(cls, n_obs, triples, score_kind="count", atom_params=None):
        """Build a dataset from (obs, trait_id, score) triples; zero scores are dropped."""
        index = {}
        obs, traits, scores = [], [], []
        for o, trait_id, s in triples:
            if s == 0:
                continue
            trait_id = str(trait_id)
            if trait_id not in index:
                index[trait_id] = len(index)
            obs.append(int(o))
            traits.append(index[trait_id])
            scores.append(s)
        scores = np.array(scores, dtype=float)
        if score_kind != "real":
            if np.any(scores != np.round(scores)):
                raise ModelMismatchError(f"{score_kind} data must hold integer scores")
            scores = scores.astype(np.int64)
        if atom_params is not None:
            atom_params = {str(k): float(v) for k, v in atom_params.items() if str(k) in index}
        return cls(
            int(n_obs),
            tuple(index),
            np.array(obs, dtype=np.int64),
            np.array(traits, dtype=np.int64),
            scores,
            score_kind,
            atom_params,
        )

    @classmethod
    def from_dense(cls, matrix, trait_ids=None, score_kind="count"):
        """Build a dataset from a dense observations x traits array."""
        matrix = np.asarray(matrix)
        if trait_ids is None:
            trait_ids = [str(j) for j in range(matrix.shape[1])]
        rows, cols = np.nonzero(matrix)
        order = np.lexsort((rows, cols))
        triples = [(rows[i], trait_ids[cols[i]], matrix[rows[i], cols[i]]) for i in order]
        return cls.from_triples(matrix.shape[0], triples, score_kind)

    @classmethod
    def empty(cls, n_obs=0, score_kind="count"):
        return cls.from_triples(n_obs, [], score_kind)

    # .........................................................................

    @property
    def k(self):
        """Number of distinct traits displayed."""
        return len(self.trait_ids)

    n_traits = k

    @property
    def total_score(self):
        return self.score.sum()

    @property
    def traits(self):
        """The dataset as a list of TraitRecord."""
        records = [dict() for _ in self.trait_ids]
        for o, j, s in zip(self.obs.tolist(), self.trait_index.tolist(), self.score.tolist()):
            records[j][o] = s
        atoms = self.atom_params or {}
        return [TraitRecord(tid, entries, atoms.get(tid)) for tid, entries in zip(self.trait_ids, records)]

    def triples(self):
        """Yield (obs, trait_id, score) in storage order."""
        for o, j, s in zip(self.obs.tolist(), self.trait_index.tolist(), self.score.tolist()):
            yield o, self.trait_ids[j], s

    def rows(self, start, stop):
        """Observations start..stop-1 as a new dataset indexed from 0."""
        start, stop = max(0, int(start)), min(self.n_obs, int(stop))
        keep = (self.obs >= start) & (self.obs < stop)
        triples = (
            (o - start, self.trait_ids[j], s)
            for o, j, s in zip(self.obs[keep].tolist(), self.trait_index[keep].tolist(), self.score[keep].tolist())
        )
        return TraitDataset.from_triples(max(0, stop - start), triples, self.score_kind, self.atom_params)

    def head(self, n):
        return self.rows(0, n)

    def tail(self, start):
        return self.rows(start, self.n_obs)


# -----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SuffStats:
    """Sufficient statistics of a count dataset.

    Attributes
    ----------
    n : int
        Sample size.
    k_n : int
        Number of distinct traits.
    m, q : ndarray
        Per-trait occurrence counts m_l and score totals q_l.
    log_binom_sum : float
        Σ_l Σ_i log C(a_il + r - 1, a_il) at dispersion `r`.
    log_factorial_sum : float
        Σ_l Σ_i log a_il!.
    r : float
        Dispersion `log_binom_sum` was computed at.
    score_values, score_counts : ndarray
        Pooled multiset of the individual scores, kept so `log_binom_sum` can
        be recomputed for another r.
    """

    n: int
    k_n: int
    m: np.ndarray
    q: np.ndarray
    log_binom_sum: float
    log_factorial_sum: float
    r: float
    score_values: np.ndarray
    score_counts: np.ndarray

    @classmethod
    def empty(cls, n=0, r=1.0):
        none = np.zeros(0, dtype=np.int64)
        return cls(int(n), 0, none, none, 0.0, 0.0, float(r), none, none)

    @classmethod
    def from_scores(cls, n, m, q, score_values, score_counts, r):
        score_values = np.asarray(score_values, dtype=np.int64)
        score_counts = np.asarray(score_counts, dtype=np.int64)
        m = np.asarray(m, dtype=np.int64)
        q = np.asarray(q, dtype=np.int64)
        return cls(
            int(n),
            len(m),
            m,
            q,
            _log_binom_sum(score_values, score_counts, r),
            float(np.dot(score_counts, special.gammaln(score_values + 1.0))),
            float(r),
            score_values,
            score_counts,
        )

    def at_r(self, r):
        """Return these statistics with log_binom_sum recomputed for dispersion `r`."""
        if r == self.r:
            return self
        return SuffStats(
            self.n,
            self.k_n,
            self.m,
            self.q,
            _log_binom_sum(self.score_values, self.score_counts, r),
            self.log_factorial_sum,
            float(r),
            self.score_values,
            self.score_counts,
        )

    def augment(self, trait_positions, scores, n_new_traits_scores=()):
        """Statistics after one more observation.

        Parameters
        ----------
        trait_positions : array of int
            Indices (into m/q) of existing traits the new observation scores.
        scores : array of int
            Their positive scores.
        n_new_traits_scores : array of int
            Positive scores of traits the observation displays for the first time.
        """
        trait_positions = np.asarray(trait_positions, dtype=np.int64)
        scores = np.asarray(scores, dtype=np.int64)
        new_scores = np.asarray(n_new_traits_scores, dtype=np.int64)
        m = self.m.copy()
        q = self.q.copy()
        m[trait_positions] += 1
        q[trait_positions] += scores
        m = np.concatenate((m, np.ones(len(new_scores), dtype=np.int64)))
        q = np.concatenate((q, new_scores))
        values, counts = _pool_scores(
            np.concatenate((self.score_values, scores, new_scores)),
            np.concatenate((self.score_counts, np.ones(len(scores) + len(new_scores), dtype=np.int64))),
        )
        return SuffStats.from_scores(self.n + 1, m, q, values, counts, self.r)


def _pool_scores(values, counts):
    values = np.asarray(values, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    if len(values) == 0:
        return values, counts
    unique, inverse = np.unique(values, return_inverse=True)
    return unique, np.bincount(inverse, weights=counts).astype(np.int64)


def _log_binom_sum(score_values, score_counts, r):
    if len(score_values) == 0:
        return 0.0
    return float(np.dot(score_counts, special_math.log_binom(score_values, r)))


def suff_stats(data, r):
    """Exact sufficient statistics of count (or binary) `data` at dispersion `r`.

    >>> data = TraitDataset.from_triples(1, [(0, "w", 3)])
    >>> stats = suff_stats(data, 2.0)
    >>> stats.m.tolist(), stats.q.tolist(), round(stats.log_binom_sum - math.log(4.0), 12)
    ([1], [3], 0.0)
    """
    special_math.check_positive("r", r)
    if data.score_kind == "real":
        raise ModelMismatchError("count score models need integer scores, got real-valued (spike-and-slab) data")
    k = data.k
    m = np.bincount(data.trait_index, minlength=k).astype(np.int64)
    q = np.bincount(data.trait_index, weights=data.score, minlength=k).round().astype(np.int64)
    values, counts = _pool_scores(data.score, np.ones(len(data.score), dtype=np.int64))
    return SuffStats.from_scores(data.n_obs, m, q, values, counts, r)


# -----------------------------------------------------------------------------


def _log_tilt_terms(k_n, alpha, c, i_n):
    """log Γ(c+k)/Γ(c) + k log α - (c+k) log(1 + α I), shared by every ST-SP marginal."""
    return special.gammaln(c + k_n) - special.gammaln(c) + k_n * math.log(alpha) - (c + k_n) * math.log1p(alpha * i_n)


def log_marginal_nb(stats, params, rule=None, i_method="auto"):
    """Log marginal likelihood of count data under the NB-ST-SP model.

        log Γ(c+k)/Γ(c) + k log α - (c+k) log(1 + α I(r,n))
            + Σ_l log B(rn+1, q_l-α) + Σ log C(a+r-1, a)

    Parameters
    ----------
    stats : SuffStats
    params : StableParams
    rule : QuadratureRule, optional
        Only used when `i_method` is "laguerre".
    i_method : str
        Evaluation path of I(r, n); see special_math.i_integral.

    Returns
    -------
    float
    """
    alpha, c, r = params.alpha, params.c, params.r
    stats = stats.at_r(r)
    i_n = special_math.i_integral(r, stats.n, alpha, rule, i_method)
    value = _log_tilt_terms(stats.k_n, alpha, c, i_n)
    if stats.k_n:
        value += float(np.sum(special.betaln(r * stats.n + 1.0, stats.q - alpha)))
    return float(value + stats.log_binom_sum)


def log_marginal_poisson(stats, params, rule=None, i_method="auto", f_method="adaptive"):
    """Log marginal likelihood of count data under the Poisson-ST-SP model.

        log Γ(c+k)/Γ(c) + k log α - (c+k) log(1 + α I(r,n))
            + Σ_l log F(n, q_l, r, α) - Σ log a!

    F is evaluated once per distinct q_l.
    """
    alpha, c, r = params.alpha, params.c, params.r
    i_n = special_math.i_integral(r, stats.n, alpha, rule, i_method)
    value = _log_tilt_terms(stats.k_n, alpha, c, i_n)
    if stats.k_n:
        unique_q, counts = np.unique(stats.q, return_counts=True)
        log_f = [special_math.log_f_integral(stats.n, int(q), r, alpha, rule, f_method) for q in unique_q]
        value += float(np.dot(counts, log_f))
    return float(value - stats.log_factorial_sum)


def log_spike_slab_g(n, scores, eta, alpha):
    """log G(n, A_l, η_l, α) for one trait with real `scores` displayed by m = len(scores) rows.

        G = (2π)^{-m/2} ∫ e^{-s(n-m)} e^{-s} (1-e^{-s})^{m-1-α} s^{m/2} e^{-sS/2} ds,

    S = Σ (y - η)².  With y = 1 - e^{-s} this is B(3m/2-α, n-m+S/2+1) times a
    Beta expectation of (s/y)^{m/2}.
    """
    scores = np.asarray(scores, dtype=float)
    m = len(scores)
    spread = float(np.sum((scores - eta) ** 2))
    half_m = 0.5 * m
    log_integral = log_beta_integral(
        lambda y: half_m * log_s_over_y(y), 1.5 * m - alpha, n - m + 0.5 * spread + 1.0
    )
    return log_integral - half_m * math.log(2.0 * math.pi)


def log_marginal_spike_slab(data, params, rule=None):
    """Log marginal density of real-valued scores under the Gaussian
    spike-and-slab ST-SP model (π_A(s) = 1 - e^{-s}, so r = 1).

        log Γ(c+k)/Γ(c) + k log α - (c+k) log(1 + α I(1,n)) + Σ_l log G(n, A_l, η_l, α)
    """
    if data.score_kind != "real":
        raise ModelMismatchError(f"spike-and-slab marginal needs real scores, got {data.score_kind} data")
    atoms = data.atom_params or {}
    missing = [tid for tid in data.trait_ids if tid not in atoms]
    if missing:
        raise ConfigurationError(f"spike-and-slab traits without atom parameter eta: {missing[:5]}")
    if params.r != 1.0:
        log.verbose("spike-and-slab model ignores r =", params.r, "and uses r = 1")
    alpha, c, n = params.alpha, params.c, data.n_obs
    i_n = special_math.i_integral(1, n, alpha, rule)
    value = _log_tilt_terms(data.k, alpha, c, i_n)
    for record in data.traits:
        value += log_spike_slab_g(n, list(record.entries.values()), record.atom_param, alpha)
    return float(value)


# -----------------------------------------------------------------------------


def posterior_tilt(stats, params, rule=None, i_method="auto"):
    """Gamma(c + k_n, θ (1 + α I(r, n))), the posterior law of Δ^{-α} under
    the NB and Poisson score models."""
    i_n = special_math.i_integral(params.r, stats.n, params.alpha, rule, i_method)
    return GammaLaw(params.c + stats.k_n, params.theta * (1.0 + params.alpha * i_n))


def unseen_traits_law(stats, params, m, rule=None, i_method="auto"):
    """Law of the number of hitherto unseen traits displayed by m more observations.

        NegBin(c + k_n, (1 + α I(r,n)) / (1 + α I(r,n+m)))
    """
    special_math.check_count("m", m)
    alpha, r = params.alpha, params.r
    i_n = special_math.i_integral(r, stats.n, alpha, rule, i_method)
    i_nm = i_n if m == 0 else special_math.i_integral(r, stats.n + m, alpha, rule, i_method)
    return NegBinLaw(params.c + stats.k_n, min(1.0, (1.0 + alpha * i_n) / (1.0 + alpha * i_nm)))


def predictive_old_trait_pmf(q_l, n, params, grid_max=DEFAULT_GRID_MAX):
    """Log-pmf table over {0..M} of the score observation n+1 gives a trait
    with total score `q_l` among the first `n` observations.

        Pr(A = k) = C(k+r-1, k) B(r(n+1)+1, q_l+k-α) / B(rn+1, q_l-α)

    Returns
    -------
    (table, tail)
        The log-pmf at 0..M and the probability mass 1 - Σ table beyond M.
    """
    if q_l < 1:
        raise DomainError("predictive pmf needs total score q_l >= 1, got", q_l)
    special_math.check_count("n", n)
    r, alpha = params.r, params.alpha
    k = np.arange(int(grid_max) + 1, dtype=float)
    table = (
        special_math.log_binom(k, r)
        + special.betaln(r * (n + 1) + 1.0, q_l + k - alpha)
        - special.betaln(r * n + 1.0, q_l - alpha)
    )
    tail = max(0.0, -math.expm1(float(special.logsumexp(table))))
    return table, tail


def predictive_old_trait_table(q_l, n, params, grid_max=DEFAULT_GRID_MAX, tolerance=DEFAULT_GRID_TOLERANCE):
    """predictive_old_trait_pmf with the grid doubled until the tail mass is below `tolerance`."""
    size = int(grid_max)
    while True:
        table, tail = predictive_old_trait_pmf(q_l, n, params, size)
        if tail < tolerance:
            return table, tail
        if size >= MAX_GRID_SIZE:
            raise GridTruncationError(
                f"predictive pmf for q_l={q_l}, n={n} keeps tail mass {tail:.3g} at grid size {size}"
            )
        log.verbose("predictive grid for q_l =", q_l, "n =", n, "tail", tail, "growing to", 2 * size, verbosity=60)
        size *= 2


# -----------------------------------------------------------------------------


def stable_beta_mass(n, alpha, rule=None):
    """γ₀(n) = α I(1, n), the expected number of features of n rows per unit tilt.

    >>> round(stable_beta_mass(1, 0.5), 12)
    1.0
    """
    return alpha * special_math.i_integral(1, n, alpha, rule)


def log_marginal_sbsp(binary_stats, params, rule=None):
    """Log marginal likelihood of binary data under the stable-Beta scaled process.

        k log α + (c+1) log θ - (k+c+1) log(θ + γ₀) + log Γ(k+c+1)/Γ(c+1)
            + Σ_l log Γ(m_l-α) Γ(n-m_l+1) / Γ(n-α+1),      γ₀ = α I(1, n)
    """
    if np.any(binary_stats.q != binary_stats.m):
        raise ModelMismatchError("SB-SP marginal needs binary data; binarize counts first")
    alpha, c, theta = params.alpha, params.c, params.theta
    n, k = binary_stats.n, binary_stats.k_n
    gamma0 = stable_beta_mass(n, alpha, rule)
    value = (
        k * math.log(alpha)
        + (c + 1.0) * math.log(theta)
        - (k + c + 1.0) * math.log(theta + gamma0)
        + special.gammaln(k + c + 1.0)
        - special.gammaln(c + 1.0)
    )
    if k:
        m = binary_stats.m.astype(float)
        terms = special.gammaln(m - alpha) + special.gammaln(n - m + 1.0) - special.gammaln(n - alpha + 1.0)
        value += float(np.sum(terms))
    return float(value)
