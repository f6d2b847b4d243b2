"""Forward simulators: the ST-SP restaurant process, the Zipf benchmark
generator, the NB-Ga thinned-Poisson simulator and the stable-Beta restaurant,
plus new-trait accounting for extrapolation curves.

Every simulator takes a seed (int, RngSeed or numpy Generator) and draws only
from the Generator derived from it, so a seed fully determines the output.
"""
import math
import concurrent.futures
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy import stats

from stsp import log
from stsp import special_math
from stsp.distributions import (
    NegBinLaw,
    RngSeed,
    as_generator,
    sample_grid_pmf,
    sample_h_new_trait,
    sample_score_given_rate,
)
from stsp.stsp_core import (
    DEFAULT_GRID_MAX,
    TraitDataset,
    predictive_old_trait_table,
    stable_beta_mass,
    suff_stats,
    unseen_traits_law,
)
from stsp.sysexit import ConfigurationError

# -----------------------------------------------------------------------------

OLD_TRAIT_SAMPLERS = ("beta_mixture", "grid")

DEFAULT_ZIPF_K_MAX = 100_000
ZIPF_RESIDUAL_TOLERANCE = 1e-6

# -----------------------------------------------------------------------------


@dataclass
class RestaurantState:
    """Mutable state of one restaurant run after `n` customers.

    Attributes
    ----------
    n : int
        Customers served.
    trait_ids : list of str
    q, m : ndarray of int
        Per-dish score totals and numbers of customers who scored the dish.
    rng : numpy Generator
    i_n : float
        I(r, n), carried forward by one-step increments.
    """

    n: int = 0
    trait_ids: list = field(default_factory=list)
    q: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    m: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rng: np.random.Generator = None
    i_n: float = 0.0
    _obs: list = field(default_factory=list, repr=False)
    _traits: list = field(default_factory=list, repr=False)
    _scores: list = field(default_factory=list, repr=False)
    _tables: dict = field(default_factory=dict, repr=False)

    @classmethod
    def start(cls, seed):
        return cls(rng=as_generator(seed))

    @property
    def k_n(self):
        return len(self.trait_ids)

    def record(self, trait_index, scores):
        self._obs.append(np.full(len(trait_index), self.n, dtype=np.int64))
        self._traits.append(np.asarray(trait_index, dtype=np.int64))
        self._scores.append(np.asarray(scores, dtype=np.int64))

    def to_dataset(self):
        """Every row served so far as a count TraitDataset."""
        empty = [np.zeros(0, dtype=np.int64)]
        return TraitDataset(
            self.n,
            tuple(self.trait_ids),
            np.concatenate(empty + self._obs),
            np.concatenate(empty + self._traits),
            np.concatenate(empty + self._scores),
            "count",
        )


def _old_trait_scores(state, params, old_trait_sampler, grid_max):
    """Scores customer n+1 gives the dishes already served."""
    n, r, alpha = state.n, params.r, params.alpha
    if state.k_n == 0:
        return np.zeros(0, dtype=np.int64)
    if old_trait_sampler == "beta_mixture":
        y = state.rng.beta(state.q - alpha, r * n + 1.0)
        success = np.maximum(1.0 - y, np.finfo(float).tiny)
        return state.rng.negative_binomial(r, success).astype(np.int64)
    scores = np.zeros(state.k_n, dtype=np.int64)
    for j, q_l in enumerate(state.q.tolist()):
        key = (q_l, n)
        if key not in state._tables:
            state._tables[key] = predictive_old_trait_table(q_l, n, params, grid_max)[0]
        scores[j] = sample_grid_pmf(state._tables[key], state.rng)[0]
    return scores


def restaurant_step(state, params, old_trait_sampler="beta_mixture", grid_max=DEFAULT_GRID_MAX):
    """Serve customer n+1 and return (state, new_row).

    The customer (a) scores every served dish from its predictive pmf,
    (b) opens K ~ NegBin(c + k_n, (1 + α I(r,n)) / (1 + α I(r,n+1))) new
    dishes and (c) gives each new dish a zero-truncated NegBin(r, e^{-H})
    score with H drawn from the new-dish rate law.

    `old_trait_sampler` selects how (a) is drawn: "beta_mixture" draws
    Y ~ Beta(q_l - α, rn + 1) and then NegBin(r, 1 - Y), which has exactly
    the predictive pmf law; "grid" inverts the tabulated pmf.  `state` is
    updated in place; `new_row` maps trait id to positive score.
    """
    if old_trait_sampler not in OLD_TRAIT_SAMPLERS:
        raise ConfigurationError(f"unknown old-trait sampler {old_trait_sampler!r}, expected {OLD_TRAIT_SAMPLERS}")
    n, alpha, r = state.n, params.alpha, params.r

    old_scores = _old_trait_scores(state, params, old_trait_sampler, grid_max)
    taken = np.flatnonzero(old_scores)

    i_next = state.i_n + special_math.i_tilde(r, n, alpha)
    law = NegBinLaw(params.c + state.k_n, min(1.0, (1.0 + alpha * state.i_n) / (1.0 + alpha * i_next)))
    n_new = int(law.sample(state.rng))
    rates = sample_h_new_trait(n, params, state.rng, size=n_new)
    new_scores = np.asarray(sample_score_given_rate(rates, r, state.rng), dtype=np.int64).reshape(n_new)

    first_new = state.k_n
    new_ids = [str(first_new + j) for j in range(n_new)]
    trait_index = np.concatenate((taken, np.arange(first_new, first_new + n_new)))
    scores = np.concatenate((old_scores[taken], new_scores))
    state.record(trait_index, scores)

    q = state.q.copy()
    m = state.m.copy()
    q[taken] += old_scores[taken]
    m[taken] += 1
    state.q = np.concatenate((q, new_scores))
    state.m = np.concatenate((m, np.ones(n_new, dtype=np.int64)))
    state.trait_ids.extend(new_ids)
    state.i_n = i_next
    state.n = n + 1

    new_row = {state.trait_ids[j]: int(s) for j, s in zip(trait_index.tolist(), scores.tolist())}
    return state, new_row


def simulate_restaurant(n_total, params, seed, old_trait_sampler="beta_mixture", grid_max=DEFAULT_GRID_MAX):
    """Simulate `n_total` rows of the NB-ST-SP model by the restaurant process.

    >>> from stsp.special_math import StableParams
    >>> data = simulate_restaurant(0, StableParams(0.3, 60.0, r=10.0), seed=1)
    >>> data.n_obs, data.k
    (0, 0)
    """
    special_math.check_count("n_total", n_total)
    state = RestaurantState.start(seed)
    for _ in range(int(n_total)):
        restaurant_step(state, params, old_trait_sampler, grid_max)
    log.verbose("restaurant served", state.n, "customers with", state.k_n, "dishes", verbosity=60)
    return state.to_dataset()


# -----------------------------------------------------------------------------


def zipf_rates(xi, k_max=DEFAULT_ZIPF_K_MAX):
    """Return q_k = (1 + k)^{-ξ} for k = 1..k_max."""
    return (np.arange(1, int(k_max) + 1, dtype=float) + 1.0) ** (-float(xi))


def zipf_residual_mass(xi, r, k_max=DEFAULT_ZIPF_K_MAX):
    """r Σ_{k > k_max} q_k, a bound on the expected nonzero entries per row lost to truncation."""
    if xi <= 1.0:
        return math.inf
    return float(r * special.zeta(xi, k_max + 2.0))


def simulate_zipf(n_total, xi, r, k_max=DEFAULT_ZIPF_K_MAX, seed=0):
    """Simulate the Zipf benchmark: A_ik ~ NegBin(r, 1 - q_k) independently with
    q_k = (1 + k)^{-ξ}, k = 1..k_max, zeros dropped.

    Per trait the number of nonzero rows is Binomial(n, 1 - (1 - q_k)^r); the
    rows are chosen uniformly and their scores drawn from the zero-truncated
    law by inversion of the survival function.  Trait ids are the indices k.
    """
    special_math.check_count("n_total", n_total)
    special_math.check_positive("r", r)
    if int(k_max) < 1:
        raise ConfigurationError(f"k_max must be a positive integer, got {k_max}")
    if xi <= 1.0:
        log.warning("Zipf exponent xi =", xi, "<= 1: the expected trait count diverges as k_max grows")
    residual = zipf_residual_mass(xi, r, k_max)
    if residual > ZIPF_RESIDUAL_TOLERANCE:
        log.warning(f"Zipf truncation at k_max={k_max} drops expected mass {residual:.3g} per observation")
    rng = as_generator(seed)
    rates = zipf_rates(xi, k_max)
    success = 1.0 - rates
    nonzero_prob = -np.expm1(r * np.log1p(-rates))
    counts = rng.binomial(int(n_total), nonzero_prob)
    present = np.flatnonzero(counts)
    obs = [np.zeros(0, dtype=np.int64)]
    for k in present.tolist():
        obs.append(np.sort(rng.choice(int(n_total), size=counts[k], replace=False)))
    obs = np.concatenate(obs).astype(np.int64)
    trait_index = np.repeat(np.arange(len(present)), counts[present])
    p = np.repeat(success[present], counts[present])
    survival = np.repeat(nonzero_prob[present], counts[present])
    u = 1.0 - rng.random(len(p))
    scores = np.maximum(stats.nbinom.isf(u * survival, r, p), 1.0).astype(np.int64)
    return TraitDataset(
        int(n_total),
        tuple(str(k + 1) for k in present.tolist()),
        obs,
        trait_index.astype(np.int64),
        scores,
        "count",
    )


# -----------------------------------------------------------------------------


def simulate_nbga(n_total, params, seed, epsilon=None):
    """Simulate `n_total` rows of the NB-Ga model by thinning a Poisson process.

    Jumps are proposed from the intensity θ s^{-1} on (ε, 1) plus θ e^{-s} on
    (1, ∞) and kept with probability e^{-s} and 1/s respectively, giving the
    gamma-process intensity θ s^{-1} e^{-s}.  Each row scores a jump s with
    NegBin(r, e^{-s}); jumps no row scores are dropped.  ε defaults to
    1e-10 / (rn + 1), below which the expected number of displayed traits
    is θ r n ε.
    """
    special_math.check_count("n_total", n_total)
    rng = as_generator(seed)
    theta, r, n = params.theta, params.r, int(n_total)
    if epsilon is None:
        epsilon = 1e-10 / (r * n + 1.0)
    low_mass = -math.log(epsilon)
    high_mass = math.exp(-1.0)
    n_proposed = rng.poisson(theta * (low_mass + high_mass))
    in_low = rng.random(n_proposed) < low_mass / (low_mass + high_mass)
    s = np.where(in_low, epsilon ** (1.0 - rng.random(n_proposed)), 1.0 + rng.exponential(1.0, n_proposed))
    keep_prob = np.where(in_low, np.exp(-s), 1.0 / s)
    s = s[rng.random(n_proposed) < keep_prob]
    scores = rng.negative_binomial(r, np.exp(-s), size=(n, len(s)))
    scores = scores[:, scores.sum(axis=0) > 0]
    return TraitDataset.from_dense(scores)


def simulate_sbsp_restaurant(n_total, params, seed):
    """Simulate `n_total` rows of binary data from the stable-Beta scaled process.

    Customer n+1 takes each served dish with probability (m_l - α)/(n + 1 - α)
    and opens NegBin(k_n + c + 1, (θ + γ₀(n)) / (θ + γ₀(n+1))) new dishes,
    γ₀(n) = α I(1, n).
    """
    special_math.check_count("n_total", n_total)
    rng = as_generator(seed)
    alpha, c, theta = params.alpha, params.c, params.theta
    m = np.zeros(0, dtype=np.int64)
    obs, traits = [np.zeros(0, dtype=np.int64)], [np.zeros(0, dtype=np.int64)]
    gamma_n = 0.0
    for n in range(int(n_total)):
        taken = np.flatnonzero(rng.random(len(m)) < (m - alpha) / (n + 1.0 - alpha))
        gamma_next = stable_beta_mass(n + 1, alpha)
        n_new = int(NegBinLaw(len(m) + c + 1.0, min(1.0, (theta + gamma_n) / (theta + gamma_next))).sample(rng))
        m[taken] += 1
        new = np.arange(len(m), len(m) + n_new)
        m = np.concatenate((m, np.ones(n_new, dtype=np.int64)))
        row = np.concatenate((taken, new))
        obs.append(np.full(len(row), n, dtype=np.int64))
        traits.append(row)
        gamma_n = gamma_next
    obs, traits = np.concatenate(obs), np.concatenate(traits)
    return TraitDataset(
        int(n_total), tuple(str(j) for j in range(len(m))), obs, traits, np.ones(len(obs), dtype=np.int64), "binary"
    )


# -----------------------------------------------------------------------------


def new_trait_curve(train, stream, m_grid):
    """For each m in `m_grid`, count the trait ids present in the first m rows
    of `stream` but absent from `train`.

    Returns
    -------
    list of (m, count)
    """
    known = set(train.trait_ids)
    first_seen = np.full(stream.k, np.iinfo(np.int64).max, dtype=np.int64)
    np.minimum.at(first_seen, stream.trait_index, stream.obs)
    novel = np.array([tid not in known for tid in stream.trait_ids], dtype=bool)
    first_novel = np.sort(first_seen[novel])
    return [(int(m), int(np.searchsorted(first_novel, m, side="left"))) for m in m_grid]


@dataclass(frozen=True, eq=False)
class ReplicateCounts:
    """New-trait counts of independent restaurant replicates.

    Attributes
    ----------
    m_grid : ndarray of int
    k_train : ndarray of int
        Traits displayed by each replicate's training rows.
    new_counts : ndarray of int, shape (replicates, len(m_grid))
        True numbers of new traits in the first m follow-up rows.
    lower, upper : ndarray, shape (replicates, len(m_grid))
        Bounds of the central `level` band of the unseen-trait law given each
        replicate's training rows.
    """

    m_grid: np.ndarray
    k_train: np.ndarray
    new_counts: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def coverage(self):
        """Fraction of replicates whose truth lies inside the band, per m."""
        inside = (self.new_counts >= self.lower) & (self.new_counts <= self.upper)
        return inside.mean(axis=0)


def _replicate(stream_seed, n_train, m_grid, params, level):
    data = simulate_restaurant(n_train + int(max(m_grid)), params, stream_seed)
    train, stream = data.head(n_train), data.tail(n_train)
    counts = [count for _, count in new_trait_curve(train, stream, m_grid)]
    stats_train = suff_stats(train, params.r)
    tail = 0.5 * (1.0 - level)
    lower, upper = [], []
    for m in m_grid:
        law = unseen_traits_law(stats_train, params, int(m))
        lower.append(law.ppf(tail))
        upper.append(law.ppf(1.0 - tail))
    return train.k, counts, lower, upper


def replicate_new_trait_counts(params, n_train, m_grid, replicates, seed, level=0.95, threads=1):
    """Run `replicates` independent restaurant simulations of n_train + max(m_grid)
    rows, each on its own stream of `seed`, and compare new-trait counts with
    the analytic unseen-trait band.

    Returns
    -------
    ReplicateCounts
    """
    m_grid = np.asarray(sorted(int(m) for m in m_grid), dtype=np.int64)
    if len(m_grid) == 0:
        raise ConfigurationError("m_grid must not be empty")
    root = seed if isinstance(seed, RngSeed) else RngSeed(int(seed))
    streams = root.generators(int(replicates))
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        results = list(pool.map(lambda g: _replicate(g, n_train, m_grid, params, level), streams))
    return ReplicateCounts(
        m_grid,
        np.array([res[0] for res in results], dtype=np.int64),
        np.array([res[1] for res in results], dtype=np.int64).reshape(len(results), len(m_grid)),
        np.array([res[2] for res in results], dtype=np.int64).reshape(len(results), len(m_grid)),
        np.array([res[3] for res in results], dtype=np.int64).reshape(len(results), len(m_grid)),
    )
