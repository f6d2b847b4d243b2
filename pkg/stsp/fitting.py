"""Empirical-Bayes hyperparameter estimation by log-marginal maximization.

Free parameters are optimized on an unconstrained scale (logit α, log of the
positive ones) by BFGS with central-difference gradients, from several
seeded random starts.  The best local maximizer is returned as a FitResult,
which persists as JSON.
"""
import json
import math
import concurrent.futures
from dataclasses import dataclass, field, asdict, replace

import numpy as np
from scipy import optimize
from scipy import special

from stsp import log
from stsp import special_math
from stsp.models import get_model, normalize_tag
from stsp.distributions import RngSeed
from stsp.sysexit import ConfigurationError, FitFailureError, StspError

# -----------------------------------------------------------------------------

FD_STEP = 1e-5
REL_CHANGE_TOL = 1e-10
TRANSFORM_LIMIT = 30.0

# Boxes on the transformed scale from which multistart points are drawn.
START_BOXES = dict(alpha=(-2.0, 2.0), c=(0.0, 6.0), theta=(-2.0, 2.0), r=(0.0, 4.0))

# -----------------------------------------------------------------------------


def to_unconstrained(name, value):
    """logit for α, log for every positive parameter."""
    if name == "alpha":
        return float(special.logit(value))
    return math.log(value)


def from_unconstrained(name, z):
    z = min(max(float(z), -TRANSFORM_LIMIT), TRANSFORM_LIMIT)
    if name == "alpha":
        return float(special.expit(z))
    return math.exp(z)


# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class FitSpec:
    """What to fit and how.

    Attributes
    ----------
    model : str
        Registry tag, see stsp.models.
    free_params : tuple of str
        Parameters to optimize.
    fixed_values : dict
        Values of the parameters held fixed.  Together with `free_params`
        they cover the model's parameter set.
    maxiter, gtol : int, float
        BFGS iteration limit and gradient-norm tolerance on the transformed scale.
    multistart : int
        Number of random starts.
    seed : int
        Seed of the start draws.
    threads : int
        Starts evaluated concurrently.
    quad_order : int
    i_method : str
    initial : dict
        Optional first starting point, used before the random ones.
    """

    model: str
    free_params: tuple
    fixed_values: dict = field(default_factory=dict)
    maxiter: int = 200
    gtol: float = 1e-6
    multistart: int = 5
    seed: int = 0
    threads: int = 1
    quad_order: int = special_math.DEFAULT_QUAD_ORDER
    i_method: str = "auto"
    initial: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "model", normalize_tag(self.model))
        object.__setattr__(self, "free_params", tuple(self.free_params))
        object.__setattr__(self, "fixed_values", {k: float(v) for k, v in self.fixed_values.items()})
        names = set(get_model(self.model, self.quad_order, self.i_method).param_names)
        free, fixed = set(self.free_params), set(self.fixed_values)
        if free & fixed:
            raise ConfigurationError(f"parameters both free and fixed: {sorted(free & fixed)}")
        if free | fixed != names:
            raise ConfigurationError(
                f"free {sorted(free)} and fixed {sorted(fixed)} parameters must cover {sorted(names)} "
                f"for model {self.model}"
            )
        if self.multistart < 1:
            raise ConfigurationError("multistart must be at least 1")

    @classmethod
    def for_model(cls, model, fixed=None, free=None, **settings):
        """Build a FitSpec where every parameter not fixed is free.

        The model's `fixed_defaults` (θ for the NB and Poisson ST-SP models)
        are fixed unless listed in `free`.  Fixed parameters without a value
        take the model default.
        """
        score_model = get_model(model, settings.get("quad_order", special_math.DEFAULT_QUAD_ORDER))
        fixed = dict(fixed or {})
        free = set(free or ())
        for name, value in score_model.fixed_defaults.items():
            if name not in free:
                fixed.setdefault(name, value)
        free_params = tuple(name for name in score_model.param_names if name not in fixed)
        return cls(score_model.model_name, free_params, fixed, **settings)

    def fixing(self, name, value):
        """Return a copy of this spec with `name` held at `value`."""
        fixed = dict(self.fixed_values)
        fixed[name] = float(value)
        free = tuple(p for p in self.free_params if p != name)
        return replace(self, free_params=free, fixed_values=fixed)


@dataclass
class FitResult:
    """Outcome of `fit`.

    Attributes
    ----------
    model : str
    params : dict
        Fitted and fixed values of every model parameter.
    log_marginal : float
    converged : bool
    iterations : int
        BFGS iterations of the winning start.
    seed : int
    free_params : list of str
    starts : list of dict
        Per start: initial values, initial and final log-marginal, iterations.
    trace : list of float
        Log-marginal after each iteration of the winning start.
    """

    model: str
    params: dict
    log_marginal: float
    converged: bool
    iterations: int
    seed: int = 0
    free_params: list = field(default_factory=list)
    starts: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path=None):
        """Return the result as JSON text, also written to `path` when given."""
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(text + "\n")
        return text

    @classmethod
    def from_json(cls, text_or_path):
        """Load a FitResult from JSON text or a path to a JSON file."""
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as handle:
                text = handle.read()
        try:
            values = json.loads(text)
            return cls(**values)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"not a fit result: {exc}") from exc


# -----------------------------------------------------------------------------


class _Objective:
    """Negative log-marginal over the transformed free parameters, with
    non-finite values and model errors mapped to +inf."""

    def __init__(self, model, stats, spec):
        self.model = model
        self.stats = stats
        self.spec = spec
        self.evaluations = 0
        self.last = {}

    def values(self, z):
        values = dict(self.spec.fixed_values)
        for name, zi in zip(self.spec.free_params, z):
            values[name] = from_unconstrained(name, zi)
        return values

    def __call__(self, z):
        key = np.asarray(z, dtype=float).tobytes()
        cached = self.last.get(key)
        if cached is not None:
            return cached
        self.evaluations += 1
        try:
            value = -self.model.log_marginal(self.stats, self.model.make_params(self.values(z)))
        except (StspError, ValueError, FloatingPointError, ZeroDivisionError, OverflowError) as exc:
            log.verbose("objective failed at", self.values(z), ":", exc, verbosity=70)
            value = math.inf
        if not math.isfinite(value):
            value = math.inf
        if len(self.last) > 64:
            self.last.clear()
        self.last[key] = value
        return value

    def gradient(self, z):
        z = np.asarray(z, dtype=float)
        grad = np.zeros_like(z)
        for i in range(len(z)):
            step = np.zeros_like(z)
            step[i] = FD_STEP
            grad[i] = (self(z + step) - self(z - step)) / (2.0 * FD_STEP)
        return grad


def _start_points(spec, model):
    """The FitSpec initial point (or the model defaults) followed by random draws."""
    rng = RngSeed(spec.seed).generator()
    first = dict(model.defaults)
    first.update(spec.initial)
    points = [np.array([to_unconstrained(name, first[name]) for name in spec.free_params])]
    for _ in range(spec.multistart - 1):
        points.append(np.array([rng.uniform(*START_BOXES[name]) for name in spec.free_params]))
    return points


def _run_start(objective, z0, spec):
    initial = objective(z0)
    record = dict(initial=objective.values(z0), initial_log_marginal=-initial)
    if not math.isfinite(initial):
        record.update(final_log_marginal=-math.inf, iterations=0, converged=False)
        return record, None, []
    history = [initial]

    def callback(zk):
        history.append(objective(zk))

    result = optimize.minimize(
        objective,
        z0,
        method="BFGS",
        jac=objective.gradient,
        callback=callback,
        options=dict(maxiter=spec.maxiter, gtol=spec.gtol),
    )
    z = result.x if result.fun <= initial else z0
    final = min(result.fun, initial)
    small_change = len(history) > 1 and abs(history[-1] - history[-2]) <= REL_CHANGE_TOL * max(1.0, abs(history[-1]))
    converged = bool(result.success or small_change)
    record.update(
        final=objective.values(z),
        final_log_marginal=-final,
        iterations=int(result.nit),
        converged=converged,
        message=str(result.message),
    )
    log.verbose("start", record["initial"], "->", record["final"], "log marginal", -final, verbosity=55)
    return record, z, [-h for h in history]


def fit_stats(stats, spec, model=None):
    """Fit `spec` to prepared sufficient statistics; see `fit`."""
    model = model or get_model(spec.model, spec.quad_order, spec.i_method)
    objective = _Objective(model, stats, spec)

    if not spec.free_params:
        value = objective(np.zeros(0))
        if not math.isfinite(value):
            raise FitFailureError(f"log marginal of {spec.model} is not finite at {spec.fixed_values}")
        return FitResult(
            model.model_name, objective.values(np.zeros(0)), -value, True, 0, spec.seed, [], [], [-value]
        )

    starts = _start_points(spec, model)
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, spec.threads)) as pool:
        outcomes = list(pool.map(lambda z0: _run_start(objective, z0, spec), starts))

    records = [record for record, _, _ in outcomes]
    finished = [(record, z, trace) for record, z, trace in outcomes if z is not None]
    if not finished:
        raise FitFailureError(f"log marginal of {spec.model} is not finite at any of {len(starts)} starts", records)
    record, z, trace = max(finished, key=lambda item: item[0]["final_log_marginal"])
    log.info(
        "Fitted",
        model.model_name,
        "log marginal",
        f"{record['final_log_marginal']:.6f}",
        "at",
        log.PP(record["final"]),
        "after",
        record["iterations"],
        "iterations",
    )
    return FitResult(
        model.model_name,
        objective.values(z),
        record["final_log_marginal"],
        record["converged"],
        record["iterations"],
        spec.seed,
        list(spec.free_params),
        records,
        trace,
    )


def fit(data, spec):
    """Maximize the log-marginal of `data` under `spec.model`.

    Parameters
    ----------
    data : TraitDataset
    spec : FitSpec

    Returns
    -------
    FitResult
        The best local maximizer over `spec.multistart` starts.  With no free
        parameters the marginal is only evaluated: 0 iterations, converged.

    Raises
    ------
    FitFailureError
        The objective is not finite at any start; `diagnostics` lists them.
    """
    model = get_model(spec.model, spec.quad_order, spec.i_method)
    stats = model.prepare(data)
    return fit_stats(stats, spec, model)


def profile(data, spec, param, grid):
    """Log-marginal profile of `param` over `grid`, re-optimizing the other
    free parameters at every grid point.

    Returns
    -------
    list of (value, log_marginal)
    """
    model = get_model(spec.model, spec.quad_order, spec.i_method)
    if param not in model.param_names:
        raise ConfigurationError(f"model {model.model_name} has no parameter {param!r}")
    stats = model.prepare(data)
    points = []
    for value in grid:
        result = fit_stats(stats, spec.fixing(param, value), model)
        points.append((float(value), result.log_marginal))
    return points
