"""Command line interface of stsp.

    stsp simulate --generator restaurant -n 2000 --alpha 0.3 --c 60 --r 10 --seed 1 --out sim
    stsp fit sim/dataset.csv --model nb-stsp --r 10 --fix r --n-train 250 --out fit
    stsp predict sim/dataset.csv --fit fit/fit.json --n-train 250 --m-max 1750 --out pred
    stsp classify --train corpus/train --test corpus/test --model nb-stsp --out clf

Every subcommand writes its artifacts plus manifest.json (version, config,
counts, metrics, message counts) and a log file into --out.  Exit status: 0 success,
2 invalid configuration, 3 numerical failure.
"""
import os
import sys
import json
import argparse
import dataclasses
from dataclasses import dataclass, field

import numpy as np

import stsp
from stsp import log
from stsp import exit_codes
from stsp import sysexit
from stsp import file_ops
from stsp import metrics
from stsp import special_math
from stsp import generative
from stsp import classifier
from stsp.models import MODELS, get_model, normalize_tag
from stsp.fitting import FitSpec, FitResult, fit
from stsp.sysexit import ConfigurationError, ModelMismatchError

# -----------------------------------------------------------------------------

SUBCOMMANDS = ("simulate", "fit", "predict", "classify")

GENERATORS = ("restaurant", "zipf", "nbga", "sbsp")

GENERATOR_MODELS = dict(restaurant="nb_stsp", zipf=None, nbga="nbga", sbsp="sbsp")

PARAM_FLAGS = ("alpha", "c", "theta", "r")

BAND_LEVEL = 0.95

LOG_NAME = "stsp.log"

# -----------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines the outputs of one stsp run.

    Attributes
    ----------
    subcommand : str
    model : str
        Registry tag, or None to take it from a fit file (predict) or the
        generator (simulate).
    params : dict
        Parameter values from --params merged with the --alpha/--c/--theta/--r flags.
    params_file : str
    fixed : tuple of str
        Parameters held at their given value while fitting.
    seed : int
    quad_order : int
    quad_method : str
        Evaluation path of I(r, n).
    grid_max : int
        Initial predictive grid size.
    threads : int
    out : str
        Output directory.
    verbose : int
    options : dict
        Subcommand inputs and settings.
    """

    subcommand: str
    model: str = None
    params: dict = field(default_factory=dict)
    params_file: str = None
    fixed: tuple = ()
    seed: int = 0
    quad_order: int = special_math.DEFAULT_QUAD_ORDER
    quad_method: str = "auto"
    grid_max: int = 512
    threads: int = 1
    out: str = "stsp_out"
    verbose: int = 0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigurationError(f"unknown subcommand {self.subcommand!r}")
        if self.model is not None:
            object.__setattr__(self, "model", normalize_tag(self.model))
            if self.model not in MODELS:
                raise ConfigurationError(f"unknown model {self.model!r}, expected one of {sorted(MODELS)}")
        object.__setattr__(self, "fixed", tuple(self.fixed))
        if not 1 <= self.quad_order <= special_math.MAX_QUAD_ORDER:
            raise ConfigurationError(f"--quad-order {self.quad_order} outside 1..{special_math.MAX_QUAD_ORDER}")
        if self.quad_method not in special_math.I_METHODS:
            raise ConfigurationError(f"--quad-method {self.quad_method!r} not in {special_math.I_METHODS}")
        if self.threads < 1 or self.grid_max < 1:
            raise ConfigurationError("--threads and --grid-max must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"--seed {self.seed} is not a 64-bit unsigned integer")

    def to_dict(self):
        values = dataclasses.asdict(self)
        values["fixed"] = list(self.fixed)
        return values

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, values):
        return cls(**values)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_args(cls, args):
        """Build the config from parsed command line arguments; flags win over --params."""
        params = file_ops.read_params(args.params) if args.params else {}
        for name in PARAM_FLAGS:
            value = getattr(args, name)
            if value is not None:
                params[name] = float(value)
        fixed = tuple(name.strip() for name in (args.fix or "").split(",") if name.strip())
        common = {"subcommand", "model", "params", "fix", "seed", "quad_order", "quad_method", "grid_max"}
        common |= {"threads", "out", "verbose"} | set(PARAM_FLAGS)
        options = {key: value for key, value in vars(args).items() if key not in common}
        return cls(
            subcommand=args.subcommand,
            model=args.model,
            params=params,
            params_file=args.params,
            fixed=fixed,
            seed=args.seed,
            quad_order=args.quad_order,
            quad_method=args.quad_method,
            grid_max=args.grid_max,
            threads=args.threads,
            out=args.out,
            verbose=args.verbose,
            options=options,
        )

    def score_model(self, default="nb_stsp"):
        return get_model(self.model or default, self.quad_order, self.quad_method)

    def path(self, name):
        return os.path.join(self.out, name)


# -----------------------------------------------------------------------------


def parse_int_list(text):
    """Parse '0,10,20' into [0, 10, 20]."""
    try:
        values = [int(item) for item in str(text).split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected comma separated integers, got {text!r}") from exc
    if any(value < 0 for value in values):
        raise ConfigurationError(f"negative value in {text!r}")
    return values


def dataset_counts(data):
    return dict(
        n_obs=int(data.n_obs),
        n_traits=int(data.k),
        entries=int(len(data.score)),
        total_score=float(data.total_score) if data.score_kind == "real" else int(data.total_score),
    )


def read_dataset(config, key="dataset"):
    path = config.options[key]
    data = file_ops.read_dataset_csv(path)
    log.info("Read", repr(path), "with", data.n_obs, "observations and", data.k, "traits")
    return data


def fit_spec_from_config(config, model):
    """FitSpec with --fix parameters held at their given (or default) values and
    the other given values used as the first starting point."""
    unknown = [name for name in config.fixed if name not in model.param_names]
    if unknown:
        raise ConfigurationError(f"--fix names {unknown} are not {model.model_name} parameters")
    values = dict(model.defaults)
    values.update(model.fixed_defaults)
    values.update({k: v for k, v in config.params.items() if k in model.param_names})
    fixed = {name: values[name] for name in set(config.fixed) | set(model.fixed_defaults)}
    initial = {k: v for k, v in config.params.items() if k in model.param_names and k not in fixed}
    return FitSpec.for_model(
        model.model_name,
        fixed=fixed,
        maxiter=config.options.get("maxiter", 200),
        multistart=config.options.get("multistart", 5),
        seed=config.seed,
        threads=config.threads,
        quad_order=config.quad_order,
        i_method=config.quad_method,
        initial=initial,
    )


# -----------------------------------------------------------------------------


def cmd_simulate(config):
    """Simulate a dataset and write dataset.csv."""
    generator = config.options["generator"]
    n_total = config.options["n_total"]
    extra = dict(generator=generator)
    if generator == "zipf":
        r = config.params.get("r", 10.0)
        xi, k_max = config.options["xi"], config.options["k_max"]
        data = generative.simulate_zipf(n_total, xi, r, k_max, seed=config.seed)
        extra.update(xi=xi, r=r, k_max=k_max, q1=float(generative.zipf_rates(xi, 1)[0]))
        extra["residual_mass"] = generative.zipf_residual_mass(xi, r, k_max)
    else:
        model = get_model(GENERATOR_MODELS[generator], config.quad_order, config.quad_method)
        params = model.make_params({k: v for k, v in config.params.items() if k in model.param_names})
        extra.update(model=model.model_name, params=params.as_dict())
        if generator == "restaurant":
            data = generative.simulate_restaurant(
                n_total, params, config.seed, config.options["old_trait_sampler"], config.grid_max
            )
        elif generator == "nbga":
            data = generative.simulate_nbga(n_total, params, config.seed)
        else:
            data = generative.simulate_sbsp_restaurant(n_total, params, config.seed)
    file_ops.write_dataset_csv(data, config.path("dataset.csv"))
    log.info("Simulated", data.n_obs, "observations with", data.k, "traits by", generator)
    return dict(
        outputs=["dataset.csv"],
        datasets={"dataset.csv": int(data.n_obs)},
        counts=dataset_counts(data),
        simulation=extra,
    )


def cmd_fit(config):
    """Fit hyperparameters by empirical Bayes and write fit.json."""
    data = read_dataset(config)
    n_train = config.options.get("n_train")
    if n_train is not None:
        data = data.head(n_train)
    model = config.score_model()
    spec = fit_spec_from_config(config, model)
    log.info("Fitting", model.model_name, "free", list(spec.free_params), "fixed", spec.fixed_values)
    result = fit(data, spec)
    result.to_json(config.path("fit.json"))
    return dict(outputs=["fit.json"], counts=dataset_counts(data), fit=result.to_dict())


def _predict_inputs(config):
    data = read_dataset(config)
    params = {}
    model_tag = config.model
    if config.options.get("fit"):
        fitted = FitResult.from_json(config.options["fit"])
        if model_tag is not None and normalize_tag(fitted.model) != model_tag:
            raise ModelMismatchError(f"--model {model_tag} does not match the {fitted.model} fit file")
        model_tag = fitted.model
        params.update(fitted.params)
    params.update(config.params)
    n_train = config.options.get("n_train")
    stream = None
    if config.options.get("holdout"):
        stream = file_ops.read_dataset_csv(config.options["holdout"])
        train = data if n_train is None else data.head(n_train)
    elif n_train is not None:
        train, stream = data.head(n_train), data.tail(n_train)
    else:
        train = data
    return model_tag, params, train, stream


def cmd_predict(config):
    """Write extrapolation.csv: per m the mean and central 95% band of the
    number of new traits, and the observed count when a stream is available."""
    model_tag, values, train, stream = _predict_inputs(config)
    model = get_model(model_tag or "nb_stsp", config.quad_order, config.quad_method)
    params = model.make_params({k: v for k, v in values.items() if k in model.param_names})
    if config.options.get("m_grid"):
        m_grid = parse_int_list(config.options["m_grid"])
    else:
        step = max(1, config.options.get("m_step") or 1)
        m_grid = list(range(0, config.options.get("m_max", 100) + 1, step))
    if not m_grid:
        raise ConfigurationError("the m grid is empty")
    stats = model.prepare(train)
    tail = 0.5 * (1.0 - BAND_LEVEL)
    columns = dict(m=[], mean=[], lower=[], upper=[])
    for m in m_grid:
        law = model.unseen_law(stats, params, m)
        columns["m"].append(m)
        columns["mean"].append(float(law.mean))
        columns["lower"].append(law.ppf(tail))
        columns["upper"].append(law.ppf(1.0 - tail))
    if stream is not None:
        available = [m for m in m_grid if m <= stream.n_obs]
        truth = dict(generative.new_trait_curve(train, stream, available))
        columns["truth"] = [truth.get(m, -1) for m in m_grid]
    columns = {name: np.asarray(values) for name, values in columns.items()}
    file_ops.write_table_csv(columns, config.path("extrapolation.csv"))
    log.info("Predicted new traits for", len(m_grid), "values of m under", model.model_name)
    return dict(
        outputs=["extrapolation.csv"],
        counts=dataset_counts(train),
        model=model.model_name,
        params=params.as_dict(),
        stream_rows=None if stream is None else int(stream.n_obs),
    )


def cmd_classify(config):
    """Train one model per class and write probabilities.csv and summary.json."""
    train_docs = file_ops.read_corpus(config.options["train"])
    test_docs = file_ops.read_corpus(config.options["test"]) if config.options.get("test") else train_docs
    corpus = classifier.Corpus.from_labeled(
        train_docs, config.options.get("stopwords"), config.options.get("min_doc_freq", classifier.DEFAULT_MIN_DOC_FREQ)
    )
    log.info("Vocabulary of", len(corpus.vocabulary), "tokens over", len(corpus.classes), "classes")
    model = config.score_model()
    spec = fit_spec_from_config(config, model)
    clf = classifier.train(corpus, model.model_name, spec, config.options.get("class_prior", "uniform"), config.threads)
    evaluation = classifier.evaluate(clf, test_docs, config.threads)
    columns = dict(
        doc=np.arange(len(evaluation.labels)),
        label=np.array([str(label) for label in evaluation.labels], dtype=str),
        predicted=np.array([str(label) for label in evaluation.predicted], dtype=str),
    )
    for j, label in enumerate(clf.classes):
        columns[f"p_{label}"] = evaluation.probabilities[:, j]
    file_ops.write_table_csv(columns, config.path("probabilities.csv"))
    summary = evaluation.summary()
    summary["params"] = {str(cm.label): cm.fit.params for cm in clf.class_models}
    summary["vocabulary_size"] = len(corpus.vocabulary)
    file_ops.write_json(summary, config.path("summary.json"))
    return dict(outputs=["probabilities.csv", "summary.json"], counts=dict(documents=len(evaluation.labels)))


COMMANDS = dict(simulate=cmd_simulate, fit=cmd_fit, predict=cmd_predict, classify=cmd_classify)

# -----------------------------------------------------------------------------


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--model", default=None, help="score model: nb-stsp (default), poisson-stsp, sbsp or nbga", type=str
    )
    for name in PARAM_FLAGS:
        common.add_argument(f"--{name}", type=float, default=None, help=f"value of hyperparameter {name}")
    common.add_argument("--params", default=None, help="JSON file of parameter values or a fit result")
    common.add_argument("--fix", default="", help="comma separated parameters held fixed while fitting, e.g. r")
    common.add_argument("--seed", type=int, default=0, help="64-bit seed of every random stream")
    common.add_argument("--quad-order", type=int, default=special_math.DEFAULT_QUAD_ORDER, help="Gauss-Laguerre order")
    common.add_argument(
        "--quad-method", default="auto", choices=special_math.I_METHODS, help="evaluation path of I(r, n)"
    )
    common.add_argument("--grid-max", type=int, default=512, help="initial predictive pmf grid size")
    common.add_argument("--threads", type=int, default=1, help="worker threads for multistarts, replicates, classes")
    common.add_argument("--out", default="stsp_out", help="output directory")
    common.add_argument("--verbose", type=int, default=0, help="debug verbosity 0..100, 50 for default debug output")
    return common


def parse_args(argv=None):
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="stsp", description="ST-SP trait allocation: simulate, fit, predict, classify"
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    sim = subparsers.add_parser("simulate", parents=[common], help="simulate a trait dataset")
    sim.add_argument("--generator", choices=GENERATORS, default="restaurant")
    sim.add_argument("-n", "--n-total", type=int, default=2000, help="number of observations")
    sim.add_argument("--xi", type=float, default=1.5, help="Zipf exponent")
    sim.add_argument("--k-max", type=int, default=generative.DEFAULT_ZIPF_K_MAX, help="Zipf truncation")
    sim.add_argument("--old-trait-sampler", choices=generative.OLD_TRAIT_SAMPLERS, default="beta_mixture")

    fit_cmd = subparsers.add_parser("fit", parents=[common], help="fit hyperparameters by empirical Bayes")
    fit_cmd.add_argument("dataset", help="sparse trait CSV obs_id,trait_id,score")
    fit_cmd.add_argument("--n-train", type=int, default=None, help="fit only the first N observations")
    fit_cmd.add_argument("--multistart", type=int, default=5)
    fit_cmd.add_argument("--maxiter", type=int, default=200)

    predict = subparsers.add_parser("predict", parents=[common], help="extrapolate the number of new traits")
    predict.add_argument("dataset", help="sparse trait CSV obs_id,trait_id,score")
    predict.add_argument("--fit", default=None, help="fit.json written by 'stsp fit'")
    predict.add_argument("--n-train", type=int, default=None, help="train on the first N rows, the rest is the stream")
    predict.add_argument("--holdout", default=None, help="sparse trait CSV of follow-up observations")
    predict.add_argument("--m-grid", default=None, help="comma separated sample sizes m")
    predict.add_argument("--m-max", type=int, default=100, help="largest m when --m-grid is not given")
    predict.add_argument("--m-step", type=int, default=1, help="spacing of m when --m-grid is not given")

    classify = subparsers.add_parser("classify", parents=[common], help="naive-Bayes text classification")
    classify.add_argument("--train", required=True, help="class-per-directory corpus or doc_id,class,token,count CSV")
    classify.add_argument("--test", default=None, help="labeled test corpus; defaults to the training corpus")
    classify.add_argument("--stopwords", default=None, help="stopword file, one word per line")
    classify.add_argument("--min-doc-freq", type=int, default=classifier.DEFAULT_MIN_DOC_FREQ)
    classify.add_argument("--class-prior", choices=classifier.CLASS_PRIORS, default="uniform")
    classify.add_argument("--multistart", type=int, default=5)
    classify.add_argument("--maxiter", type=int, default=200)

    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        code = exit_codes.SUCCESS if not exc.code else exit_codes.CONFIG_ERROR
        raise sysexit.StspExit(code) from exc


def main(argv=None):
    """Run one subcommand; returns SUCCESS or raises StspExit with the exit status."""
    args = parse_args(argv)
    with sysexit.exit_on_exception(exit_codes.CONFIG_ERROR, "Invalid stsp command line."):
        config = RunConfig.from_args(args)
        if config.verbose:
            log.set_verbose(config.verbose)
        file_ops.ensure_output_dir(config.out)
    timer = metrics.RunTimer()
    counts_before = log.status()
    with log.log_to_file(config.path(LOG_NAME)):
        log.divider(f"stsp {config.subcommand}")
        log.verbose("Run config", config.to_json(), verbosity=55)
        with sysexit.exit_on_exception(exit_codes.GENERIC_ERROR, "stsp", config.subcommand, "failed."):
            summary = COMMANDS[config.subcommand](config)
        manifest = dict(command=config.subcommand, stsp_version=stsp.__version__, config=config.to_dict())
        manifest.update(summary)
        manifest["metrics"] = timer.metrics(config.out)
        errors, warnings, infos = (after - before for after, before in zip(log.status(), counts_before))
        manifest["messages"] = dict(errors=errors, warnings=warnings, infos=infos)
        file_ops.write_manifest(config.out, manifest)
        log.standard_status()
    return exit_codes.SUCCESS


def cmdline():
    with sysexit.exit_receiver():
        main(sys.argv[1:])


if __name__ == "__main__":
    cmdline()
