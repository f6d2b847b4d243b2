"""Score-model registry shared by fitting, the classifier and the command line.

Each ScoreModel subclass names its hyperparameters and knows how to reduce a
TraitDataset to sufficient statistics, evaluate the log-marginal and return
the law of the number of unseen traits.  Models are looked up by tag:

>>> get_model("nb-stsp").model_name
'nb_stsp'
>>> sorted(MODELS)
['nb_stsp', 'nbga', 'poisson_stsp', 'sbsp']
"""
from stsp import special_math
from stsp import stsp_core
from stsp import baselines
from stsp.special_math import StableParams
from stsp.baselines import GammaProcParams
from stsp.sysexit import ConfigurationError, ModelMismatchError

# -----------------------------------------------------------------------------


class ScoreModel:
    """Abstract baseclass customized by `model_name`, `param_names`,
    `defaults`, `fixed_defaults` and `score_kinds`, which must be redefined
    by each subclass.

    Attributes
    ----------
    model_name : str
        (class) Registry tag.
    param_names : tuple of str
        (class) Hyperparameters of the model, in canonical order.
    defaults : dict
        (class) Starting values used when a parameter is neither given nor fitted.
    fixed_defaults : dict
        (class) Parameters held fixed unless explicitly freed, e.g. θ where it
        cancels from the marginal.
    score_kinds : tuple of str
        (class) TraitDataset score kinds the model accepts.
    param_class : type
        (class) StableParams or GammaProcParams.

    rule : QuadratureRule
        (instance) Gauss–Laguerre rule for quadrature-based evaluation paths.
    i_method : str
        (instance) Evaluation path of I(r, n), see special_math.i_integral.

    Methods
    -------
    make_params(values)
    prepare(data)
        Check `data` and reduce it to SuffStats.
    log_marginal(stats, params)
    unseen_law(stats, params, m)
    """

    model_name = None  # abstract class
    param_names = ()  # abstract class
    defaults = {}  # abstract class
    fixed_defaults = {}
    score_kinds = ("count",)
    param_class = StableParams

    def __init__(self, quad_order=special_math.DEFAULT_QUAD_ORDER, i_method="auto"):
        if i_method not in special_math.I_METHODS:
            raise ConfigurationError(f"unknown I(r, k) method {i_method!r}, expected one of {special_math.I_METHODS}")
        self.rule = special_math.gauss_laguerre(quad_order)
        self.i_method = i_method

    def __repr__(self):
        return f"{self.__class__.__name__}(order={self.rule.order}, i_method={self.i_method!r})"

    # .............................................................

    def make_params(self, values):
        """Build the parameter object from `values`, filling gaps from `defaults`."""
        unknown = set(values) - set(self.param_names)
        if unknown:
            raise ConfigurationError(f"model {self.model_name} has no parameters {sorted(unknown)}")
        merged = dict(self.defaults)
        merged.update(values)
        return self.param_class(**{name: float(merged[name]) for name in self.param_names})

    def check_data(self, data):
        if data.score_kind not in self.score_kinds:
            raise ModelMismatchError(
                f"model {self.model_name} needs {' or '.join(self.score_kinds)} scores, got {data.score_kind} data"
            )

    def prepare(self, data):
        """Return the SuffStats of `data` for this model."""
        self.check_data(data)
        return stsp_core.suff_stats(data, self.defaults.get("r", 1.0))

    def log_marginal(self, stats, params):
        raise NotImplementedError

    def unseen_law(self, stats, params, m):
        raise NotImplementedError


class NbStspModel(ScoreModel):
    """NB-ST-SP: negative-binomial scores under the ST-SP prior."""

    model_name = "nb_stsp"
    param_names = ("alpha", "c", "theta", "r")
    defaults = dict(alpha=0.5, c=1.0, theta=1.0, r=1.0)
    fixed_defaults = dict(theta=1.0)

    def log_marginal(self, stats, params):
        return stsp_core.log_marginal_nb(stats, params, self.rule, self.i_method)

    def unseen_law(self, stats, params, m):
        return stsp_core.unseen_traits_law(stats, params, m, self.rule, self.i_method)


class PoissonStspModel(NbStspModel):
    """Poisson-ST-SP: Poisson scores under the ST-SP prior."""

    model_name = "poisson_stsp"

    def log_marginal(self, stats, params):
        return stsp_core.log_marginal_poisson(stats, params, self.rule, self.i_method)


class SbspModel(ScoreModel):
    """SB-SP: presence/absence under the stable-Beta scaled process.  Count
    data are binarized first."""

    model_name = "sbsp"
    param_names = ("alpha", "c", "theta")
    defaults = dict(alpha=0.5, c=1.0, theta=1.0)
    score_kinds = ("binary", "count")

    def prepare(self, data):
        self.check_data(data)
        return stsp_core.suff_stats(baselines.binarize(data), 1.0)

    def log_marginal(self, stats, params):
        return stsp_core.log_marginal_sbsp(stats, params, self.rule)

    def unseen_law(self, stats, params, m):
        return baselines.unseen_traits_law_sbsp(stats, params, m, self.rule)


class NbgaModel(ScoreModel):
    """NB-Ga: negative-binomial scores under the gamma-process CRM."""

    model_name = "nbga"
    param_names = ("theta", "r")
    defaults = dict(theta=1.0, r=1.0)
    param_class = GammaProcParams

    def log_marginal(self, stats, params):
        return baselines.log_marginal_nbga(stats, params, self.rule)

    def unseen_law(self, stats, params, m):
        return baselines.unseen_traits_law_nbga(stats.n, m, params)


# ............................................................................

MODELS = {
    "nb_stsp": NbStspModel,
    "poisson_stsp": PoissonStspModel,
    "sbsp": SbspModel,
    "nbga": NbgaModel,
}


def normalize_tag(tag):
    """Map command-line spellings such as 'nb-stsp' onto registry tags."""
    return str(tag).strip().lower().replace("-", "_")


def get_model(tag, quad_order=special_math.DEFAULT_QUAD_ORDER, i_method="auto"):
    """Construct and return the ScoreModel registered under `tag`.

    Parameters
    ----------
    tag : str
        "nb_stsp", "poisson_stsp", "sbsp" or "nbga"; dashes are accepted.
    quad_order : int
        Gauss–Laguerre order of the model's quadrature rule.
    i_method : str
        Evaluation path of I(r, n).

    Returns
    -------
    ScoreModel subclass instance
    """
    name = normalize_tag(tag)
    if name not in MODELS:
        raise ConfigurationError(f"unknown model {tag!r}, expected one of {sorted(MODELS)}")
    return MODELS[name](quad_order=quad_order, i_method=i_method)
