"""Operator norms of random matrices: ensembles, exact and iterative norms,
sphere nets, sub-Gaussian tail diagnostics, and concentration experiments."""

__version__ = "0.1.0"

from . import diagnostics, ensembles, epsnet, experiments, specnorm  # noqa: E402
from .ensembles import (  # noqa: E402
    AllOnes,
    CommonFactor,
    FixedRotation,
    Gaussian,
    Identity,
    IidEntries,
    IndependentRows,
    Rademacher,
    StudentT,
    TruncGaussian,
    UniformSym,
    derive_trial_seed,
    sample_matrix,
    sample_values,
    tail_params_of,
)
from .epsnet import build_net, cardinality_bounds, load_net, save_net  # noqa: E402
from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DataError,
    DegenerateEnsembleError,
    InsufficientTailError,
    NotSubGaussianError,
    OpnormLabError,
    ParameterError,
    ScaleError,
    ShapeError,
)
from .specnorm import (  # noqa: E402
    NormKind,
    opnorm_closed,
    opnorm_exact,
    opnorm_power,
)

__all__ = [
    "__version__",
    "diagnostics", "ensembles", "epsnet", "experiments", "specnorm",
    "AllOnes", "CommonFactor", "FixedRotation", "Gaussian", "Identity",
    "IidEntries", "IndependentRows", "Rademacher", "StudentT",
    "TruncGaussian", "UniformSym",
    "derive_trial_seed", "sample_matrix", "sample_values", "tail_params_of",
    "build_net", "cardinality_bounds", "load_net", "save_net",
    "NormKind", "opnorm_closed", "opnorm_exact", "opnorm_power",
    "OpnormLabError", "ConfigError", "ConvergenceError", "DataError",
    "DegenerateEnsembleError", "InsufficientTailError", "NotSubGaussianError",
    "ParameterError", "ScaleError", "ShapeError",
]
