"""Analysis toolkit for tone-mapped losses trained on noisy targets.

Provides tone-mapping operators, loss functions with closed-form
expected-loss minimizers, curvature-based bounds on the minimizer bias, a
catalog of noise models with exactly known moments, a Monte Carlo
verification oracle, and a toy per-pixel trainer, all behind one CLI.
"""

__version__ = "0.1.0"

from .errors import ContractError, DomainError, NumericError
from .tonemap import GAMMA_EXPONENT, ToneMap, apply_inverse, make_tonemap
from .losses import (
    LossSpec,
    MinimizerForm,
    closed_form_minimizer,
    loss_gradient,
    loss_value,
    sample_moments,
    sweep_configs,
)
from .jensen import (
    BiasInterval,
    JensenBoundPair,
    NumericJ,
    PhiFunction,
    TABLE_ROWS,
    STAR_ROWS,
    analytic_j,
    bias_interval,
    curve_emit,
    h,
    make_phi,
    numeric_j,
)
from .noise_models import (
    NoiseModel,
    bhatia_davis_bound,
    expectation,
    make_noise_model,
    sample,
)
from .oracle import (
    OracleResult,
    SearchParams,
    empirical_minimizer,
    exact_moments,
    finite_data_check,
    run_battery,
)
from .trainer import (
    SyntheticField,
    TrainConfig,
    TrainRun,
    make_field,
    run_sweep,
    train,
    validation_rmse,
)

__all__ = [
    "ContractError",
    "DomainError",
    "NumericError",
    "GAMMA_EXPONENT",
    "ToneMap",
    "apply_inverse",
    "make_tonemap",
    "LossSpec",
    "MinimizerForm",
    "closed_form_minimizer",
    "loss_gradient",
    "loss_value",
    "sample_moments",
    "sweep_configs",
    "BiasInterval",
    "JensenBoundPair",
    "NumericJ",
    "PhiFunction",
    "TABLE_ROWS",
    "STAR_ROWS",
    "analytic_j",
    "bias_interval",
    "curve_emit",
    "h",
    "make_phi",
    "numeric_j",
    "NoiseModel",
    "bhatia_davis_bound",
    "expectation",
    "make_noise_model",
    "sample",
    "OracleResult",
    "SearchParams",
    "empirical_minimizer",
    "exact_moments",
    "finite_data_check",
    "run_battery",
    "SyntheticField",
    "TrainConfig",
    "TrainRun",
    "make_field",
    "run_sweep",
    "train",
    "validation_rmse",
    "__version__",
]
