"""Phase-type mixture-of-experts regression for positive, heavy-tailed
severities."""
from .data import Dataset
from .emfit import FitConfig, FitError, FitResult, fit, log_likelihood
from .errors import (DegenerateObservationError, InfiniteMeanError, NumericalError,
                     PhMoeError, SchemaError)
from .gof import hill_estimator, kaplan_meier, pp_points, residuals
from .inference import gating_inference, information_criteria
from .moe import Column, CovariateSchema, PhMoeModel, conditional_mean, softmax_pi
from .phcore import (IphDistribution, PhaseDistribution, iph_density, iph_mean, iph_quantile,
                     iph_survival, tail_report)
from .simulate import apply_censoring, sample_responses, scenario_gamma_groups
from .transforms import Transform

__version__ = "0.1.0"

__all__ = [
    "Column", "CovariateSchema", "Dataset", "DegenerateObservationError", "FitConfig",
    "FitError", "FitResult", "InfiniteMeanError", "IphDistribution", "NumericalError",
    "PhMoeError", "PhMoeModel", "PhaseDistribution", "SchemaError", "Transform",
    "apply_censoring", "conditional_mean", "fit", "gating_inference", "hill_estimator",
    "information_criteria", "iph_density", "iph_mean", "iph_quantile", "iph_survival",
    "kaplan_meier", "log_likelihood", "pp_points", "residuals", "sample_responses",
    "scenario_gamma_groups", "softmax_pi", "tail_report",
]
