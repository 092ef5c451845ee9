from .decay import decay_rate, verify_origin_decay, euclidean_decay_rate
from .maximal import BumpProfile, MaximalFunction, radial_maximal_norm, compare_maximal_atomic, radial_maximal_function
from .reports import Verdict, SlopeFit, EstimateReport, drift, fit_loglog
from .fourier_bounds import hardy_weight, verify_transform_bound, verify_derivative_bound, verify_finite_sum_bound
from .hardy_littlewood import (
    ShellIntegral,
    WeightExponents,
    annulus_grid,
    shell_integral,
    weight_exponents,
    verify_hardy_littlewood,
    verify_hardy_littlewood_sum,
)

__all__ = [
    "Verdict",
    "SlopeFit",
    "EstimateReport",
    "drift",
    "fit_loglog",
    "hardy_weight",
    "verify_derivative_bound",
    "verify_transform_bound",
    "verify_finite_sum_bound",
    "decay_rate",
    "euclidean_decay_rate",
    "verify_origin_decay",
    "WeightExponents",
    "ShellIntegral",
    "weight_exponents",
    "annulus_grid",
    "shell_integral",
    "verify_hardy_littlewood",
    "verify_hardy_littlewood_sum",
    "BumpProfile",
    "MaximalFunction",
    "radial_maximal_function",
    "radial_maximal_norm",
    "compare_maximal_atomic",
]
