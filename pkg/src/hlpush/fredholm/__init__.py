"""Fredholm determinants, limiting distributions and finite-time contour formulas."""
from .contour import Contour, ray_length
from .det import (
    FredholmConvergenceError,
    FredholmResult,
    HadamardViolation,
    KernelSpec,
    fredholm_det,
    hadamard_ratio,
    nystrom_matrix,
)
from .distributions import (
    DistributionTable,
    distribution_mean,
    distribution_median,
    distribution_table,
    f_goe_real_line,
    f_goe_sq,
    f_gue,
    f_gue_real_line,
    gaussian_via_fredholm,
    tabulate,
)
from .finite_time import (
    ContourCertificationError,
    QLaplaceContours,
    certify_contours,
    moment_qL,
    q_laplace_closed_form_t0,
    q_laplace_finite_t,
)
from .qspecial import q_binomial, q_pochhammer

__all__ = [
    "Contour",
    "ray_length",
    "KernelSpec",
    "FredholmResult",
    "FredholmConvergenceError",
    "HadamardViolation",
    "fredholm_det",
    "hadamard_ratio",
    "nystrom_matrix",
    "DistributionTable",
    "distribution_mean",
    "distribution_median",
    "distribution_table",
    "f_gue",
    "f_goe_sq",
    "gaussian_via_fredholm",
    "f_gue_real_line",
    "f_goe_real_line",
    "tabulate",
    "QLaplaceContours",
    "ContourCertificationError",
    "certify_contours",
    "q_laplace_finite_t",
    "q_laplace_closed_form_t0",
    "moment_qL",
    "q_pochhammer",
    "q_binomial",
]
