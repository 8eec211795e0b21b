"""OR-varying functions and interpolation parameters."""
from .dsl import DslError, parse, parse_psi, render
from .functions import (
    Const,
    DomainError,
    Interpolated,
    Log1p,
    LogLog2,
    LogLogP,
    LogP,
    LogStar,
    OrFunction,
    Power,
    Product,
    PsiParameter,
    Quotient,
    Rescale,
    Tabulated,
    TabulatedDataError,
    evaluate,
)
from .indices import (
    STANDARD_GRID,
    BoundaryWarning,
    GridSpec,
    IndexEstimate,
    interpolation_membership,
    matuszewska_indices,
    verify_or_membership,
)
from .interp import (
    HypothesisViolation,
    PiecewiseLinear,
    compose_parameterized,
    dilation_function,
    least_concave_majorant,
    make_interpolation_parameter,
    pseudoconcavity_constant,
)

__all__ = [
    "BoundaryWarning", "Const", "DomainError", "DslError", "GridSpec", "HypothesisViolation",
    "IndexEstimate", "Interpolated", "Log1p", "LogLog2", "LogLogP", "LogP", "LogStar",
    "OrFunction", "PiecewiseLinear", "Power", "Product", "PsiParameter", "Quotient", "Rescale",
    "STANDARD_GRID", "Tabulated", "TabulatedDataError", "compose_parameterized",
    "dilation_function", "evaluate", "interpolation_membership", "least_concave_majorant",
    "make_interpolation_parameter", "matuszewska_indices", "parse", "parse_psi",
    "pseudoconcavity_constant", "render", "verify_or_membership",
]
