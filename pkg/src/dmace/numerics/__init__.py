from dmace.numerics.adam import AdamState, adam_step
from dmace.numerics.linalg import (
    EigResult,
    adjoint,
    as_complex,
    cmatmul,
    complex_soft_threshold,
    lambda_max,
)
from dmace.numerics.tape import Tape, Var

__all__ = [
    "AdamState",
    "EigResult",
    "Tape",
    "Var",
    "adam_step",
    "adjoint",
    "as_complex",
    "cmatmul",
    "complex_soft_threshold",
    "lambda_max",
]
