"""Exception hierarchy.

Every exception carries an ``exit_code`` used by the command-line front end:

====  ==========================================
code  meaning
====  ==========================================
0     success
2     I/O (missing file, unparsable file)
3     validation (bad shapes, bounds, configs)
4     numeric failure
5     shot noise dominates (DenominatorTooSmall)
====  ==========================================
"""

from __future__ import annotations


class EigenpowerError(Exception):
    exit_code = 4


# -- I/O ---------------------------------------------------------------------


class InputError(EigenpowerError):
    exit_code = 2


class MatrixFileNotFound(InputError):
    pass


class ParseError(InputError):
    pass


# -- validation --------------------------------------------------------------


class ValidationError(EigenpowerError):
    exit_code = 3


class NotSquare(ValidationError):
    pass


class NotHermitian(ValidationError):
    def __init__(self, max_asymmetry: float, tol: float):
        super().__init__(f"matrix is not Hermitian: max asymmetry {max_asymmetry:.3e} > tol {tol:.3e}")
        self.max_asymmetry = max_asymmetry
        self.tol = tol


class DimensionMismatch(ValidationError):
    pass


class NotUnitary(ValidationError):
    pass


class OverlappingRegisters(ValidationError):
    pass


class LayoutMismatch(ValidationError):
    pass


class TooManyQubits(ValidationError):
    pass


class CapacityExceeded(TooManyQubits):
    pass


class OutOfBound(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class FlagsAlreadySet(ValidationError):
    pass


# -- numeric -----------------------------------------------------------------


class NumericError(EigenpowerError):
    exit_code = 4


class ConvergenceFailure(NumericError):
    pass


class SingularMatrix(NumericError):
    pass


class ExhaustedRedraws(NumericError):
    pass


class ZeroVector(NumericError):
    pass


class IllConditionedKrylov(NumericError):
    pass


class DenominatorTooSmall(NumericError):
    exit_code = 5


# -- warnings ----------------------------------------------------------------


class DegenerateSpectrumWarning(UserWarning):
    """Largest-magnitude eigenvalue is (numerically) degenerate."""
