"""Exception types raised across the package."""


class DimensionMismatch(ValueError):
    pass


class InvalidPermutation(ValueError):
    pass


class MatrixMarketError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    """Raised when a factorization meets a zero (or numerically zero) pivot.

    ``index`` is the offending row, or the cell index for block factorizations.
    """

    def __init__(self, message, index=None, stage=None):
        super().__init__(message)
        self.index = index
        self.stage = stage


class InvalidPlanError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual
