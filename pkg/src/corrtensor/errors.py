"""Exception hierarchy shared across the package."""


class CorrTensorError(Exception):
    """Base class for all package errors."""


class DimensionError(CorrTensorError, ValueError):
    """Operand shapes are incompatible or an index/rank is out of range."""


class SymmetryError(CorrTensorError, ValueError):
    """A matrix required to be symmetric is not."""


class DomainError(CorrTensorError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(CorrTensorError, ArithmeticError):
    """An iterative routine exhausted its iteration budget."""


class FormatError(CorrTensorError, ValueError):
    """A file or byte stream does not conform to the expected format."""


class ConvergenceWarning(UserWarning):
    """A fitter stopped at ``max_iters`` before meeting its tolerance."""
