"""Exception hierarchy shared by every module."""


class FragilityError(Exception):
    """Base class for all errors raised by fragility_lab."""


class DimensionError(FragilityError, ValueError):
    """Shapes do not chain or a dimension is zero."""


class DomainError(FragilityError, ValueError):
    """An argument lies outside the domain of the operation."""


class SingularMatrixError(FragilityError, ValueError):
    """A matrix is (numerically) rank deficient.

    ``column`` is the zero-based column at which elimination broke down.
    """

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class DegenerateError(FragilityError, ValueError):
    """A direction needed by the computation has (near) zero norm."""


class VanishingGradientError(DegenerateError):
    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


class DivergenceError(FragilityError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class UnsupportedModelError(FragilityError, TypeError):
    """The operation requires a model property the given model lacks."""
