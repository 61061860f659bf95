"""Exception hierarchy shared by all modules."""


class GaussCMLError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GaussCMLError, ValueError):
    """A parameter or input failed validation."""


class NumericalError(GaussCMLError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy result."""


class BracketInvalid(ValidationError):
    pass


class ToleranceNotReached(NumericalError):
    pass


class LengthMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class InvalidK(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class NonPositiveValue(NumericalError, ValueError):
    pass


class WindowTooSmall(NumericalError, ValueError):
    pass


class InsufficientOverlap(NumericalError, ValueError):
    pass


class TangentCollapse(NumericalError):
    pass
