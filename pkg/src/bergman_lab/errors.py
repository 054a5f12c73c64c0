"""Exception hierarchy shared by all modules."""


class BergmanLabError(Exception):
    """Base class for errors raised by the package."""


class ParameterError(BergmanLabError, ValueError):
    """A parameter lies outside its documented range."""


class PreconditionError(BergmanLabError, ValueError):
    """An operation was called on inputs violating its precondition."""


class NumericGuardError(BergmanLabError, ArithmeticError):
    """Overflow, non-finite values or an infeasible truncation were detected."""


class ResourceError(BergmanLabError, MemoryError):
    """A configured resource cap (node count, cost) would be exceeded."""


class UnsupportedVariantError(BergmanLabError, TypeError):
    """The operation is not defined for this kind of weight or measure."""


class SingularWeightError(PreconditionError):
    """A weight vanishes where a negative power of it is required."""


class ConsistencyError(BergmanLabError, ArithmeticError):
    """A computed quantity violates an identity that must hold exactly."""
