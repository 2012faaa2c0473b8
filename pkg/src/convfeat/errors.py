"""Exception types shared across the package."""


class PreconditionError(ValueError):
    """An input violates a documented precondition (shape, size, kernel product)."""


class DimensionMismatch(PreconditionError):
    """Array dimensions do not agree with what a network or partition expects."""


class BreakdownError(ArithmeticError):
    """A computation that is exact in real arithmetic lost too much precision."""


class SeparationError(ValueError):
    """Affine pieces are not separated enough for the selector to be trusted."""


class FormatError(ValueError):
    """An input document does not follow the expected JSON schema."""
