"""Exception types shared across the package."""


class InvariantError(ValueError):
    """An input violates a structural invariant (non-Hermitian, non-unitary, ...)."""


class DomainError(ValueError):
    """A function was evaluated outside its domain."""


class SchemeInvalidError(ValueError):
    """A scheme produced probabilities that no valid POVM can produce."""


class NumericError(RuntimeError):
    """A numerical procedure failed; ``diagnostics`` holds what was observed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class PrecisionError(NumericError):
    """A truncation or discretisation is too coarse for the requested accuracy."""
