"""Exception types shared across the package."""


class InvalidInput(ValueError):
    """Malformed or dimensionally inconsistent input."""


class NotPSD(RuntimeError):
    """Raised when an operation requires a positive semidefinite input.

    ``witness`` carries the numeric evidence: either a vector v with
    v' S v < 0, or a certificate object with an (x, y) pair at which the
    form is strictly negative.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CannotReduce(RuntimeError):
    """Rank reduction is impossible (the Gram family has no free directions)."""


class NoPSDPointFound(RuntimeError):
    """The heuristic search found no PSD point in the Gram family."""


class NumericalError(ArithmeticError):
    """A computed decomposition failed its own residual invariants."""
