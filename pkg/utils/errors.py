"""
Exception hierarchy for the Schwinger fractal-ansatz toolkit.

The command line maps these onto exit codes (see cli.commands.EXIT_CODES).
"""
from typing import Iterable, Optional


class SchwingerError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(SchwingerError, ValueError):
    """A precondition on the inputs of an operation was violated."""


class NumericalError(SchwingerError):
    """A numerical procedure failed to deliver a trustworthy result."""


class ConvergenceError(NumericalError):
    """Iterative eigensolver exhausted its budget."""

    def __init__(self, message: str, best_residual: float, n_iterations: int):
        super().__init__(f"{message} (best residual {best_residual:.3e} after {n_iterations} matvecs)")
        self.best_residual = best_residual
        self.n_iterations = n_iterations


class DegenerateGroundStateError(NumericalError):
    """Ground state flagged as degenerate; real weights are not well defined."""


class ZeroNormError(NumericalError):
    """An assembled vector or distribution has no weight left to normalize."""


class MissingCacheEntryError(SchwingerError):
    """One or more cached ground states are required but absent."""

    def __init__(self, missing: Iterable[str], message: Optional[str] = None):
        self.missing = list(missing)
        text = message or "Missing cache entries"
        super().__init__(f"{text}: " + ", ".join(self.missing))


class CacheIntegrityError(SchwingerError):
    """A cache entry failed its norm, length or hash verification."""
