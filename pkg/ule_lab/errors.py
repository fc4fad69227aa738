"""
Exception hierarchy for the ULE laboratory.

Every error carries the exit code the command-line surface reports for it.
"""


class LabError(Exception):
    """Base class for all laboratory errors."""

    exit_code = 1


class InvalidInputError(LabError, ValueError):
    """Invalid user input (chains, schedules, configuration)."""

    exit_code = 2


class InvalidChainError(InvalidInputError):
    """A frequency chain or group element violates its invariants."""


class ChainMismatchError(InvalidInputError):
    """A group element and a series disagree on the period chain."""


class ScheduleError(InvalidInputError):
    """A schedule is not admissible (not monotone, or sums above t)."""


class GeneratorConstructionError(InvalidInputError):
    """A distal generator cannot be built from the supplied chain."""


class ConfigError(InvalidInputError):
    """A run configuration violates its invariants."""


class InconclusiveError(LabError):
    """A computation ended without a verdict."""

    exit_code = 3


class InconclusiveAtDepthError(InconclusiveError):
    """Finite truncations neither confirm nor refute the predicate."""

    def __init__(self, message: str, depth: int):
        super().__init__(message)
        self.depth = depth


class ConvergenceError(InconclusiveError):
    """An iteration did not meet its tolerance within the allowed steps."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float('nan')):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class CenterCollisionError(InconclusiveError):
    """Two eigenvectors share a localization center in the window interior."""

    def __init__(self, message: str, sites=()):
        super().__init__(message)
        self.sites = tuple(sites)


class FitRefusedError(InconclusiveError):
    """Too few points above the floor for a decay fit."""


class InternalLabError(LabError):
    """A numerical invariant failed; indicates a bug or solver failure."""

    exit_code = 1


class EigenSolverError(InternalLabError):
    """The tridiagonal eigensolver failed or violated its invariants."""

    def __init__(self, message: str, index: int = -1):
        super().__init__(message)
        self.index = index


class CertificationError(InternalLabError):
    """An a-posteriori certificate scan found a violated bound."""
