"""Exception hierarchy shared across the package."""


class NfuqError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(NfuqError):
    """Invalid configuration: bad constructor arguments, config files, specs."""


class MeshFormatError(ConfigError):
    """Unreadable mesh file. Carries the offending 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(NfuqError):
    """Well-formed inputs that violate a runtime contract (shape/range/state)."""


class NumericalError(NfuqError):
    """A solver or estimator failed to produce a usable result."""


class StiffnessError(NumericalError):
    """Adaptive step size collapsed below the sanity floor."""


class PicardConvergenceError(NumericalError):
    """Fixed-point sweep hit max_iter before the tolerance was met.

    The partial iteration trace is attached so the failure can be diagnosed
    against the factorial convergence envelope.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class MonteCarloError(NumericalError):
    """Too many per-sample failures for the run to report meaningful statistics."""
