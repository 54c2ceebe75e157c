"""Exception hierarchy shared by all optomech modules."""


class OptomechError(Exception):
    """Base class for every error raised by this package."""


class DomainError(OptomechError, ValueError):
    """An argument lies outside the domain of a physical formula."""


class ConfigurationError(OptomechError, ValueError):
    """A parameter set violates one or more invariants.

    ``failures`` lists every failed check, not only the first one.
    """

    def __init__(self, failures):
        if isinstance(failures, str):
            failures = [failures]
        self.failures = list(failures)
        super().__init__("invalid configuration: " + "; ".join(self.failures))


class RegimeError(OptomechError, ValueError):
    """An operation was called for a pump regime it does not support."""


class NumericalError(OptomechError, ArithmeticError):
    """A numerical procedure failed (singular system, non-finite result)."""


class FitError(OptomechError, RuntimeError):
    """A least-squares fit did not converge."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual norm {residual:.6g})"
        super().__init__(message)


class CalibrationError(OptomechError, RuntimeError):
    """A calibration stage could not produce a result."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class DataFormatError(OptomechError, ValueError):
    """An input file is missing or cannot be parsed; ``path`` names it."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")
