"""Exception types raised across the package."""


class VaporQEDError(Exception):
    """Base class for all package errors."""


class CapacityError(VaporQEDError, ValueError):
    pass


class BasisMismatchError(VaporQEDError, ValueError):
    pass


class SingularDetuningError(VaporQEDError, ValueError):
    """An elimination formula would divide by a vanishing detuning."""


class DegenerateCouplingError(VaporQEDError, ValueError):
    pass


class NotHermitianError(VaporQEDError, ValueError):
    pass


class FrameMismatchError(VaporQEDError, ValueError):
    pass


class ConvergenceError(VaporQEDError, RuntimeError):
    pass


class ConfigError(VaporQEDError, ValueError):
    """Invalid run configuration. ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


class DetuningWarning(UserWarning):
    """Detunings outside the regime assumed by the effective Hamiltonians."""
