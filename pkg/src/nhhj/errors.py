"""Exception hierarchy shared by every module of the package."""


class NHHJError(Exception):
    """Base class for all package errors."""


class ConfigError(NHHJError, ValueError):
    """Invalid model parameters or run configuration."""


class NumericalFailure(NHHJError, ArithmeticError):
    """A field evaluation produced a non-finite value."""


class DivergenceError(NumericalFailure):
    """Integration produced a non-finite state.

    ``last_valid`` is the index of the last finite sample.
    """

    def __init__(self, message, last_valid=None):
        super().__init__(message)
        self.last_valid = last_valid


class MetricError(NumericalFailure):
    """Mass metric not symmetric positive-definite at an evaluated point."""


class SingularCompatibility(NumericalFailure):
    """Constraint compatibility matrix is (numerically) singular."""


class FrameError(NHHJError):
    """A horizontal frame does not have full rank or leaves the distribution."""


class InvarianceViolation(NHHJError):
    """The lagrangian is not invariant along the horizontal lifts."""


class NotProjectable(NHHJError):
    """A vector field's base components depend on the fiber coordinates."""
