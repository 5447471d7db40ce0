"""Exception types shared across the solver modules."""


class PMEError(Exception):
    """Base class for solver and harness errors."""


class NonConvergence(PMEError):
    """A nonlinear solve exhausted its iteration budget."""

    def __init__(self, message, *, step=None, m=None, residual=None):
        super().__init__(message)
        self.step = step
        self.m = m
        self.residual = residual


class LambdaOutOfRange(PMEError, ValueError):
    """The resolvent parameter is outside (0, lambda_0)."""


class CutoffRangeError(PMEError, ValueError):
    """A cutoff width was requested outside (0, half the shortest extent)."""


class HorizonTooLong(PMEError, ValueError):
    """The time horizon reaches a barrier blow-up time."""


class BarrierUnavailable(PMEError, ValueError):
    """No constructive barrier exists for the requested reaction."""


class RegimePreconditionViolated(PMEError, ValueError):
    """Data lie outside the transport regime 0 <= f <= div V, 0 <= u0 <= 1."""


class CFLViolated(PMEError, ValueError):
    """An explicit step exceeds the CFL limit."""


class ConfigError(PMEError, ValueError):
    """Invalid run configuration."""


class NonCauchyWarning(UserWarning):
    """Self-convergence trace did not decrease over the last halvings."""
