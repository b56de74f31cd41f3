"""Exception types. Each maps to a distinct CLI exit code."""


class LambdaSRError(Exception):
    exit_code = 1


class ConfigError(LambdaSRError, ValueError):
    exit_code = 2


class CapacityError(LambdaSRError):
    exit_code = 3


class IntegrationError(LambdaSRError, RuntimeError):
    """Raised when the ODE solver cannot continue.

    ``t_last`` and ``y_last`` hold the last successfully reached time and state.
    """

    exit_code = 4

    def __init__(self, message, t_last=None, y_last=None):
        super().__init__(message)
        self.t_last = t_last
        self.y_last = y_last


class ComparisonFailure(LambdaSRError):
    exit_code = 5


class InvariantViolation(LambdaSRError):
    """A density matrix left its physical slack; points at a Liouvillian bug."""

    exit_code = 4
