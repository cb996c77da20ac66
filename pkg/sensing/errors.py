"""Exceptions raised by the sensing library."""


class SensingError(Exception):
    """Base class for all library errors."""


class InvalidInputError(SensingError, ValueError):
    """An argument violates an operation's precondition."""


class InconsistentDesignError(SensingError):
    """Observations do not cover the design points an estimate needs."""


class UndefinedResolutionError(SensingError):
    """i_n(j,k) is undefined; the caller must zero the coefficient."""


class EstimationUnavailableError(SensingError):
    """No coefficients are available to estimate the noise level from."""


class ScheduleInfeasibleError(SensingError):
    """A stage budget cannot hold the mandatory grid points."""


class ConfigError(SensingError, ValueError):
    """Bad command-line or configuration-file value."""


class DesignInvariantError(SensingError):
    """A sensing stage broke the halving or budget invariants of the design."""
