"""Spatially-adaptive sensing for nonparametric regression."""
from sensing.errors import (
    ConfigError,
    EstimationUnavailableError,
    InconsistentDesignError,
    InvalidInputError,
    ScheduleInfeasibleError,
    SensingError,
    UndefinedResolutionError,
)

__all__ = [
    "ConfigError",
    "EstimationUnavailableError",
    "InconsistentDesignError",
    "InvalidInputError",
    "ScheduleInfeasibleError",
    "SensingError",
    "UndefinedResolutionError",
]
