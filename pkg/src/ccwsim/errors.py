"""Exception hierarchy.

Every error carries the name of the subsystem that raised it so the command
line can report where a failure originated.
"""


class CCWError(Exception):
    """Base class for all package errors."""

    module = "ccwsim"
    exit_code = 1


class ConfigurationError(CCWError, ValueError):
    """Invalid scenario, treatment model, intervention or run configuration."""

    module = "scenario_catalog"
    exit_code = 3


class CohortFormatError(CCWError, ValueError):
    """A person-period file violates the documented schema."""

    module = "io_cli"
    exit_code = 4

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DegenerateStratumError(CCWError):
    """No natural initiators to borrow exposure history from in a stratum."""

    module = "cohort_sim"
    exit_code = 5


class PositivityError(CCWError):
    """A stratum has zero probability of remaining uncensored."""

    module = "ccw_engine"
    exit_code = 5


class EstimationError(CCWError):
    """The weighted risk set vanished while events could still occur."""

    module = "ccw_engine"
    exit_code = 5
