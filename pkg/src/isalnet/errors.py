"""Exception hierarchy.

The CLI maps these onto exit codes: configuration problems exit with 2,
infeasible or non-identifiable problems with 3, numeric failures with 4.
"""


class IsalError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(IsalError):
    """A value violates a domain invariant (bad position, power, budget...)."""


class ConfigError(ValidationError):
    """A scenario config file is malformed; the message names the field path."""


class GeometryError(IsalError):
    """Degenerate geometry, e.g. coincident nodes on a link."""


class ModeError(IsalError):
    """Operation requires the other synchronization mode."""


class InfeasibleError(IsalError):
    """No feasible power allocation exists for the stated constraints."""


class NonIdentifiableError(IsalError):
    """A parameter group carries no information; names the offending parameters."""

    def __init__(self, message, parameters=()):
        super().__init__(message)
        self.parameters = tuple(parameters)


class NumericError(IsalError):
    """Internal numeric failure (overflow, factorization breakdown...)."""
