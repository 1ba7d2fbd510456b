"""Exception hierarchy for the small area estimation toolkit.

Every error carries the process exit code the CLI should return:
- ValidationError (2): the input data or files are unusable
- NumericalError (3): the data are valid but a computation broke down
"""
from typing import Any


class SaeError(Exception):
    """Base class for all toolkit errors."""
    exit_code: int = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> dict[str, Any]:
        return {
            "error": self.code,
            "message": self.message,
            "exit_code": self.exit_code,
            **self.details,
        }


# ============== Validation Errors ==============

class ValidationError(SaeError):
    """Input data violate a structural or statistical invariant."""
    exit_code = 2


class DimensionMismatch(ValidationError):
    pass


class NonPSDCovariance(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class TooFewAreas(ValidationError):
    pass


class SchemaError(ValidationError):
    """Malformed CSV, JSON or grid file."""
    pass


class EmptyArea(ValidationError):
    pass


class SingletonArea(ValidationError):
    pass


class NonPositiveMean(ValidationError):
    pass


class InsufficientDegreesOfFreedom(ValidationError):
    pass


# ============== Numerical Errors ==============

class NumericalError(SaeError):
    """A computation failed on otherwise valid input."""
    exit_code = 3


class SingularMomentMatrix(NumericalError):
    pass


class NonPositiveTotalVariance(NumericalError):
    pass


class JackknifeDegenerate(NumericalError):
    pass


class SimulationUnstable(NumericalError):
    pass
