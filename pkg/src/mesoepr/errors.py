"""Exception hierarchy.

Validation errors (bad input, out-of-range parameters, malformed files) map to
CLI exit code 2; numeric failures map to exit code 3.
"""


class MesoEPRError(Exception):
    """Base class for all package errors."""


class ValidationError(MesoEPRError, ValueError):
    exit_code = 2


class NumericError(MesoEPRError, ArithmeticError):
    exit_code = 3


# distributions
class NoMatchingRecords(ValidationError):
    pass


class DegenerateRange(ValidationError):
    pass


class NegativeDelta(ValidationError):
    pass


# gaussian
class OutOfRangeTransmission(ValidationError):
    pass


class SingularMarginal(NumericError):
    pass


class NonPhysicalState(ValidationError):
    pass


# steering
class DeltaTooLarge(ValidationError):
    pass


class EpsilonOutOfRange(ValidationError):
    pass


class NonPositiveJx(ValidationError):
    pass


# fock
class CutoffTooSmall(ValidationError):
    pass


class SupportExceedsCutoff(ValidationError):
    pass


class DOutOfRange(ValidationError):
    pass


class TruncationUnsafe(UserWarning):
    """Emitted when a Fock vector has weight near the truncation boundary."""


# simulate
class RegimeViolation(ValidationError):
    pass


# cli / io
class SchemaError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InsufficientData(ValidationError):
    pass
