"""Exception hierarchy.

Everything a caller can trigger with bad input derives from
:class:`FeverScreenError`; the CLI maps those to exit code 2.
"""


class FeverScreenError(ValueError):
    """Base class for user/input errors."""


class DomainError(FeverScreenError):
    pass


class StepSizeError(FeverScreenError):
    pass


class EmptySeriesError(FeverScreenError):
    pass


class SpecError(FeverScreenError):
    pass


class InsufficientDataError(FeverScreenError):
    """Too few readings for the requested window / history."""


class SplitError(FeverScreenError):
    pass


class ParseError(FeverScreenError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(FeverScreenError):
    pass


class DimensionError(FeverScreenError):
    pass


class ModelFormatError(FeverScreenError):
    pass


class UnsupportedVersionError(ModelFormatError):
    pass


class EmptyCandidatesError(FeverScreenError):
    pass


class UndefinedRateError(FeverScreenError):
    pass


class UndefinedCorrelationError(FeverScreenError):
    pass


class IdentifierError(FeverScreenError):
    pass


class ConfigError(FeverScreenError):
    pass


class CompatibilityError(FeverScreenError):
    pass


class TrainingError(FeverScreenError):
    pass


class InvariantError(RuntimeError):
    """Internal consistency check failed (CLI exit code 1)."""
