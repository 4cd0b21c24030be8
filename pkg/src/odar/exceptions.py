"""Exception hierarchy shared by all odar modules."""


class OdarError(Exception):
    """Base class for every error raised by odar."""


class DataError(OdarError):
    """Input data could not be read or is inconsistent."""


class ParseError(DataError):
    """A field in an input file is not a finite real number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StructuralError(DataError):
    """Input has the wrong shape (empty file, ragged rows, length mismatch)."""


class ValidationError(DataError):
    """A value is outside its permitted domain (e.g. a label not in {0, 1})."""


class ParameterError(OdarError, ValueError):
    """An algorithm parameter violates its precondition."""


class GenerationError(OdarError):
    """Synthetic data could not be generated for the requested spec."""


class EvaluationError(OdarError, ValueError):
    """Scoring is undefined for the given ground truth."""
