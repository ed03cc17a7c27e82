"""Shared exception types for the engine."""


class CoauthorError(Exception):
    """Base class for all engine errors."""


class ValidationError(CoauthorError):
    """Input violates an operation precondition."""


class NotFoundError(CoauthorError):
    """A referenced entity does not exist."""


class ConflictError(CoauthorError):
    """Operation conflicts with existing state (duplicate title, busy chapter)."""


class IntegrityError(CoauthorError):
    """Stored or returned data is inconsistent (corrupt file, dimension mismatch)."""


class TransportError(CoauthorError):
    """Provider unreachable or still failing after the retry budget."""


class ContentError(CoauthorError):
    """Provider refused the request or returned unusable content."""


class ConversionError(CoauthorError):
    """External document converter exited with an error."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class EmptyDocumentError(ValidationError):
    """A document has no sentences to work with."""


class UndefinedRateError(CoauthorError):
    """Correction rate denominator is zero, the printed formula is undefined."""


class BatchError(CoauthorError):
    """Every item in a batch operation failed."""
