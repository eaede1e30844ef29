"""Exception hierarchy for the archive-lens toolkit."""

from typing import List, Optional


class ArchiveLensError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(ArchiveLensError, ValueError):
    """Raised when arguments or ingested data violate a documented precondition."""


class ConfigurationError(ArchiveLensError, ValueError):
    """Raised for invalid configuration, e.g. a detector without a threshold."""


class SolverError(ArchiveLensError, RuntimeError):
    """Raised when the transportation solver fails to reach an optimal basis."""

    def __init__(self, message: str, iterations: int):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class IngestError(InvalidInputError):
    """Raised in strict mode when an input file carries row-level errors."""

    def __init__(self, message: str, row_errors: Optional[List["object"]] = None):
        super().__init__(message)
        self.row_errors = list(row_errors or [])
