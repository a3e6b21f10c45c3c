"""Exception hierarchy shared across the package.

Every error carries a short machine-readable ``code`` and an optional
``field`` path so callers (CLI, HTTP service) can render a uniform
error envelope.
"""

from __future__ import annotations


class RiskscopeError(Exception):
    code = "error"

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.message = message
        self.field = field

    def envelope(self) -> dict:
        return {"code": self.code, "message": self.message, "field": self.field}


class SchemaError(RiskscopeError):
    """Invalid feature schema or schema document."""

    code = "schema"


class DataError(RiskscopeError):
    """A record or cohort file violates its schema."""

    code = "data"


class TrainingError(RiskscopeError):
    """Dataset unfit for training (degenerate labels, empty, unlabeled)."""

    code = "training"


class PredictionError(RiskscopeError):
    """Record/model schema mismatch at inference time."""

    code = "prediction"


class ExplainError(RiskscopeError):
    """Explanation request cannot be served (bad outcome, guard exceeded)."""

    code = "explain"


class CounterfactualError(RiskscopeError):
    """Counterfactual precondition or constraint violation."""

    code = "counterfactual"


class ArtifactError(RiskscopeError):
    """Model artifact unreadable: bad version, checksum, or structure."""

    code = "artifact"
