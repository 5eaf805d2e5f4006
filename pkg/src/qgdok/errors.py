"""Exception hierarchy shared across the engine.

Every error carries enough context to be rendered as a structured
{stage, code, message} payload by the HTTP layer.
"""

from __future__ import annotations


class QgdokError(Exception):
    """Base class; `code` is a stable machine-readable identifier."""

    code = "internal_error"
    stage = "unknown"

    def __init__(self, message: str, *, stage: str | None = None):
        super().__init__(message)
        if stage is not None:
            self.stage = stage

    def to_payload(self) -> dict:
        return {"stage": self.stage, "code": self.code, "message": str(self)}


# corpus

class EmptyDocument(QgdokError):
    code = "empty_document"
    stage = "corpus"


# retrieval / embedding

class ProviderUnavailable(QgdokError):
    code = "provider_unavailable"
    stage = "provider"

    def __init__(self, message: str, *, attempts: list[str] | None = None, stage: str | None = None):
        super().__init__(message, stage=stage)
        self.attempts = attempts or []


class TimeoutExceeded(QgdokError):
    code = "timeout"
    stage = "provider"


class ContentBlocked(QgdokError):
    code = "content_blocked"
    stage = "provider"


class DimensionMismatch(QgdokError):
    code = "dimension_mismatch"
    stage = "retrieval"


class ZeroVector(QgdokError):
    code = "zero_vector"
    stage = "retrieval"


class EmptyIndex(QgdokError):
    code = "empty_index"
    stage = "retrieval"


class ProviderFingerprintMixed(QgdokError):
    code = "provider_fingerprint_mixed"
    stage = "retrieval"


class SchemaVersionMismatch(QgdokError):
    code = "schema_version_mismatch"
    stage = "persistence"


class CorruptIndex(QgdokError):
    code = "corrupt_index"
    stage = "persistence"


# promptkit

class ModeContextMismatch(QgdokError):
    code = "mode_context_mismatch"
    stage = "prompt"


class MissingMaterial(QgdokError):
    code = "missing_material"
    stage = "prompt"

    def __init__(self, label: str):
        super().__init__(f"scenario is missing required material: {label}")
        self.label = label


class MissingContext(QgdokError):
    code = "missing_context"
    stage = "prompt"


# genpipe

class UnparseableOutput(QgdokError):
    code = "unparseable_output"
    stage = "parse"


# evalkit

class EmptyCandidate(QgdokError):
    code = "empty_candidate"
    stage = "evaluation"


class MalformedJudgeOutput(QgdokError):
    code = "malformed_judge_output"
    stage = "evaluation"


class MissingCell(QgdokError):
    code = "missing_cell"
    stage = "evaluation"

    def __init__(self, missing: list[str]):
        super().__init__("missing evaluation cells: " + "; ".join(missing))
        self.missing = missing
