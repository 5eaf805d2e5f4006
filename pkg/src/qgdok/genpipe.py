"""Generation pipeline: request -> (retrieve) -> prompt -> LLM -> parsed questions.

Every run persists its full artifact chain (request snapshot, prompt, raw
model output, parsed questions) under one request_id so evaluation and the
console can audit provenance after the fact.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

from .corpus import DocumentChunk
from .errors import EmptyIndex, QgdokError, UnparseableOutput
from .promptkit import (
    DokLevel,
    GenerationMode,
    PromptBundle,
    build_generation_prompt,
)
from .providers import ChatProvider, EmbeddingProvider, ProviderConfig
from .retrieval import EmbeddingCache, VectorIndex, search_topk

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DEFAULT_COUNT = 5
DEFAULT_K_RETRIEVE = 4

# Global cap on in-flight provider calls across all concurrent requests.
_provider_budget = threading.BoundedSemaphore(4)


def set_provider_budget(n: int) -> None:
    global _provider_budget
    _provider_budget = threading.BoundedSemaphore(max(1, n))


class ParseQuality(str, Enum):
    STRUCTURED = "STRUCTURED"
    FALLBACK = "FALLBACK"
    PARTIAL = "PARTIAL"


@dataclass(frozen=True)
class GenerationRequest:
    concept: str
    level: DokLevel
    mode: GenerationMode
    provider: ProviderConfig
    count: int = DEFAULT_COUNT
    k_retrieve: int = DEFAULT_K_RETRIEVE

    def __post_init__(self):
        if not self.concept.strip():
            raise ValueError("concept must be non-empty")
        if self.count < 1:
            raise ValueError("count must be >= 1")


@dataclass(frozen=True)
class GeneratedQuestion:
    question_id: str
    request_id: str
    question_text: str
    answer_text: str
    level: DokLevel
    mode: GenerationMode
    provenance: tuple[str, ...]  # chunk_ids in retrieval rank order; empty in DOK_ONLY
    raw_model_output_ref: str
    created_at: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "request_id": self.request_id,
            "question": self.question_text,
            "answer": self.answer_text,
            "level": self.level.level,
            "mode": self.mode.value,
            "provenance": list(self.provenance),
            "raw_model_output_ref": self.raw_model_output_ref,
            "created_at": self.created_at,
        }


def complete(prompt: PromptBundle, provider: ChatProvider) -> str:
    """Call the chat provider under the global concurrency budget.

    Retry/backoff lives in the provider client; this layer only logs the
    exchange (API keys are env-referenced and never reach the log)."""
    if not prompt.user_text.strip():
        raise ValueError("prompt is empty")
    with _provider_budget:
        logger.debug("chat call via %s template=%s", provider.config.provider_id, prompt.template_id)
        return provider.complete(prompt.system_text, prompt.user_text)


_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)
# "1. question text ... Answer: answer text" blocks
_NUMBERED_RE = re.compile(
    r"^\s*\d+[.)]\s*(?P<q>.+?)\s*(?:\n\s*)?Answer\s*:\s*(?P<a>.+?)(?=\n\s*\d+[.)]|\Z)",
    re.DOTALL | re.MULTILINE | re.IGNORECASE,
)
# "Q: ... A: ..." blocks
_QA_RE = re.compile(
    r"Q\s*(?:\d+)?\s*:\s*(?P<q>.+?)\s*\nA\s*(?:\d+)?\s*:\s*(?P<a>.+?)(?=\nQ\s*(?:\d+)?\s*:|\Z)",
    re.DOTALL | re.IGNORECASE,
)


def parse_questions(raw: str, expected_count: int) -> tuple[list[tuple[str, str]], ParseQuality]:
    """Extract (question, answer) pairs from raw model output.

    Primary path: a JSON array of {"question","answer"} objects (optionally
    fenced). Fallback: numbered "... Answer: ..." or "Q:/A:" layouts. A
    count mismatch is only a warning; zero pairs is UnparseableOutput.
    """
    pairs = _parse_structured(raw)
    quality = ParseQuality.STRUCTURED
    if pairs is None:
        pairs = _parse_fallback(raw)
        quality = ParseQuality.FALLBACK
    if not pairs:
        raise UnparseableOutput("no question-answer pairs could be recovered from model output")
    if len(pairs) != expected_count:
        logger.warning("expected %d pairs, parsed %d", expected_count, len(pairs))
        quality = ParseQuality.PARTIAL
    return pairs, quality


def _parse_structured(raw: str) -> list[tuple[str, str]] | None:
    candidates = [raw.strip()]
    candidates.extend(m.strip() for m in _FENCE_RE.findall(raw))
    # also try the outermost bracketed slice, for arrays wrapped in prose
    lo, hi = raw.find("["), raw.rfind("]")
    if 0 <= lo < hi:
        candidates.append(raw[lo:hi + 1])
    for text in candidates:
        try:
            data = json.loads(text)
        except (json.JSONDecodeError, ValueError):
            continue
        if isinstance(data, dict):
            data = data.get("questions", data.get("items"))
        if not isinstance(data, list):
            continue
        pairs = []
        for item in data:
            if not isinstance(item, dict):
                break
            q = str(item.get("question", "")).strip()
            a = str(item.get("answer", "")).strip()
            if not q or not a:
                break
            pairs.append((q, a))
        else:
            if pairs:
                return pairs
    return None


def _parse_fallback(raw: str) -> list[tuple[str, str]]:
    for pattern in (_QA_RE, _NUMBERED_RE):
        pairs = [
            (m.group("q").strip(), m.group("a").strip())
            for m in pattern.finditer(raw)
        ]
        pairs = [(q, a) for q, a in pairs if q and a]
        if pairs:
            return pairs
    return []


class RunStore:
    """Append-only directory of per-request run records.

    Each run gets its own directory; the record file is written atomically
    (tmp + rename), so a crash mid-run leaves a readable store with the run
    in PENDING or FAILED, never a corrupt record.
    """

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir) / "runs"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def run_dir(self, request_id: str) -> Path:
        return self.root / request_id

    def open_run(self, request_id: str, request_snapshot: dict) -> None:
        d = self.run_dir(request_id)
        d.mkdir(parents=True, exist_ok=True)
        self._write_record(request_id, {
            "schema_version": SCHEMA_VERSION,
            "request_id": request_id,
            "request": request_snapshot,
            "status": "PENDING",
            "question_ids": [],
            "evaluation_ids": [],
        })

    def save_artifact(self, request_id: str, name: str, content: str) -> str:
        path = self.run_dir(request_id) / name
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_text(content, encoding="utf-8")
        tmp.replace(path)
        return str(path)

    def finish_run(self, request_id: str, question_ids: list[str]) -> None:
        rec = self.record(request_id)
        rec["status"] = "DONE"
        rec["question_ids"] = question_ids
        self._write_record(request_id, rec)

    def fail_run(self, request_id: str, stage: str, message: str) -> None:
        rec = self.record(request_id)
        rec["status"] = "FAILED"
        rec["failed_stage"] = stage
        rec["error"] = message
        self._write_record(request_id, rec)

    def add_evaluation(self, request_id: str, evaluation_id: str) -> None:
        with self._lock:
            rec = self.record(request_id)
            rec.setdefault("evaluation_ids", []).append(evaluation_id)
            self._write_record(request_id, rec)

    def record(self, request_id: str) -> dict:
        path = self.run_dir(request_id) / "record.json"
        return json.loads(path.read_text(encoding="utf-8"))

    def questions(self, request_id: str) -> list[dict]:
        path = self.run_dir(request_id) / "questions.json"
        if not path.exists():
            return []
        return json.loads(path.read_text(encoding="utf-8"))

    def list_runs(self) -> list[dict]:
        records = []
        for d in sorted(self.root.iterdir()):
            path = d / "record.json"
            if path.exists():
                try:
                    records.append(json.loads(path.read_text(encoding="utf-8")))
                except json.JSONDecodeError:
                    logger.warning("skipping unreadable run record %s", path)
        return records

    def _write_record(self, request_id: str, record: dict) -> None:
        path = self.run_dir(request_id) / "record.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(record, indent=2), encoding="utf-8")
        tmp.replace(path)


def generate_questions(
    req: GenerationRequest,
    index: VectorIndex | None,
    embedder: EmbeddingProvider | None,
    chat: ChatProvider,
    run_store: RunStore,
    chunk_lookup: Callable[[str], DocumentChunk | None],
    cache: EmbeddingCache | None = None,
    request_id: str | None = None,
) -> list[GeneratedQuestion]:
    """Run the full pipeline for one request and persist every artifact.

    Stage order is strict: retrieval failures abort before any chat call,
    chat failures abort before parsing. Errors are re-raised tagged with
    the failing stage and the run is marked FAILED.
    """
    request_id = request_id or uuid.uuid4().hex
    run_store.open_run(request_id, {
        "concept": req.concept,
        "level": req.level.level,
        "mode": req.mode.value,
        "model": req.provider.model_id,
        "count": req.count,
        "k_retrieve": req.k_retrieve,
    })
    try:
        retrieved: list[DocumentChunk] = []
        provenance: tuple[str, ...] = ()
        if req.mode == GenerationMode.DOK_RAG:
            if index is None or len(index) == 0:
                raise EmptyIndex("DOK_RAG generation requires a non-empty index")
            assert embedder is not None
            hits = _staged("retrieval", lambda: search_topk(
                req.concept, req.k_retrieve, index, embedder, cache))
            provenance = tuple(h.chunk_id for h in hits)
            retrieved = [c for c in (chunk_lookup(h.chunk_id) for h in hits) if c is not None]

        prompt = build_generation_prompt(
            req.concept, req.level, req.mode, retrieved, req.count)
        run_store.save_artifact(request_id, "prompt.json", json.dumps({
            "template_id": prompt.template_id,
            "template_version": prompt.template_version,
            "system_text": prompt.system_text,
            "user_text": prompt.user_text,
        }, indent=2))

        raw = _staged("provider", lambda: complete(prompt, chat))
        raw_ref = run_store.save_artifact(request_id, "raw_output.txt", raw)

        pairs, quality = _staged("parse", lambda: parse_questions(raw, req.count))
        now = _dt.datetime.now(_dt.timezone.utc).isoformat()
        questions = [
            GeneratedQuestion(
                question_id=f"{request_id}:{i:02d}",
                request_id=request_id,
                question_text=q,
                answer_text=a,
                level=req.level,
                mode=req.mode,
                provenance=provenance if req.mode == GenerationMode.DOK_RAG else (),
                raw_model_output_ref=raw_ref,
                created_at=now,
            )
            for i, (q, a) in enumerate(pairs)
        ]
        run_store.save_artifact(request_id, "questions.json", json.dumps(
            [dict(g.to_dict(), parse_quality=quality.value) for g in questions], indent=2))
        run_store.finish_run(request_id, [g.question_id for g in questions])
        return questions
    except QgdokError as exc:
        run_store.fail_run(request_id, exc.stage, str(exc))
        raise
    except Exception as exc:
        run_store.fail_run(request_id, "internal", str(exc))
        raise


def _staged(stage: str, fn):
    try:
        return fn()
    except QgdokError as exc:
        exc.stage = stage
        raise
