"""Document ingestion and sliding-window chunking.

Documents are segmented into fixed-size overlapping token windows; chunk
text is cut from the raw body using character offsets recorded at tokenize
time, so normalization never loses information.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import EmptyDocument
from .tokenizer import tokenize_with_spans

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

DOC_KINDS = ("textbook", "tutorial", "practice_problems", "notes", "syllabus")

DEFAULT_WINDOW_TOKENS = 256
DEFAULT_STRIDE_TOKENS = 192


@dataclass(frozen=True)
class SourceDocument:
    doc_id: str
    title: str
    body: str
    kind: str
    ingested_at: str

    def __post_init__(self):
        if not self.body.strip():
            raise EmptyDocument(f"document {self.title!r} has an empty body")
        if self.kind not in DOC_KINDS:
            raise ValueError(f"unknown document kind {self.kind!r}; expected one of {DOC_KINDS}")


@dataclass(frozen=True)
class DocumentChunk:
    chunk_id: str
    doc_id: str
    token_start: int
    token_end: int
    text: str
    ordinal: int

    def __post_init__(self):
        if not self.token_start < self.token_end:
            raise ValueError("token_start must be < token_end")


@dataclass(frozen=True)
class ChunkingConfig:
    window_tokens: int = DEFAULT_WINDOW_TOKENS
    stride_tokens: int = DEFAULT_STRIDE_TOKENS

    def __post_init__(self):
        if self.window_tokens <= 0:
            raise ValueError("window_tokens must be > 0")
        if not (0 < self.stride_tokens <= self.window_tokens):
            raise ValueError("stride_tokens must satisfy 0 < stride <= window")

    @property
    def overlap(self) -> int:
        return self.window_tokens - self.stride_tokens


def chunk_spans(n_tokens: int, cfg: ChunkingConfig) -> list[tuple[int, int]]:
    """Token-index windows [i*S, min(i*S + W, n)) until the first window
    that reaches the end of the document."""
    if n_tokens <= 0:
        raise EmptyDocument("cannot chunk a document with zero tokens")
    spans = []
    start = 0
    while True:
        end = min(start + cfg.window_tokens, n_tokens)
        spans.append((start, end))
        if end == n_tokens:
            break
        start += cfg.stride_tokens
    return spans


def chunk_document(doc: SourceDocument, cfg: ChunkingConfig) -> list[DocumentChunk]:
    """Split `doc` into overlapping chunks of at most `cfg.window_tokens` tokens."""
    token_spans = tokenize_with_spans(doc.body)
    if not token_spans:
        raise EmptyDocument(f"document {doc.doc_id} tokenizes to zero tokens")
    chunks = []
    for ordinal, (t0, t1) in enumerate(chunk_spans(len(token_spans), cfg)):
        char_start = token_spans[t0].start
        char_end = token_spans[t1 - 1].end
        chunks.append(
            DocumentChunk(
                chunk_id=f"{doc.doc_id}:{ordinal:04d}",
                doc_id=doc.doc_id,
                token_start=t0,
                token_end=t1,
                text=doc.body[char_start:char_end],
                ordinal=ordinal,
            )
        )
    return chunks


class CorpusStore:
    """JSONL-backed document and chunk store.

    Single writer, any number of readers; records are immutable once
    appended. Each line carries schema_version for forward compatibility.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.documents_path = self.data_dir / "documents.jsonl"
        self.chunks_path = self.data_dir / "chunks.jsonl"

    def ingest_document(self, title: str, body: str, kind: str) -> SourceDocument:
        if not body.strip():
            raise EmptyDocument(f"refusing to ingest {title!r}: body is empty")
        if any(d.title == title for d in self.documents()):
            logger.warning("a document titled %r already exists; ingesting anyway", title)
        doc = SourceDocument(
            doc_id=uuid.uuid4().hex,
            title=title,
            body=body,
            kind=kind,
            ingested_at=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        )
        self._append(self.documents_path, {
            "schema_version": SCHEMA_VERSION,
            "doc_id": doc.doc_id,
            "title": doc.title,
            "body": doc.body,
            "kind": doc.kind,
            "ingested_at": doc.ingested_at,
        })
        return doc

    def ingest_jsonl(self, path: str | Path) -> list[SourceDocument]:
        """Bulk ingest: one {"title","body","kind"} object per line."""
        docs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                docs.append(self.ingest_document(rec["title"], rec["body"], rec.get("kind", "notes")))
        return docs

    def ingest_file(self, path: str | Path, kind: str = "notes") -> SourceDocument:
        path = Path(path)
        return self.ingest_document(path.stem, path.read_text(encoding="utf-8"), kind)

    def documents(self) -> Iterator[SourceDocument]:
        if not self.documents_path.exists():
            return
        with open(self.documents_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                yield SourceDocument(
                    doc_id=rec["doc_id"],
                    title=rec["title"],
                    body=rec["body"],
                    kind=rec["kind"],
                    ingested_at=rec["ingested_at"],
                )

    def rebuild_chunks(self, cfg: ChunkingConfig) -> list[DocumentChunk]:
        """Chunk every stored document and overwrite the chunk store."""
        chunks: list[DocumentChunk] = []
        for doc in self.documents():
            chunks.extend(chunk_document(doc, cfg))
        tmp = self.chunks_path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for c in chunks:
                fh.write(json.dumps({
                    "schema_version": SCHEMA_VERSION,
                    "chunk_id": c.chunk_id,
                    "doc_id": c.doc_id,
                    "token_start": c.token_start,
                    "token_end": c.token_end,
                    "text": c.text,
                    "ordinal": c.ordinal,
                }) + "\n")
        tmp.replace(self.chunks_path)
        return chunks

    def chunks(self) -> list[DocumentChunk]:
        if not self.chunks_path.exists():
            return []
        out = []
        with open(self.chunks_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                out.append(DocumentChunk(
                    chunk_id=rec["chunk_id"],
                    doc_id=rec["doc_id"],
                    token_start=rec["token_start"],
                    token_end=rec["token_end"],
                    text=rec["text"],
                    ordinal=rec["ordinal"],
                ))
        return out

    def chunk_by_id(self, chunk_id: str) -> DocumentChunk | None:
        for c in self.chunks():
            if c.chunk_id == chunk_id:
                return c
        return None

    @staticmethod
    def _append(path: Path, record: dict) -> None:
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()
