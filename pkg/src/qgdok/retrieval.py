"""Vector index: exact cosine top-k over embedded chunks.

The index is a full-scan exact kNN structure (course-scale corpora), with
bit-exact binary persistence: magic bytes, schema version, provider
fingerprint, float64 vectors, trailing SHA-256 checksum.
"""

from __future__ import annotations

import hashlib
import io
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import DocumentChunk
from .errors import (
    CorruptIndex,
    DimensionMismatch,
    EmptyIndex,
    ProviderFingerprintMixed,
    QgdokError,
    SchemaVersionMismatch,
    ZeroVector,
)
from .providers import EmbeddingProvider

MAGIC = b"QGDOKIDX"
SCHEMA_VERSION = 1

DEFAULT_EMBED_PARALLELISM = 4


@dataclass(frozen=True)
class RetrievalHit:
    chunk_id: str
    score: float
    rank: int  # 1-based, contiguous


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    """dot(a,b) / (|a||b|); raises on dimension mismatch or zero vectors."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DimensionMismatch(f"vector dims differ: {va.shape[0]} vs {vb.shape[0]}")
    na = np.linalg.norm(va)
    nb = np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity is undefined for a zero vector")
    return float(va.dot(vb) / (na * nb))


class EmbeddingCache:
    """In-memory embedding cache keyed by (model_id, SHA-256 of text)."""

    def __init__(self):
        self._entries: dict[tuple[str, str], list[float]] = {}

    @staticmethod
    def key(model_id: str, text: str) -> tuple[str, str]:
        return (model_id, hashlib.sha256(text.encode("utf-8")).hexdigest())

    def get(self, model_id: str, text: str) -> list[float] | None:
        return self._entries.get(self.key(model_id, text))

    def put(self, model_id: str, text: str, values: list[float]) -> None:
        self._entries[self.key(model_id, text)] = values


def embed_text(text: str, provider: EmbeddingProvider,
               cache: EmbeddingCache | None = None) -> list[float]:
    """Embed `text`, hitting the cache before any provider call."""
    if not text.strip():
        raise ValueError("cannot embed empty text")
    model_id = provider.config.model_id
    if cache is not None:
        hit = cache.get(model_id, text)
        if hit is not None:
            return hit
    values = provider.embed(text)
    if len(values) != provider.dim:
        raise DimensionMismatch(
            f"provider declared dim {provider.dim} but returned {len(values)}"
        )
    if cache is not None:
        cache.put(model_id, text, values)
    return values


class VectorIndex:
    """chunk_id -> embedding map with a uniform provider fingerprint."""

    def __init__(self, dim: int, provider_id: str, model_id: str):
        self.dim = dim
        self.provider_id = provider_id
        self.model_id = model_id
        self._ids: list[str] = []
        self._id_pos: dict[str, int] = {}
        self._matrix = np.empty((0, dim), dtype=np.float64)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def fingerprint(self) -> tuple[str, str]:
        return (self.provider_id, self.model_id)

    def chunk_ids(self) -> list[str]:
        return list(self._ids)

    def vector(self, chunk_id: str) -> np.ndarray:
        return self._matrix[self._id_pos[chunk_id]].copy()

    def upsert(self, chunk_id: str, values: Sequence[float]) -> None:
        vec = np.asarray(values, dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(
                f"vector for {chunk_id} has dim {vec.shape[0]}, index requires {self.dim}"
            )
        if chunk_id in self._id_pos:
            self._matrix[self._id_pos[chunk_id]] = vec
        else:
            self._id_pos[chunk_id] = len(self._ids)
            self._ids.append(chunk_id)
            self._matrix = np.vstack([self._matrix, vec[None, :]])

    def search(self, query_vec: Sequence[float], k: int) -> list[RetrievalHit]:
        """Exact top-k by cosine: full scan, (score desc, chunk_id asc) order."""
        if k < 1:
            raise ValueError("k must be >= 1")
        if len(self._ids) == 0:
            raise EmptyIndex("cannot search an empty index")
        q = np.asarray(query_vec, dtype=np.float64)
        if q.shape != (self.dim,):
            raise DimensionMismatch(f"query dim {q.shape[0]} != index dim {self.dim}")
        qn = np.linalg.norm(q)
        if qn == 0.0:
            raise ZeroVector("query embeds to a zero vector")
        norms = np.linalg.norm(self._matrix, axis=1)
        norms[norms == 0.0] = 1.0  # zero stored vectors score 0 against everything
        scores = self._matrix.dot(q) / (norms * qn)
        order = sorted(range(len(self._ids)), key=lambda i: (-scores[i], self._ids[i]))
        return [
            RetrievalHit(chunk_id=self._ids[i], score=float(scores[i]), rank=r + 1)
            for r, i in enumerate(order[:k])
        ]

    # ---- persistence ----

    def save(self, path: str | Path) -> None:
        buf = io.BytesIO()
        buf.write(MAGIC)
        buf.write(struct.pack("<I", SCHEMA_VERSION))
        for s in (self.provider_id, self.model_id):
            raw = s.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
        buf.write(struct.pack("<II", self.dim, len(self._ids)))
        for cid in self._ids:
            raw = cid.encode("utf-8")
            buf.write(struct.pack("<I", len(raw)))
            buf.write(raw)
            buf.write(self._matrix[self._id_pos[cid]].astype("<f8").tobytes())
        payload = buf.getvalue()
        digest = hashlib.sha256(payload).digest()
        tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
        tmp.write_bytes(payload + digest)
        tmp.replace(path)  # atomic publication: readers see old or new, never partial

    @classmethod
    def load(cls, path: str | Path) -> "VectorIndex":
        data = Path(path).read_bytes()
        if len(data) < len(MAGIC) + 4 + 32:
            raise CorruptIndex(f"{path}: file too short to be an index")
        payload, digest = data[:-32], data[-32:]
        if not payload.startswith(MAGIC):
            raise CorruptIndex(f"{path}: bad magic bytes")
        if hashlib.sha256(payload).digest() != digest:
            raise CorruptIndex(f"{path}: checksum mismatch")
        off = len(MAGIC)
        (version,) = struct.unpack_from("<I", payload, off)
        off += 4
        if version != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"{path}: index schema_version {version}, this reader supports {SCHEMA_VERSION}"
            )
        strings = []
        for _ in range(2):
            (n,) = struct.unpack_from("<I", payload, off)
            off += 4
            strings.append(payload[off:off + n].decode("utf-8"))
            off += n
        dim, count = struct.unpack_from("<II", payload, off)
        off += 8
        index = cls(dim=dim, provider_id=strings[0], model_id=strings[1])
        for _ in range(count):
            (n,) = struct.unpack_from("<I", payload, off)
            off += 4
            cid = payload[off:off + n].decode("utf-8")
            off += n
            vec = np.frombuffer(payload, dtype="<f8", count=dim, offset=off).copy()
            off += dim * 8
            index.upsert(cid, vec)
        return index


def index_chunks(
    chunks: Iterable[DocumentChunk],
    provider: EmbeddingProvider,
    existing: VectorIndex | None = None,
    cache: EmbeddingCache | None = None,
    parallelism: int = DEFAULT_EMBED_PARALLELISM,
    checkpoint_path: str | Path | None = None,
) -> VectorIndex:
    """Embed chunks into a VectorIndex; idempotent per chunk_id.

    Partial progress is checkpointed to `checkpoint_path` every few chunks
    so an interrupted build can resume (already-present chunk_ids are
    replaced, not duplicated). Embedding errors carry the failing chunk_id.
    """
    chunks = list(chunks)
    if not chunks:
        raise ValueError("no chunks to index")
    index = existing or VectorIndex(
        dim=provider.dim,
        provider_id=provider.config.provider_id,
        model_id=provider.config.model_id,
    )
    if index.fingerprint != provider.config.fingerprint:
        raise ProviderFingerprintMixed(
            f"index fingerprint {index.fingerprint} != provider {provider.config.fingerprint}"
        )

    def embed_one(chunk: DocumentChunk) -> tuple[str, list[float]]:
        try:
            return chunk.chunk_id, embed_text(chunk.text, provider, cache)
        except QgdokError as exc:
            raise type(exc)(f"while embedding chunk {chunk.chunk_id}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        done = 0
        for chunk_id, values in pool.map(embed_one, chunks):
            index.upsert(chunk_id, values)
            done += 1
            if checkpoint_path is not None and done % 64 == 0:
                index.save(checkpoint_path)
    if checkpoint_path is not None:
        index.save(checkpoint_path)
    return index


def search_topk(
    query: str,
    k: int,
    index: VectorIndex,
    provider: EmbeddingProvider,
    cache: EmbeddingCache | None = None,
) -> list[RetrievalHit]:
    """Embed `query` and return the top-k hits from `index`."""
    if provider.config.fingerprint != index.fingerprint:
        raise ProviderFingerprintMixed(
            f"query provider {provider.config.fingerprint} does not match "
            f"index fingerprint {index.fingerprint}"
        )
    return index.search(embed_text(query, provider, cache), k)
