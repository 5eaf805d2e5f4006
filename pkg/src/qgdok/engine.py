"""Engine facade: one object owning the stores, providers, and index that
the CLI and HTTP API both drive."""

from __future__ import annotations

import json
import logging
import threading
from pathlib import Path

from .config import AppConfig
from .corpus import CorpusStore, DocumentChunk
from .errors import EmptyIndex, QgdokError
from .evalkit import (
    EvaluationStore,
    PincConfig,
    build_results_table,
    judge,
    pinc_score,
    pinc_source_text,
    render_csv,
    render_markdown,
)
from .genpipe import (
    GeneratedQuestion,
    GenerationRequest,
    RunStore,
    generate_questions,
)
from .promptkit import DokLevel, GenerationMode, JudgeCriterion, dok_level
from .providers import (
    ChatProvider,
    EmbeddingProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    MockChatProvider,
    MockEmbeddingProvider,
    ProviderConfig,
)
from .retrieval import EmbeddingCache, VectorIndex, index_chunks

logger = logging.getLogger(__name__)

INDEX_FILENAME = "index.qgdok"


class Engine:
    def __init__(self, config: AppConfig):
        self.config = config
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self.corpus = CorpusStore(config.data_dir)
        self.runs = RunStore(config.data_dir)
        self.evaluations = EvaluationStore(config.data_dir)
        self.cache = EmbeddingCache()
        self._index: VectorIndex | None = None
        self._index_lock = threading.Lock()
        self._load_index_if_present()

    # ---- providers ----

    def embedder(self) -> EmbeddingProvider:
        if self.config.mock_mode:
            return MockEmbeddingProvider()
        cfg = self.config.provider_for("embedder")
        return HttpEmbeddingProvider(cfg, dim=self.config.embed_dim)

    def chat(self, role: str = "generator", model_override: str | None = None) -> ChatProvider:
        if self.config.mock_mode:
            cfg = ProviderConfig(provider_id="mock", model_id=model_override or f"mock-{role}")
            return MockChatProvider(cfg)
        cfg = self.config.provider_for(role)
        if model_override:
            cfg = ProviderConfig(
                provider_id=cfg.provider_id, model_id=model_override,
                endpoint=cfg.endpoint, api_key_ref=cfg.api_key_ref,
                temperature=cfg.temperature, max_output_tokens=cfg.max_output_tokens,
                timeout=cfg.timeout, retry=cfg.retry,
            )
        return HttpChatProvider(cfg)

    # ---- index lifecycle ----

    @property
    def index_path(self) -> Path:
        return self.config.data_dir / INDEX_FILENAME

    def _load_index_if_present(self) -> None:
        if self.index_path.exists():
            try:
                self._index = VectorIndex.load(self.index_path)
            except QgdokError as exc:
                logger.warning("could not load existing index: %s", exc)

    @property
    def index(self) -> VectorIndex | None:
        return self._index

    def build_index(self) -> int:
        """(Re)chunk the corpus, embed every chunk, atomically publish."""
        chunks = self.corpus.rebuild_chunks(self.config.chunking)
        if not chunks:
            raise EmptyIndex("corpus is empty; ingest documents before indexing")
        embedder = self.embedder()
        with self._index_lock:
            new_index = index_chunks(
                chunks, embedder, cache=self.cache, checkpoint_path=self.index_path)
            self._index = new_index
        return len(new_index)

    # ---- generation ----

    def generate(self, concept: str, level: int, mode: GenerationMode,
                 model: str | None = None, count: int = 5,
                 k_retrieve: int | None = None) -> list[GeneratedQuestion]:
        chat = self.chat("generator", model_override=model)
        req = GenerationRequest(
            concept=concept,
            level=dok_level(level),
            mode=mode,
            provider=chat.config,
            count=count,
            k_retrieve=k_retrieve or self.config.k_retrieve,
        )
        embedder = self.embedder() if mode == GenerationMode.DOK_RAG else None
        chunks_by_id = {c.chunk_id: c for c in self.corpus.chunks()}
        return generate_questions(
            req, self._index, embedder, chat, self.runs,
            chunk_lookup=chunks_by_id.get, cache=self.cache,
        )

    # ---- evaluation ----

    def evaluate_request(self, request_id: str,
                         metrics: list[str] | None = None) -> dict:
        """Score every question of a finished run with PINC and/or the judge."""
        metrics = metrics or ["pinc", "judge"]
        record = self.runs.record(request_id)
        concept = record["request"]["concept"]
        model_id = record["request"]["model"]
        chunks_by_id = {c.chunk_id: c for c in self.corpus.chunks()}
        judge_provider = self.chat("judge") if "judge" in metrics else None

        results: dict[str, dict] = {}
        for qrec in self.runs.questions(request_id):
            question = _question_from_record(qrec)
            retrieved_texts = [
                chunks_by_id[cid].text for cid in question.provenance
                if cid in chunks_by_id
            ]
            scores: dict[str, float] = {}
            if "pinc" in metrics:
                source = pinc_source_text(question, retrieved_texts, concept)
                value = pinc_score(source, question.question_text, PincConfig())
                self.evaluations.record_pinc(question, model_id, value)
                scores["PINC"] = value
            if judge_provider is not None:
                context = concept
                if retrieved_texts:
                    context = concept + "\n\n" + "\n\n".join(retrieved_texts)
                for criterion in JudgeCriterion:
                    score = judge(question, criterion, judge_provider, context=context)
                    eid = self.evaluations.record_judge(question, model_id, score)
                    self.runs.add_evaluation(request_id, eid)
                    scores[criterion.value] = score.normalized
            results[question.question_id] = scores
        return results

    # ---- reporting ----

    def report(self, fmt: str = "md", models: list[str] | None = None,
               modes: list[GenerationMode] | None = None) -> str:
        records = self.evaluations.records()
        if models is None:
            models = sorted({r["model_id"] for r in records if "model_id" in r})
        if not models:
            raise QgdokError("no evaluations recorded yet", stage="report")
        modes = modes or _modes_present(records)
        table = build_results_table(records, models, modes)
        if fmt == "csv":
            return render_csv(table)
        return render_markdown(table)


def _modes_present(records: list[dict]) -> list[GenerationMode]:
    present = {r.get("mode") for r in records}
    return [m for m in (GenerationMode.DOK_ONLY, GenerationMode.DOK_RAG)
            if m.value in present] or [GenerationMode.DOK_ONLY, GenerationMode.DOK_RAG]


def _question_from_record(rec: dict) -> GeneratedQuestion:
    return GeneratedQuestion(
        question_id=rec["question_id"],
        request_id=rec["request_id"],
        question_text=rec["question"],
        answer_text=rec["answer"],
        level=dok_level(rec["level"]),
        mode=GenerationMode(rec["mode"]),
        provenance=tuple(rec.get("provenance", [])),
        raw_model_output_ref=rec.get("raw_model_output_ref", ""),
        created_at=rec.get("created_at", ""),
    )
