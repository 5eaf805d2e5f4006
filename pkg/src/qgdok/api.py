"""HTTP API over the engine, consumed by the web console."""

from __future__ import annotations

import os
import uuid
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field, field_validator

from .corpus import DOC_KINDS
from .engine import Engine
from .errors import QgdokError
from .promptkit import DOK_LEVELS, GenerationMode

API_SCHEMA_VERSION = "1"


class DocumentIn(BaseModel):
    title: str = Field(min_length=1)
    body: str = Field(min_length=1)
    kind: str = "notes"

    @field_validator("kind")
    @classmethod
    def _known_kind(cls, v):
        if v not in DOC_KINDS:
            raise ValueError(f"kind must be one of {DOC_KINDS}")
        return v


class GenerateIn(BaseModel):
    concept: str = Field(min_length=1)
    level: int = Field(ge=1, le=4)
    mode: str = Field(pattern="^(dok|dok\\+rag|DOK_ONLY|DOK_RAG)$")
    model: str | None = None
    count: int = Field(default=5, ge=1, le=50)


class EvaluateIn(BaseModel):
    request_id: str
    metrics: list[str] = Field(default_factory=lambda: ["pinc", "judge"])


def parse_mode(mode: str) -> GenerationMode:
    return GenerationMode.DOK_RAG if mode in ("dok+rag", "DOK_RAG") else GenerationMode.DOK_ONLY


def create_app(engine: Engine) -> FastAPI:
    app = FastAPI(title="qgdok", version="0.1.0")

    @app.middleware("http")
    async def add_headers(request: Request, call_next):
        response = await call_next(request)
        response.headers["X-Schema-Version"] = API_SCHEMA_VERSION
        response.headers.setdefault("X-Request-Id", uuid.uuid4().hex)
        return response

    @app.exception_handler(QgdokError)
    async def engine_error(request: Request, exc: QgdokError):
        status = 404 if exc.code in ("empty_index", "missing_cell") else 500
        if exc.code in ("empty_document", "mode_context_mismatch", "missing_context",
                        "missing_material"):
            status = 422
        return JSONResponse(status_code=status, content=exc.to_payload())

    @app.get("/api/health")
    def health():
        return {"status": "ok", "mock_mode": engine.config.mock_mode}

    @app.get("/api/levels")
    def levels():
        return {"levels": [
            {"level": lv.level, "name": lv.name, "definition": lv.definition}
            for lv in DOK_LEVELS.values()
        ]}

    @app.post("/api/corpus/documents")
    def add_document(doc: DocumentIn):
        record = engine.corpus.ingest_document(doc.title, doc.body, doc.kind)
        return {"doc_id": record.doc_id}

    @app.post("/api/index/build")
    def build_index():
        return {"chunks_indexed": engine.build_index()}

    @app.post("/api/generate")
    def generate(body: GenerateIn):
        questions = engine.generate(
            concept=body.concept,
            level=body.level,
            mode=parse_mode(body.mode),
            model=body.model,
            count=body.count,
        )
        request_id = questions[0].request_id if questions else None
        return {
            "request_id": request_id,
            "questions": [
                {
                    "question_id": q.question_id,
                    "question": q.question_text,
                    "answer": q.answer_text,
                    "provenance": list(q.provenance),
                }
                for q in questions
            ],
        }

    @app.post("/api/evaluate")
    def evaluate(body: EvaluateIn):
        metrics = body.metrics
        if "all" in metrics:
            metrics = ["pinc", "judge"]
        try:
            engine.runs.record(body.request_id)
        except FileNotFoundError:
            return JSONResponse(status_code=404, content={
                "stage": "evaluation", "code": "unknown_request",
                "message": f"no run with request_id {body.request_id}",
            })
        scores = engine.evaluate_request(body.request_id, metrics)
        return {"request_id": body.request_id, "scores": scores}

    @app.get("/api/report")
    def report(format: str = "md"):
        text = engine.report(fmt=format)
        media = "text/csv" if format == "csv" else "text/markdown"
        return PlainTextResponse(text, media_type=media)

    # optionally serve the built web console from the same origin
    console_dir = os.environ.get("QGDOK_CONSOLE_DIR")
    if console_dir and Path(console_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=console_dir, html=True), name="console")

    return app
