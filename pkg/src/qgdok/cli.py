"""Command-line interface mirroring the HTTP API's capabilities."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import load_config
from .engine import Engine
from .errors import QgdokError
from .promptkit import GenerationMode


def _engine(ctx: click.Context) -> Engine:
    cfg = load_config(ctx.obj.get("config_path"))
    if ctx.obj.get("data_dir"):
        cfg.data_dir = Path(ctx.obj["data_dir"])
    if ctx.obj.get("mock"):
        cfg.mock_mode = True
    return Engine(cfg)


def _fail(exc: QgdokError) -> None:
    click.echo(f"error [{exc.stage}/{exc.code}]: {exc}", err=True)
    sys.exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Path to a JSON config file.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Override the data directory.")
@click.option("--mock", is_flag=True, help="Run with deterministic offline providers.")
@click.pass_context
def main(ctx, config_path, data_dir, mock):
    """Math practice-question generator with DOK-leveled, retrieval-grounded output."""
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, data_dir=data_dir, mock=mock)


@main.command()
@click.argument("files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--kind", default="notes", help="Document kind for plain-text files.")
@click.pass_context
def ingest(ctx, files, kind):
    """Ingest text/Markdown files, or JSONL bundles of {title, body, kind}."""
    engine = _engine(ctx)
    total = 0
    try:
        for f in files:
            path = Path(f)
            if path.suffix == ".jsonl":
                total += len(engine.corpus.ingest_jsonl(path))
            else:
                engine.corpus.ingest_file(path, kind)
                total += 1
    except QgdokError as exc:
        _fail(exc)
    click.echo(f"ingested {total} document(s)")


@main.command()
@click.pass_context
def index(ctx):
    """Chunk and embed the corpus into the vector index."""
    try:
        n = _engine(ctx).build_index()
    except QgdokError as exc:
        _fail(exc)
    click.echo(f"indexed {n} chunk(s)")


@main.command()
@click.option("--concept", required=True)
@click.option("--level", type=click.IntRange(1, 4), required=True)
@click.option("--mode", type=click.Choice(["dok", "dok+rag"]), default="dok")
@click.option("--model", default=None)
@click.option("--count", type=click.IntRange(1, 50), default=5)
@click.pass_context
def generate(ctx, concept, level, mode, model, count):
    """Generate question-answer pairs for a concept at a DOK level."""
    gen_mode = GenerationMode.DOK_RAG if mode == "dok+rag" else GenerationMode.DOK_ONLY
    try:
        questions = _engine(ctx).generate(concept, level, gen_mode, model, count)
    except QgdokError as exc:
        _fail(exc)
    click.echo(f"request_id: {questions[0].request_id}")
    for q in questions:
        click.echo(f"\nQ ({q.question_id}): {q.question_text}")
        click.echo(f"A: {q.answer_text}")
        if q.provenance:
            click.echo(f"provenance: {', '.join(q.provenance)}")


@main.command("eval")
@click.option("--request", "request_id", required=True)
@click.option("--metrics", type=click.Choice(["pinc", "judge", "all"]), default="all")
@click.pass_context
def eval_cmd(ctx, request_id, metrics):
    """Score a finished generation run."""
    selected = ["pinc", "judge"] if metrics == "all" else [metrics]
    try:
        scores = _engine(ctx).evaluate_request(request_id, selected)
    except FileNotFoundError:
        click.echo(f"error [evaluation/unknown_request]: no run {request_id}", err=True)
        sys.exit(1)
    except QgdokError as exc:
        _fail(exc)
    click.echo(json.dumps(scores, indent=2))


@main.command()
@click.option("--format", "fmt", type=click.Choice(["csv", "md"]), default="md")
@click.pass_context
def report(ctx, fmt):
    """Emit the aggregated model x level x mode results table."""
    try:
        click.echo(_engine(ctx).report(fmt=fmt))
    except QgdokError as exc:
        _fail(exc)


@main.command()
@click.option("--port", type=int, default=None)
@click.option("--host", default=None)
@click.pass_context
def serve(ctx, port, host):
    """Start the HTTP API server."""
    import uvicorn

    from .api import create_app

    engine = _engine(ctx)
    app = create_app(engine)
    uvicorn.run(
        app,
        host=host or engine.config.bind_address,
        port=port or engine.config.port,
    )


if __name__ == "__main__":
    main()
