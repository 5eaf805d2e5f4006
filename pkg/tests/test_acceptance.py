"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Everything runs offline against the deterministic mock providers.
"""

import json
import os
import random
import signal
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from qgdok.config import AppConfig
from qgdok.corpus import ChunkingConfig, chunk_spans
from qgdok.engine import Engine
from qgdok.evalkit import (
    PincConfig,
    aggregate_mean_std,
    format_mean_std,
    pinc_score,
)
from qgdok.promptkit import (
    DOK_LEVELS,
    GenerationMode,
    build_generation_prompt,
    dok_level,
)
from qgdok.retrieval import VectorIndex
from qgdok.tokenizer import tokenize

from test_evalkit import brute_force_pinc
from test_promptkit import FIXTURE_CHUNKS
from test_service import FIXTURE_DOCS


def ok(criterion: str):
    print(f"\nACCEPTANCE {criterion}: PASS")


def test_criterion_1_pinc_oracle():
    start = time.monotonic()
    assert pinc_score("a b c d", "a b x y", PincConfig(2)) == pytest.approx(
        0.5833333333333333, abs=1e-9)
    rng = random.Random(12345)
    vocab_a = [f"w{i}" for i in range(30)]
    vocab_b = [f"v{i}" for i in range(30)]
    for _ in range(1000):
        source = " ".join(rng.choices(vocab_a, k=rng.randint(1, 20)))
        candidate = " ".join(rng.choices(vocab_a, k=rng.randint(1, 20)))
        score = pinc_score(source, candidate, PincConfig(4))
        assert 0.0 <= score <= 1.0
        assert score == pytest.approx(
            brute_force_pinc(source, candidate, 4), abs=1e-12)
        assert pinc_score(candidate, candidate, PincConfig(4)) == 0.0
        disjoint = " ".join(rng.choices(vocab_b, k=rng.randint(1, 20)))
        assert pinc_score(source, disjoint, PincConfig(4)) == 1.0
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"PINC suite took {elapsed:.1f}s"
    ok("1 (PINC oracle)")


def test_criterion_2_aggregation_reproduces_published_cells():
    cells = [
        ([1, 1, 1, 0, 0], "0.60 ± 0.55"),
        ([1, 1, 1, 1, 0], "0.80 ± 0.45"),
        ([1, 1, 1, 1, 1], "1.00 ± 0.00"),
    ]
    for values, expected in cells:
        mean, std = aggregate_mean_std(values)
        assert format_mean_std(mean, std, precision=2) == expected
    ok("2 (mean ± std cells)")


def test_criterion_3_retrieval_oracle():
    start = time.monotonic()
    rng = random.Random(777)
    for trial in range(50):
        dim = rng.randint(8, 512)
        n = rng.randint(12, 2000)
        nprng = np.random.default_rng(trial)
        index = VectorIndex(dim=dim, provider_id="p", model_id="m")
        ids = [f"c{i:05d}" for i in range(n)]
        matrix = nprng.normal(size=(n, dim))
        for cid, row in zip(ids, matrix):
            index.upsert(cid, row)
        query = nprng.normal(size=dim)
        # independent oracle: per-row cosine, python sort with the tie-break
        norms = [np.linalg.norm(row) for row in matrix]
        qn = np.linalg.norm(query)
        scored = sorted(
            ((cid, float(row.dot(query) / (nv * qn)))
             for cid, row, nv in zip(ids, matrix, norms)),
            key=lambda t: (-t[1], t[0]))
        for k in (1, 5, 10):
            hits = index.search(query, k)
            assert [h.chunk_id for h in hits] == [cid for cid, _ in scored[:k]]
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"retrieval oracle took {elapsed:.1f}s"
    ok("3 (retrieval oracle)")


def test_criterion_4_chunking_properties():
    start = time.monotonic()
    assert chunk_spans(10, ChunkingConfig(4, 3)) == [(0, 4), (3, 7), (6, 10)]
    rng = random.Random(2026)
    for _ in range(1000):
        t = rng.randint(1, 5000)
        w = rng.randint(1, 600)
        s = rng.randint(1, w)
        spans = chunk_spans(t, ChunkingConfig(w, s))
        covered = set()
        for a, b in spans:
            assert b - a <= w
            covered.update(range(a, b))
        assert covered == set(range(t))
        for (a1, b1), (a2, _) in zip(spans, spans[1:]):
            assert b1 - a2 == w - s
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"chunking suite took {elapsed:.1f}s"
    ok("4 (chunking properties)")


def test_criterion_5_end_to_end_mock_mode(tmp_path):
    start = time.monotonic()
    engine = Engine(AppConfig(data_dir=tmp_path / "data", mock_mode=True,
                              chunking=ChunkingConfig(32, 24), k_retrieve=3))
    for title, body, kind in FIXTURE_DOCS:
        engine.corpus.ingest_document(title, body, kind)
    n_chunks = engine.build_index()
    assert n_chunks >= 3
    indexed_ids = set(engine.index.chunk_ids())

    all_questions = []
    for level in (1, 2, 3, 4):
        for mode in (GenerationMode.DOK_ONLY, GenerationMode.DOK_RAG):
            questions = engine.generate("limits of functions", level, mode, count=5)
            assert len(questions) == 5
            for q in questions:
                if mode == GenerationMode.DOK_RAG:
                    assert q.provenance
                    assert set(q.provenance) <= indexed_ids
                else:
                    assert q.provenance == ()
            engine.evaluate_request(questions[0].request_id, ["pinc", "judge"])
            all_questions.extend(questions)
    assert len(all_questions) == 40

    md = engine.report(fmt="md")
    lines = md.splitlines()
    model_rows = [l for l in lines if l.startswith("| mock-generator |")]
    assert len(model_rows) == 5  # levels 1-4 + Average
    assert any("| Average |" in l for l in model_rows)
    header = lines[0]
    for col in ("Relevance (DOK)", "Relevance (DOK+RAG)", "DOK alignment (DOK)",
                "DOK alignment (DOK+RAG)", "Appropriateness (DOK)",
                "Appropriateness (DOK+RAG)", "PINC"):
        assert col in header
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"end-to-end took {elapsed:.1f}s"
    ok("5 (end-to-end mock mode)")


def test_criterion_6_prompt_golden_files():
    golden_dir = Path(__file__).parent / "golden"
    renders = {}
    for level in (1, 2, 3, 4):
        bundle = build_generation_prompt(
            "derivatives", dok_level(level), GenerationMode.DOK_ONLY, [], 5)
        renders[f"generate_level{level}_dok_only.txt"] = bundle.user_text
        for other, lv in DOK_LEVELS.items():
            if other == level:
                assert lv.definition in bundle.user_text
            else:
                assert lv.definition not in bundle.user_text
    bundle = build_generation_prompt(
        "derivatives", dok_level(1), GenerationMode.DOK_RAG, FIXTURE_CHUNKS, 5)
    renders["generate_level1_dok_rag.txt"] = bundle.user_text
    for name, text in renders.items():
        assert text == (golden_dir / name).read_text(encoding="utf-8"), name
    ok("6 (prompt golden files)")


def test_criterion_7_persistence(tmp_path):
    # index round-trip preserves every query's results
    nprng = np.random.default_rng(42)
    index = VectorIndex(dim=64, provider_id="p", model_id="m")
    for i in range(100):
        index.upsert(f"c{i:04d}", nprng.normal(size=64))
    path = tmp_path / "idx.qgdok"
    index.save(path)
    loaded = VectorIndex.load(path)
    for _ in range(10):
        q = nprng.normal(size=64)
        assert ([(h.chunk_id, h.score) for h in index.search(q, 7)]
                == [(h.chunk_id, h.score) for h in loaded.search(q, 7)])

    # kill -9 mid-run leaves the run store readable, status PENDING/FAILED
    data_dir = tmp_path / "killdata"
    script = f"""
import os, sys, time
sys.path.insert(0, {json.dumps(str(Path(__file__).resolve().parents[1] / "src"))})
from qgdok.genpipe import RunStore
store = RunStore({json.dumps(str(data_dir))})
store.open_run("killed-run", {{"concept": "limits", "level": 1,
                               "mode": "DOK_ONLY", "model": "mock", "count": 5,
                               "k_retrieve": 3}})
print("PENDING_WRITTEN", flush=True)
time.sleep(30)
"""
    proc = subprocess.Popen([sys.executable, "-c", script],
                            stdout=subprocess.PIPE, text=True)
    assert proc.stdout.readline().strip() == "PENDING_WRITTEN"
    os.kill(proc.pid, signal.SIGKILL)
    proc.wait()

    from qgdok.genpipe import RunStore
    store = RunStore(data_dir)
    runs = store.list_runs()
    assert len(runs) == 1
    assert runs[0]["status"] in ("PENDING", "FAILED")
    ok("7 (persistence and crash safety)")
