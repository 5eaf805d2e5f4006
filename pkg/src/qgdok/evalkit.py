"""Scoring and aggregation: PINC lexical diversity, LLM-judge criteria,
manual rubrics, and the model x level x mode results table."""

from __future__ import annotations

import json
import re
import statistics
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import EmptyCandidate, MalformedJudgeOutput, MissingCell
from .genpipe import GeneratedQuestion, complete
from .promptkit import (
    DokLevel,
    GenerationMode,
    JudgeCriterion,
    build_judge_prompt,
)
from .providers import ChatProvider
from .tokenizer import tokenize

SCHEMA_VERSION = 1

DEFAULT_PINC_MAX_N = 4

AVERAGE_ROW = "AVERAGE"

METRIC_PINC = "PINC"
JUDGE_METRICS = (
    JudgeCriterion.RELEVANCE.value,
    JudgeCriterion.DOK_ALIGNMENT.value,
    JudgeCriterion.APPROPRIATENESS.value,
)


@dataclass(frozen=True)
class PincConfig:
    max_n: int = DEFAULT_PINC_MAX_N

    def __post_init__(self):
        if self.max_n < 1:
            raise ValueError("max_n must be >= 1")


def ngram_set(tokens: Sequence[str], n: int) -> set[tuple[str, ...]]:
    """All contiguous n-token subsequences; empty when the text is shorter than n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def pinc_score(source: str, candidate: str, cfg: PincConfig = PincConfig()) -> float:
    """Fraction of candidate n-grams absent from the source, averaged over
    n = 1..max_n (only the n for which the candidate has n-grams count)."""
    cand_tokens = tokenize(candidate)
    if not cand_tokens:
        raise EmptyCandidate("candidate tokenizes to zero tokens")
    src_tokens = tokenize(source)
    terms = []
    for n in range(1, cfg.max_n + 1):
        cand_grams = ngram_set(cand_tokens, n)
        if not cand_grams:
            break  # longer n only get emptier
        src_grams = ngram_set(src_tokens, n)
        terms.append(1.0 - len(cand_grams & src_grams) / len(cand_grams))
    return sum(terms) / len(terms)


@dataclass(frozen=True)
class JudgeScore:
    criterion: JudgeCriterion
    raw: int  # 1..5
    normalized: float  # (raw - 1) / 4
    judge_model: str
    rationale_ref: str


_SCORE_RE = re.compile(r"^\s*Score\s*:\s*([1-5])\s*$", re.MULTILINE)


def parse_judge_score(raw_output: str) -> int:
    """Extract the final "Score: N" line; N must be an integer in 1..5."""
    matches = _SCORE_RE.findall(raw_output)
    if not matches:
        raise MalformedJudgeOutput("judge output has no parseable 'Score: N' line")
    return int(matches[-1])


def judge(
    question: GeneratedQuestion,
    criterion: JudgeCriterion,
    judge_provider: ChatProvider,
    context: str | None = None,
    samples: int = 1,
) -> JudgeScore:
    """Score one question on one criterion via the judge model.

    With samples > 1 the raw score is the rounded mean of repeated calls
    (the judge prompt itself is deterministic; variation comes from the
    provider's sampling)."""
    prompt = build_judge_prompt(
        question.question_text, question.answer_text, criterion,
        level=question.level, context=context,
    )
    raws = []
    rationale = ""
    for _ in range(max(1, samples)):
        rationale = complete(prompt, judge_provider)
        raws.append(parse_judge_score(rationale))
    raw = int(round(sum(raws) / len(raws)))
    return JudgeScore(
        criterion=criterion,
        raw=raw,
        normalized=(raw - 1) / 4,
        judge_model=judge_provider.config.model_id,
        rationale_ref=rationale,
    )


@dataclass(frozen=True)
class ManualRubric:
    relevance: int  # 0/1, within lesson scope
    depth: int
    taxonomy: str  # "bloom" (0-6) or "dok" (1-4)
    correctness: int  # 0/1
    rater_id: str

    def __post_init__(self):
        if self.relevance not in (0, 1):
            raise ValueError("relevance must be 0 or 1")
        if self.correctness not in (0, 1):
            raise ValueError("correctness must be 0 or 1")
        if self.taxonomy == "bloom":
            if not 0 <= self.depth <= 6:
                raise ValueError("Bloom depth must be in 0-6")
        elif self.taxonomy == "dok":
            if not 1 <= self.depth <= 4:
                raise ValueError("DOK depth must be in 1-4")
        else:
            raise ValueError(f"unknown taxonomy {self.taxonomy!r}")


def aggregate_mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample (n-1) standard deviation; std is 0 for n=1."""
    if not values:
        raise ValueError("cannot aggregate an empty sequence")
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def format_mean_std(mean: float, std: float, precision: int = 2) -> str:
    return f"{mean:.{precision}f} ± {std:.{precision}f}"


class EvaluationStore:
    """Append-only JSONL store, one record per score."""

    def __init__(self, data_dir: str | Path):
        self.path = Path(data_dir) / "evaluations.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _append(self, record: dict) -> str:
        record = dict(record)
        record.setdefault("schema_version", SCHEMA_VERSION)
        record.setdefault("evaluation_id", uuid.uuid4().hex)
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
            fh.flush()
        return record["evaluation_id"]

    def record_judge(self, question: GeneratedQuestion, model_id: str,
                     score: JudgeScore) -> str:
        return self._append({
            "kind": "judge",
            "question_id": question.question_id,
            "request_id": question.request_id,
            "model_id": model_id,
            "level": question.level.level,
            "mode": question.mode.value,
            "metric": score.criterion.value,
            "raw": score.raw,
            "value": score.normalized,
            "judge_model": score.judge_model,
        })

    def record_pinc(self, question: GeneratedQuestion, model_id: str,
                    value: float) -> str:
        return self._append({
            "kind": "pinc",
            "question_id": question.question_id,
            "request_id": question.request_id,
            "model_id": model_id,
            "level": question.level.level,
            "mode": question.mode.value,
            "metric": METRIC_PINC,
            "value": value,
        })

    def record_manual(self, question_id: str, rubric: ManualRubric) -> str:
        return self._append({
            "kind": "manual",
            "question_id": question_id,
            "relevance": rubric.relevance,
            "depth": rubric.depth,
            "taxonomy": rubric.taxonomy,
            "correctness": rubric.correctness,
            "rater_id": rubric.rater_id,
        })

    def records(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out


@dataclass(frozen=True)
class TableCell:
    mean: float
    std: float
    n: int


class ResultsTable:
    """Aggregate matrix keyed by (model, level-or-AVERAGE, metric, mode-or-None)."""

    def __init__(self, models: Sequence[str], modes: Sequence[GenerationMode]):
        self.models = list(models)
        self.modes = list(modes)
        self.cells: dict[tuple[str, int | str, str, str | None], TableCell] = {}

    def cell(self, model: str, level: int | str, metric: str,
             mode: str | None = None) -> TableCell:
        return self.cells[(model, level, metric, mode)]

    def column_keys(self) -> list[tuple[str, str | None]]:
        cols = [(m, mode.value) for m in JUDGE_METRICS for mode in self.modes]
        cols.append((METRIC_PINC, None))
        return cols


def build_results_table(
    records: Iterable[dict],
    models: Sequence[str],
    modes: Sequence[GenerationMode] = (GenerationMode.DOK_ONLY, GenerationMode.DOK_RAG),
    levels: Sequence[int] = (1, 2, 3, 4),
) -> ResultsTable:
    """Aggregate evaluation records into the full comparison matrix.

    Every requested (model, level, judge-metric, mode) combination and
    every (model, level) PINC cell must have at least one record, or the
    call fails listing the missing cells."""
    grouped: dict[tuple[str, int, str, str | None], list[float]] = {}
    for rec in records:
        if rec.get("kind") not in ("judge", "pinc"):
            continue
        metric = rec["metric"]
        mode = None if metric == METRIC_PINC else rec["mode"]
        key = (rec["model_id"], rec["level"], metric, mode)
        grouped.setdefault(key, []).append(float(rec["value"]))

    missing = []
    table = ResultsTable(models, list(modes))
    for model in models:
        for metric, mode in table.column_keys():
            level_means = []
            for level in levels:
                values = grouped.get((model, level, metric, mode))
                if not values:
                    mode_label = f", {mode}" if mode else ""
                    missing.append(f"{model}, level {level}, {metric}{mode_label}")
                    continue
                mean, std = aggregate_mean_std(values)
                table.cells[(model, level, metric, mode)] = TableCell(mean, std, len(values))
                level_means.append(mean)
            if len(level_means) == len(levels):
                avg_mean, avg_std = aggregate_mean_std(level_means)
                n_total = sum(table.cells[(model, lv, metric, mode)].n for lv in levels)
                table.cells[(model, AVERAGE_ROW, metric, mode)] = TableCell(
                    avg_mean, avg_std, n_total)
    if missing:
        raise MissingCell(missing)
    return table


_COLUMN_HEADERS = [
    ("Relevance (DOK)", JudgeCriterion.RELEVANCE.value, GenerationMode.DOK_ONLY.value),
    ("Relevance (DOK+RAG)", JudgeCriterion.RELEVANCE.value, GenerationMode.DOK_RAG.value),
    ("DOK alignment (DOK)", JudgeCriterion.DOK_ALIGNMENT.value, GenerationMode.DOK_ONLY.value),
    ("DOK alignment (DOK+RAG)", JudgeCriterion.DOK_ALIGNMENT.value, GenerationMode.DOK_RAG.value),
    ("Appropriateness (DOK)", JudgeCriterion.APPROPRIATENESS.value, GenerationMode.DOK_ONLY.value),
    ("Appropriateness (DOK+RAG)", JudgeCriterion.APPROPRIATENESS.value, GenerationMode.DOK_RAG.value),
    ("PINC", METRIC_PINC, None),
]


def _row_labels(levels: Sequence[int] = (1, 2, 3, 4)) -> list[tuple[str, int | str]]:
    return [(f"Level {lv}", lv) for lv in levels] + [("Average", AVERAGE_ROW)]


def _active_columns(table: ResultsTable) -> list[tuple[str, str, str | None]]:
    active_modes = {m.value for m in table.modes}
    return [
        (header, metric, mode)
        for header, metric, mode in _COLUMN_HEADERS
        if mode is None or mode in active_modes
    ]


def render_markdown(table: ResultsTable, precision: int = 2) -> str:
    """Markdown rendition: per model, rows Level 1-4 plus Average, columns
    split by mode for each judge metric plus a single PINC column."""
    columns = _active_columns(table)
    head = "| Model | Level | " + " | ".join(h for h, _, _ in columns) + " |"
    sep = "|" + " --- |" * (len(columns) + 2)
    lines = [head, sep]
    for model in table.models:
        for label, level in _row_labels():
            cells = []
            for _, metric, mode in columns:
                c = table.cells.get((model, level, metric, mode))
                cells.append(f"{c.mean:.{precision}f}" if c else "-")
            lines.append(f"| {model} | {label} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_csv(table: ResultsTable) -> str:
    """CSV rendition with full precision plus std and n per cell."""
    import csv
    import io

    columns = _active_columns(table)
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["model", "level"]
    for h, _, _ in columns:
        header.extend([h, f"{h} std", f"{h} n"])
    writer.writerow(header)
    for model in table.models:
        for label, level in _row_labels():
            row: list = [model, label]
            for _, metric, mode in columns:
                c = table.cells.get((model, level, metric, mode))
                if c:
                    row.extend([repr(c.mean), repr(c.std), c.n])
                else:
                    row.extend(["", "", ""])
            writer.writerow(row)
    return buf.getvalue()


def pinc_source_text(question: GeneratedQuestion, retrieved_texts: Sequence[str],
                     concept: str) -> str:
    """Default PINC pairing source: the retrieved context in DOK_RAG mode,
    or the level definition plus concept seed in DOK_ONLY mode."""
    if question.mode == GenerationMode.DOK_RAG and retrieved_texts:
        return "\n\n".join(retrieved_texts)
    return f"{question.level.definition} {concept}"


def pairwise_pinc(questions: Sequence[GeneratedQuestion],
                  cfg: PincConfig = PincConfig()) -> list[float]:
    """Optional diversity view: PINC of each question against the others."""
    scores = []
    for i, q in enumerate(questions):
        others = " ".join(o.question_text for j, o in enumerate(questions) if j != i)
        if not others.strip():
            continue
        scores.append(pinc_score(others, q.question_text, cfg))
    return scores
