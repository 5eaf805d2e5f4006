"""DOK level definitions and prompt assembly.

All prompts render from versioned template files ({slot} placeholders) so
wording changes are visible as template_version bumps and every rendering
is byte-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .corpus import DocumentChunk
from .errors import MissingContext, MissingMaterial, ModeContextMismatch

TEMPLATE_DIR = Path(__file__).parent / "templates"

# Tokens of each retrieved chunk included in a prompt; bounds prompt size.
DEFAULT_CHUNK_TOKEN_BUDGET = 300


@dataclass(frozen=True)
class DokLevel:
    level: int
    name: str
    definition: str


# The four canonical level definitions; these exact strings are embedded in
# generation and judge prompts and asserted by the golden-file tests.
DOK_LEVELS: dict[int, DokLevel] = {
    1: DokLevel(1, "Recall and Reproduction",
                "retrieving basic facts, definitions, and formulas with minimal cognitive effort"),
    2: DokLevel(2, "Skills and Concepts",
                "selecting appropriate methods and organizing information to solve routine problems"),
    3: DokLevel(3, "Strategic Thinking",
                "reasoning, planning, and applying concepts in non-routine scenarios"),
    4: DokLevel(4, "Extended Thinking",
                "making connections across concepts and solving complex, multi-step problems"),
}


def dok_level(level: int) -> DokLevel:
    if level not in DOK_LEVELS:
        raise ValueError(f"DOK level must be 1-4, got {level}")
    return DOK_LEVELS[level]


class GenerationMode(str, Enum):
    DOK_ONLY = "DOK_ONLY"
    DOK_RAG = "DOK_RAG"


class Scenario(str, Enum):
    MINIMAL = "MINIMAL"
    MODERATE = "MODERATE"
    COMPREHENSIVE = "COMPREHENSIVE"


# Required material labels per scenario; each scenario is a superset of the
# previous one.
SCENARIO_MATERIALS: dict[Scenario, tuple[str, ...]] = {
    Scenario.MINIMAL: ("syllabus", "topic_summary"),
    Scenario.MODERATE: ("syllabus", "topic_summary", "class_notes"),
    Scenario.COMPREHENSIVE: ("syllabus", "topic_summary", "class_notes", "references"),
}


class JudgeCriterion(str, Enum):
    RELEVANCE = "RELEVANCE"
    DOK_ALIGNMENT = "DOK_ALIGNMENT"
    APPROPRIATENESS = "APPROPRIATENESS"


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    template_id: str
    template_version: str
    filled_slots: dict = field(default_factory=dict)


def _load_template(template_id: str, version: str) -> str:
    path = TEMPLATE_DIR / f"{template_id}_v{version}.txt"
    return path.read_text(encoding="utf-8")


def _render(template_id: str, version: str, system_id: str, slots: dict) -> PromptBundle:
    user_text = _load_template(template_id, version).format(**slots)
    system_text = _load_template(system_id, version)
    return PromptBundle(
        system_text=system_text,
        user_text=user_text,
        template_id=template_id,
        template_version=version,
        filled_slots=dict(slots),
    )


def truncate_tokens(text: str, budget: int) -> str:
    """Clip text to at most `budget` whitespace-delimited words."""
    words = text.split()
    if len(words) <= budget:
        return text
    return " ".join(words[:budget]) + " …"


def format_reference_section(chunks: Sequence[DocumentChunk],
                             budget: int = DEFAULT_CHUNK_TOKEN_BUDGET) -> str:
    blocks = []
    for i, chunk in enumerate(chunks, start=1):
        blocks.append(f"[{i}] (chunk {chunk.chunk_id})\n{truncate_tokens(chunk.text, budget)}")
    return "\n\n".join(blocks)


def build_generation_prompt(
    concept: str,
    level: DokLevel,
    mode: GenerationMode,
    retrieved: Sequence[DocumentChunk],
    count: int,
    chunk_token_budget: int = DEFAULT_CHUNK_TOKEN_BUDGET,
) -> PromptBundle:
    """Assemble the question-generation prompt for one request.

    DOK_RAG embeds the retrieved chunks verbatim under a numbered
    "Reference material" section; DOK_ONLY must carry no retrieved text.
    """
    if not concept.strip():
        raise ValueError("concept must be non-empty")
    if count < 1:
        raise ValueError("count must be >= 1")
    if mode == GenerationMode.DOK_ONLY and retrieved:
        raise ModeContextMismatch("DOK_ONLY prompts must not include retrieved material")
    if mode == GenerationMode.DOK_RAG and not retrieved:
        raise ModeContextMismatch("DOK_RAG prompts require at least one retrieved chunk")

    if mode == GenerationMode.DOK_RAG:
        reference_section = (
            "Reference material (ground every question in these excerpts):\n\n"
            + format_reference_section(retrieved, chunk_token_budget)
            + "\n\n"
        )
    else:
        reference_section = ""
    slots = {
        "concept": concept,
        "count": count,
        "reference_section": reference_section,
    }
    return _render(f"generate_level{level.level}", "1", "generate_system", slots)


def build_scenario_prompt(
    scenario: Scenario,
    materials: Sequence[tuple[str, str]],
    topic: str,
    count: int = 5,
) -> PromptBundle:
    """Context-scenario prompt: materials concatenated in label order, then
    an instruction to write `count` comprehension questions with answers."""
    if count < 1:
        raise ValueError("count must be >= 1")
    provided = dict(materials)
    required = SCENARIO_MATERIALS[scenario]
    for label in required:
        if label not in provided:
            raise MissingMaterial(label)
    blocks = [
        f"## {label.replace('_', ' ').title()}\n{provided[label]}"
        for label in required
    ]
    slots = {
        "materials": "\n\n".join(blocks),
        "topic": topic,
        "count": count,
    }
    return _render("scenario", "1", "generate_system", slots)


_CRITERION_TEMPLATE = {
    JudgeCriterion.RELEVANCE: "judge_relevance",
    JudgeCriterion.DOK_ALIGNMENT: "judge_dok_alignment",
    JudgeCriterion.APPROPRIATENESS: "judge_appropriateness",
}


def build_judge_prompt(
    question_text: str,
    answer_text: str,
    criterion: JudgeCriterion,
    level: DokLevel | None = None,
    context: str | None = None,
) -> PromptBundle:
    """Assemble an evaluation prompt ending in a single "Score: N" line.

    RELEVANCE requires `context` (the concept and any retrieved material);
    DOK_ALIGNMENT requires the question's target level.
    """
    if criterion == JudgeCriterion.RELEVANCE and not (context and context.strip()):
        raise MissingContext("RELEVANCE judging requires the generation context")
    if criterion == JudgeCriterion.DOK_ALIGNMENT and level is None:
        raise MissingContext("DOK_ALIGNMENT judging requires the question's target level")
    slots: dict = {
        "question": question_text,
        "answer": answer_text,
    }
    if criterion == JudgeCriterion.DOK_ALIGNMENT:
        assert level is not None
        slots["level"] = level.level
        slots["level_name"] = level.name
        slots["level_definition"] = level.definition
    if criterion == JudgeCriterion.RELEVANCE:
        slots["context"] = context
    return _render(_CRITERION_TEMPLATE[criterion], "1", "judge_system", slots)
