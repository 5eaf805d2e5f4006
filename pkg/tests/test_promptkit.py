from pathlib import Path

import pytest

from qgdok.corpus import DocumentChunk
from qgdok.errors import MissingContext, MissingMaterial, ModeContextMismatch
from qgdok.promptkit import (
    DOK_LEVELS,
    GenerationMode,
    JudgeCriterion,
    Scenario,
    build_generation_prompt,
    build_judge_prompt,
    build_scenario_prompt,
    dok_level,
    truncate_tokens,
)

GOLDEN_DIR = Path(__file__).parent / "golden"

FIXTURE_CHUNKS = [
    DocumentChunk(chunk_id="doc1:0000", doc_id="doc1", token_start=0, token_end=8,
                  text="The derivative measures the instantaneous rate of change.",
                  ordinal=0),
    DocumentChunk(chunk_id="doc1:0001", doc_id="doc1", token_start=6, token_end=14,
                  text="The power rule states d/dx x^n = n x^(n-1).",
                  ordinal=1),
]

FIXTURE_MATERIALS = [
    ("syllabus", "Week 3: limits and continuity."),
    ("topic_summary", "Limits describe the value a function approaches."),
    ("class_notes", "We proved the squeeze theorem in class."),
    ("references", "Spivak, Calculus, chapter 5."),
]


def golden_check(name: str, text: str):
    path = GOLDEN_DIR / name
    assert path.exists(), f"missing golden file {name}"
    assert text == path.read_text(encoding="utf-8"), f"golden mismatch for {name}"


class TestGenerationPrompt:
    @pytest.mark.parametrize("level", [1, 2, 3, 4])
    def test_golden_dok_only(self, level):
        bundle = build_generation_prompt(
            "derivatives", dok_level(level), GenerationMode.DOK_ONLY, [], 5)
        golden_check(f"generate_level{level}_dok_only.txt", bundle.user_text)

    def test_golden_dok_rag(self):
        bundle = build_generation_prompt(
            "derivatives", dok_level(1), GenerationMode.DOK_RAG, FIXTURE_CHUNKS, 5)
        golden_check("generate_level1_dok_rag.txt", bundle.user_text)

    def test_golden_system(self):
        bundle = build_generation_prompt(
            "derivatives", dok_level(1), GenerationMode.DOK_ONLY, [], 5)
        golden_check("generate_system.txt", bundle.system_text)

    @pytest.mark.parametrize("level", [1, 2, 3, 4])
    def test_definition_fidelity(self, level):
        bundle = build_generation_prompt(
            "derivatives", dok_level(level), GenerationMode.DOK_ONLY, [], 5)
        for other, lv in DOK_LEVELS.items():
            if other == level:
                assert lv.definition in bundle.user_text
            else:
                assert lv.definition not in bundle.user_text

    def test_level1_contains_canonical_definition(self):
        bundle = build_generation_prompt(
            "derivatives", dok_level(1), GenerationMode.DOK_ONLY, [], 5)
        assert "retrieving basic facts, definitions, and formulas" in bundle.user_text

    def test_rag_reference_sections_numbered(self):
        bundle = build_generation_prompt(
            "derivatives", dok_level(1), GenerationMode.DOK_RAG, FIXTURE_CHUNKS, 5)
        assert "[1] (chunk doc1:0000)" in bundle.user_text
        assert "[2] (chunk doc1:0001)" in bundle.user_text

    def test_dok_only_rejects_chunks(self):
        with pytest.raises(ModeContextMismatch):
            build_generation_prompt(
                "derivatives", dok_level(3), GenerationMode.DOK_ONLY, FIXTURE_CHUNKS, 5)

    def test_dok_rag_requires_chunks(self):
        with pytest.raises(ModeContextMismatch):
            build_generation_prompt(
                "derivatives", dok_level(3), GenerationMode.DOK_RAG, [], 5)

    def test_dok_only_contains_no_chunk_text(self):
        bundle = build_generation_prompt(
            "derivatives", dok_level(2), GenerationMode.DOK_ONLY, [], 5)
        for chunk in FIXTURE_CHUNKS:
            assert chunk.text not in bundle.user_text

    def test_purity(self):
        a = build_generation_prompt("limits", dok_level(2), GenerationMode.DOK_ONLY, [], 3)
        b = build_generation_prompt("limits", dok_level(2), GenerationMode.DOK_ONLY, [], 3)
        assert a == b

    def test_chunk_truncation(self):
        long_chunk = DocumentChunk(
            chunk_id="big:0000", doc_id="big", token_start=0, token_end=500,
            text=" ".join(f"w{i}" for i in range(500)), ordinal=0)
        bundle = build_generation_prompt(
            "derivatives", dok_level(1), GenerationMode.DOK_RAG, [long_chunk], 5,
            chunk_token_budget=10)
        assert "w9" in bundle.user_text
        assert "w10 " not in bundle.user_text


class TestScenarioPrompt:
    def test_golden_minimal(self):
        bundle = build_scenario_prompt(Scenario.MINIMAL, FIXTURE_MATERIALS[:2], "limits")
        golden_check("scenario_minimal.txt", bundle.user_text)

    def test_minimal_excludes_notes(self):
        bundle = build_scenario_prompt(Scenario.MINIMAL, FIXTURE_MATERIALS, "limits")
        assert "squeeze theorem" not in bundle.user_text
        assert "Week 3" in bundle.user_text

    def test_comprehensive_includes_all(self):
        bundle = build_scenario_prompt(Scenario.COMPREHENSIVE, FIXTURE_MATERIALS, "limits")
        for _, text in FIXTURE_MATERIALS:
            assert text in bundle.user_text

    def test_missing_material(self):
        with pytest.raises(MissingMaterial) as exc:
            build_scenario_prompt(Scenario.COMPREHENSIVE, FIXTURE_MATERIALS[:3], "limits")
        assert exc.value.label == "references"

    def test_default_count_is_five(self):
        bundle = build_scenario_prompt(Scenario.MINIMAL, FIXTURE_MATERIALS[:2], "limits")
        assert "generate 5 comprehension questions" in bundle.user_text


class TestJudgePrompt:
    def test_golden_all_criteria(self):
        for criterion, name in [
            (JudgeCriterion.RELEVANCE, "judge_relevance.txt"),
            (JudgeCriterion.DOK_ALIGNMENT, "judge_dok_alignment.txt"),
            (JudgeCriterion.APPROPRIATENESS, "judge_appropriateness.txt"),
        ]:
            bundle = build_judge_prompt(
                "What is the derivative of x^2?", "2x",
                criterion, level=dok_level(2), context="derivatives")
            golden_check(name, bundle.user_text)

    def test_dok_alignment_embeds_level_definition(self):
        bundle = build_judge_prompt("Q?", "A.", JudgeCriterion.DOK_ALIGNMENT,
                                    level=dok_level(2))
        assert "selecting appropriate methods and organizing information" in bundle.user_text

    def test_relevance_requires_context(self):
        with pytest.raises(MissingContext):
            build_judge_prompt("Q?", "A.", JudgeCriterion.RELEVANCE, context=None)

    def test_purity(self):
        a = build_judge_prompt("Q?", "A.", JudgeCriterion.APPROPRIATENESS)
        b = build_judge_prompt("Q?", "A.", JudgeCriterion.APPROPRIATENESS)
        assert a == b

    def test_score_instruction_present(self):
        bundle = build_judge_prompt("Q?", "A.", JudgeCriterion.APPROPRIATENESS)
        assert "Score: N" in bundle.user_text


def test_truncate_tokens_noop_under_budget():
    assert truncate_tokens("a b c", 5) == "a b c"
