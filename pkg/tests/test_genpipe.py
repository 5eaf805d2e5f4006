import json

import pytest

import qgdok.providers as providers_mod
from qgdok.corpus import DocumentChunk
from qgdok.errors import EmptyIndex, ProviderUnavailable, UnparseableOutput
from qgdok.genpipe import (
    GenerationRequest,
    ParseQuality,
    RunStore,
    complete,
    generate_questions,
    parse_questions,
)
from qgdok.promptkit import GenerationMode, build_generation_prompt, dok_level
from qgdok.providers import (
    HttpChatProvider,
    MockChatProvider,
    MockEmbeddingProvider,
    ProviderConfig,
    RetryPolicy,
)
from qgdok.retrieval import index_chunks

STRUCTURED_FIXTURE = json.dumps([
    {"question": f"Question {i}?", "answer": f"Answer {i}."} for i in range(5)
])


class TestParseQuestions:
    def test_structured_array(self):
        pairs, quality = parse_questions(STRUCTURED_FIXTURE, 5)
        assert len(pairs) == 5
        assert quality is ParseQuality.STRUCTURED

    def test_fenced_json(self):
        raw = "Here you go:\n```json\n" + STRUCTURED_FIXTURE + "\n```\nEnjoy!"
        pairs, quality = parse_questions(raw, 5)
        assert len(pairs) == 5
        assert quality is ParseQuality.STRUCTURED

    def test_numbered_fallback(self):
        raw = "1. What is X? Answer: Y"
        pairs, quality = parse_questions(raw, 1)
        assert pairs == [("What is X?", "Y")]
        assert quality is ParseQuality.FALLBACK

    def test_qa_fallback(self):
        raw = "Q1: What is a limit?\nA1: The approached value.\nQ2: What is e?\nA2: Euler's number."
        pairs, quality = parse_questions(raw, 2)
        assert len(pairs) == 2
        assert quality is ParseQuality.FALLBACK

    def test_count_mismatch_is_partial_not_error(self):
        pairs, quality = parse_questions(STRUCTURED_FIXTURE, 7)
        assert len(pairs) == 5
        assert quality is ParseQuality.PARTIAL

    def test_unparseable(self):
        with pytest.raises(UnparseableOutput):
            parse_questions("Nothing resembling questions here.", 5)


class FakeResponse:
    def __init__(self, status_code, body=None):
        self.status_code = status_code
        self._body = body or {}
        self.text = json.dumps(self._body)

    def json(self):
        return self._body


class TestRetries:
    def _provider(self):
        return HttpChatProvider(ProviderConfig(
            provider_id="p", model_id="m", endpoint="http://localhost:0/v1/chat",
            retry=RetryPolicy(max_attempts=3, backoff_base=0.0)))

    def test_429_twice_then_success(self, monkeypatch):
        calls = []

        def fake_post(*args, **kwargs):
            calls.append(1)
            if len(calls) < 3:
                return FakeResponse(429)
            return FakeResponse(200, {"choices": [{"message": {"content": "hi"}}]})

        monkeypatch.setattr(providers_mod.requests, "post", fake_post)
        assert self._provider().complete("s", "u") == "hi"
        assert len(calls) == 3

    def test_exhausted_attempts_raise_with_trace(self, monkeypatch):
        monkeypatch.setattr(providers_mod.requests, "post",
                            lambda *a, **k: FakeResponse(503))
        with pytest.raises(ProviderUnavailable) as exc:
            self._provider().complete("s", "u")
        assert len(exc.value.attempts) == 3


class TestMockChatProvider:
    def test_fixture_override(self):
        fixtures = {MockChatProvider.prompt_key("sys", "user"): "pinned output"}
        mock = MockChatProvider(fixtures=fixtures)
        assert mock.complete("sys", "user") == "pinned output"

    def test_generation_prompt_yields_structured_pairs(self):
        prompt = build_generation_prompt(
            "limits", dok_level(2), GenerationMode.DOK_ONLY, [], 5)
        mock = MockChatProvider()
        raw = complete(prompt, mock)
        pairs, quality = parse_questions(raw, 5)
        assert len(pairs) == 5
        assert quality is ParseQuality.STRUCTURED

    def test_deterministic(self):
        mock = MockChatProvider()
        assert mock.complete("s", "u") == mock.complete("s", "u")


@pytest.fixture
def pipeline(tmp_path):
    embedder = MockEmbeddingProvider()
    chunks = [
        DocumentChunk(chunk_id=f"d:{i:04d}", doc_id="d", token_start=0, token_end=5,
                      text=f"limits and continuity facts part {i}", ordinal=i)
        for i in range(6)
    ]
    index = index_chunks(chunks, embedder)
    lookup = {c.chunk_id: c for c in chunks}
    return {
        "embedder": embedder,
        "index": index,
        "lookup": lookup.get,
        "runs": RunStore(tmp_path),
        "chat": MockChatProvider(),
    }


def make_request(mode, count=5):
    return GenerationRequest(
        concept="limits",
        level=dok_level(2),
        mode=mode,
        provider=ProviderConfig(provider_id="mock", model_id="mock-chat"),
        count=count,
        k_retrieve=3,
    )


class TestGenerateQuestions:
    def test_dok_rag_has_provenance(self, pipeline):
        questions = generate_questions(
            make_request(GenerationMode.DOK_RAG), pipeline["index"],
            pipeline["embedder"], pipeline["chat"], pipeline["runs"],
            pipeline["lookup"])
        assert len(questions) == 5
        for q in questions:
            assert len(q.provenance) == 3
            assert all(cid.startswith("d:") for cid in q.provenance)

    def test_dok_only_empty_provenance(self, pipeline):
        questions = generate_questions(
            make_request(GenerationMode.DOK_ONLY), None, None,
            pipeline["chat"], pipeline["runs"], pipeline["lookup"])
        assert len(questions) == 5
        assert all(q.provenance == () for q in questions)

    def test_empty_index_fails_before_llm_call(self, pipeline):
        chat = pipeline["chat"]
        with pytest.raises(EmptyIndex):
            generate_questions(
                make_request(GenerationMode.DOK_RAG), None, pipeline["embedder"],
                chat, pipeline["runs"], pipeline["lookup"])
        assert chat.calls == 0

    def test_run_record_done_with_artifacts(self, pipeline):
        questions = generate_questions(
            make_request(GenerationMode.DOK_RAG), pipeline["index"],
            pipeline["embedder"], pipeline["chat"], pipeline["runs"],
            pipeline["lookup"])
        rid = questions[0].request_id
        rec = pipeline["runs"].record(rid)
        assert rec["status"] == "DONE"
        assert rec["question_ids"] == [q.question_id for q in questions]
        run_dir = pipeline["runs"].run_dir(rid)
        for artifact in ("prompt.json", "raw_output.txt", "questions.json"):
            assert (run_dir / artifact).exists()

    def test_persisted_raw_output_reparses_to_superset(self, pipeline):
        questions = generate_questions(
            make_request(GenerationMode.DOK_ONLY), None, None,
            pipeline["chat"], pipeline["runs"], pipeline["lookup"])
        rid = questions[0].request_id
        raw = (pipeline["runs"].run_dir(rid) / "raw_output.txt").read_text()
        pairs, _ = parse_questions(raw, 5)
        for q in questions:
            assert (q.question_text, q.answer_text) in pairs

    def test_failed_run_is_marked(self, pipeline):
        class ExplodingChat(MockChatProvider):
            def complete(self, s, u):
                raise ProviderUnavailable("down", attempts=["attempt 1: boom"])

        with pytest.raises(ProviderUnavailable):
            generate_questions(
                make_request(GenerationMode.DOK_ONLY), None, None,
                ExplodingChat(), pipeline["runs"], pipeline["lookup"])
        runs = pipeline["runs"].list_runs()
        assert runs[-1]["status"] == "FAILED"
        assert runs[-1]["failed_stage"] == "provider"
