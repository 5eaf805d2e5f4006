"""Embedding and chat-completion provider clients, plus deterministic mocks.

Live providers speak the common REST conventions (POST {"model","input"}
for embeddings, POST {"model","messages",...} for chat). Mock providers are
fully deterministic so the whole system runs offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field

import requests

from .errors import ContentBlocked, DimensionMismatch, ProviderUnavailable, TimeoutExceeded
from .tokenizer import tokenize

logger = logging.getLogger(__name__)

MOCK_EMBED_DIM = 256

_RETRYABLE_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_base: float = 0.5  # seconds; attempt i sleeps base * 2**i


@dataclass(frozen=True)
class ProviderConfig:
    provider_id: str
    model_id: str
    endpoint: str = ""
    api_key_ref: str = ""  # name of the env var holding the key, never the key itself
    temperature: float | None = None  # None means provider default
    max_output_tokens: int = 2048
    timeout: float = 60.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    @property
    def fingerprint(self) -> tuple[str, str]:
        return (self.provider_id, self.model_id)

    def api_key(self) -> str | None:
        return os.environ.get(self.api_key_ref) if self.api_key_ref else None


def _fnv1a_64(data: bytes) -> int:
    """FNV-1a 64-bit hash; fixed algorithm so mock embeddings are stable
    across runs and platforms."""
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def mock_embed(text: str) -> list[float]:
    """Deterministic 256-dim embedding: feature-hash token unigrams and
    bigrams with FNV-1a 64, signs from the hash, then L2-normalize.

    Empty/whitespace text maps to the fallback basis vector e1.
    """
    tokens = tokenize(text)
    if not tokens:
        return [1.0] + [0.0] * (MOCK_EMBED_DIM - 1)
    grams = list(tokens)
    grams.extend(f"{a} {b}" for a, b in zip(tokens, tokens[1:]))
    vec = [0.0] * MOCK_EMBED_DIM
    for g in grams:
        h = _fnv1a_64(g.encode("utf-8"))
        bucket = h % MOCK_EMBED_DIM
        sign = 1.0 if (h >> 8) & 1 else -1.0
        vec[bucket] += sign
    norm = math.sqrt(sum(v * v for v in vec))
    if norm == 0.0:
        return [1.0] + [0.0] * (MOCK_EMBED_DIM - 1)
    return [v / norm for v in vec]


def _with_retries(call, policy: RetryPolicy, what: str):
    """Run `call` with exponential backoff on transient failures."""
    attempts: list[str] = []
    for attempt in range(policy.max_attempts):
        try:
            return call()
        except (requests.Timeout,) as exc:
            attempts.append(f"attempt {attempt + 1}: timeout ({exc})")
        except _TransientHTTPError as exc:
            attempts.append(f"attempt {attempt + 1}: HTTP {exc.status}")
        except requests.ConnectionError as exc:
            attempts.append(f"attempt {attempt + 1}: connection error ({exc})")
        if attempt < policy.max_attempts - 1:
            delay = policy.backoff_base * (2 ** attempt)
            if delay > 0:
                time.sleep(delay)
    raise ProviderUnavailable(
        f"{what} failed after {policy.max_attempts} attempts", attempts=attempts
    )


class _TransientHTTPError(Exception):
    def __init__(self, status: int):
        super().__init__(f"HTTP {status}")
        self.status = status


def _raise_for_status(resp: requests.Response) -> None:
    if resp.status_code in _RETRYABLE_STATUS:
        raise _TransientHTTPError(resp.status_code)
    if resp.status_code >= 400:
        raise ProviderUnavailable(f"provider returned HTTP {resp.status_code}: {resp.text[:200]}")


class EmbeddingProvider:
    """Common interface: embed(text) -> list[float]; `dim` is declared up front."""

    config: ProviderConfig
    dim: int

    def embed(self, text: str) -> list[float]:
        raise NotImplementedError


class HttpEmbeddingProvider(EmbeddingProvider):
    def __init__(self, config: ProviderConfig, dim: int):
        self.config = config
        self.dim = dim

    def embed(self, text: str) -> list[float]:
        def call():
            headers = {"Content-Type": "application/json"}
            key = self.config.api_key()
            if key:
                headers["Authorization"] = f"Bearer {key}"
            resp = requests.post(
                self.config.endpoint,
                json={"model": self.config.model_id, "input": text},
                headers=headers,
                timeout=self.config.timeout,
            )
            _raise_for_status(resp)
            body = resp.json()
            # accept both bare {"embedding": [...]} and the data-array shape
            if "embedding" in body:
                values = body["embedding"]
            else:
                values = body["data"][0]["embedding"]
            return [float(v) for v in values]

        values = _with_retries(call, self.config.retry, f"embedding via {self.config.provider_id}")
        if len(values) != self.dim:
            raise DimensionMismatch(
                f"provider {self.config.provider_id} returned dim {len(values)}, expected {self.dim}"
            )
        return values


class MockEmbeddingProvider(EmbeddingProvider):
    """Offline oracle embedder; see `mock_embed` for the algorithm."""

    def __init__(self, config: ProviderConfig | None = None):
        self.config = config or ProviderConfig(provider_id="mock", model_id="mock-embed-256")
        self.dim = MOCK_EMBED_DIM
        self.calls = 0

    def embed(self, text: str) -> list[float]:
        self.calls += 1
        return mock_embed(text)


class ChatProvider:
    """Common interface: complete(system_text, user_text) -> raw model text."""

    config: ProviderConfig

    def complete(self, system_text: str, user_text: str) -> str:
        raise NotImplementedError


class HttpChatProvider(ChatProvider):
    def __init__(self, config: ProviderConfig):
        self.config = config

    def complete(self, system_text: str, user_text: str) -> str:
        payload: dict = {
            "model": self.config.model_id,
            "messages": [
                {"role": "system", "content": system_text},
                {"role": "user", "content": user_text},
            ],
            "max_tokens": self.config.max_output_tokens,
        }
        if self.config.temperature is not None:
            payload["temperature"] = self.config.temperature

        def call():
            headers = {"Content-Type": "application/json"}
            key = self.config.api_key()
            if key:
                headers["Authorization"] = f"Bearer {key}"
            try:
                resp = requests.post(
                    self.config.endpoint, json=payload, headers=headers,
                    timeout=self.config.timeout,
                )
            except requests.Timeout:
                raise
            _raise_for_status(resp)
            body = resp.json()
            choice = body["choices"][0]
            if choice.get("finish_reason") == "content_filter":
                raise ContentBlocked(f"provider {self.config.provider_id} refused the request")
            return choice["message"]["content"]

        try:
            return _with_retries(call, self.config.retry, f"chat via {self.config.provider_id}")
        except ProviderUnavailable as exc:
            if any("timeout" in a for a in exc.attempts) and all(
                "timeout" in a for a in exc.attempts
            ):
                raise TimeoutExceeded(str(exc)) from exc
            raise


class MockChatProvider(ChatProvider):
    """Deterministic offline chat model.

    Responses can be pinned per prompt via `fixtures` (keyed by the SHA-256
    of system_text + "\\n" + user_text). Without a fixture the mock
    recognizes the engine's own prompt shapes: generation prompts get a
    structured JSON array of question/answer pairs, judge prompts get a
    short rationale plus a "Score: N" line, both derived only from the
    prompt bytes.
    """

    def __init__(self, config: ProviderConfig | None = None,
                 fixtures: dict[str, str] | None = None):
        self.config = config or ProviderConfig(provider_id="mock", model_id="mock-chat")
        self.fixtures = fixtures or {}
        self.calls = 0

    @staticmethod
    def prompt_key(system_text: str, user_text: str) -> str:
        return hashlib.sha256((system_text + "\n" + user_text).encode("utf-8")).hexdigest()

    def complete(self, system_text: str, user_text: str) -> str:
        self.calls += 1
        key = self.prompt_key(system_text, user_text)
        if key in self.fixtures:
            return self.fixtures[key]
        if "Score:" in user_text or "Score:" in system_text:
            return self._judge_response(user_text)
        return self._generation_response(user_text)

    def _generation_response(self, user_text: str) -> str:
        count = 5
        m = re.search(r"exactly (\d+) question", user_text)
        if m:
            count = int(m.group(1))
        concept = "the concept"
        m = re.search(r"^Concept: (.+)$", user_text, re.MULTILINE)
        if m:
            concept = m.group(1).strip()
        level = ""
        m = re.search(r"DOK level (\d)", user_text)
        if m:
            level = m.group(1)
        seed = _fnv1a_64(user_text.encode("utf-8"))
        pairs = []
        for i in range(count):
            token = f"{(seed + i * 0x9E3779B9) & 0xFFFFFF:06x}"
            pairs.append({
                "question": f"Practice question {i + 1} on {concept} (level {level}, variant {token}): "
                            f"explain how {concept} applies in case {token}?",
                "answer": f"Worked answer {i + 1}: applying {concept} to case {token} gives result {token}.",
            })
        return json.dumps(pairs, indent=2)

    def _judge_response(self, user_text: str) -> str:
        seed = _fnv1a_64(user_text.encode("utf-8"))
        score = 3 + (seed % 3)  # deterministic 3..5
        return (
            "Step 1: the question was read against the stated criterion.\n"
            "Step 2: coverage and phrasing were checked against the provided context.\n"
            f"Score: {score}"
        )
