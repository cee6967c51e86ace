"""Text-completion backends: a generic HTTP client and a deterministic mock.

The HTTP wire format is the de facto local-inference completion protocol:
POST {"prompt", "max_tokens", "temperature", "stop"} -> {"text": "..."}.

The mock answers from a rule-based reference extractor applied to the
final target block of the prompt, optionally corrupted by a seeded noise
model (hallucinated values, extraneous punctuation, dropped separators)
for testing the downstream filters.
"""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field
from typing import Optional, Protocol

import httpx

from .corpus import Sentence
from .prompting import COMBINED_CUE, SEPARATE_CUES, RawDiagnosis, render_answer_combined
from .text import token_texts, tokenize
from .vocab import EXTENT_TOKENS, GRADE_TOKENS, STAGE_TOKENS, SURFACE_TOKENS


class BackendError(RuntimeError):
    """The completion endpoint answered with a non-2xx status."""

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        self.status_code = status_code


class BackendUnavailable(RuntimeError):
    """The completion endpoint stayed unreachable after all retries."""


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = 16
    temperature: float = 0.0
    stop: tuple[str, ...] = ("\n",)

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class MockConfig:
    mode: str = "oracle"  # "oracle" or "noisy"
    p_hallucinate: float = 0.0
    p_malformed: float = 0.0
    p_extraneous: float = 0.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("oracle", "noisy"):
            raise ValueError("mock mode must be \"oracle\" or \"noisy\"")
        for name in ("p_hallucinate", "p_malformed", "p_extraneous"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


class Backend(Protocol):
    def complete(self, request: CompletionRequest) -> str: ...


def oracle_extract(sentence: Sentence) -> RawDiagnosis:
    """Deterministic reference extraction of stage/grade/extent tokens.

    stage: the token right after a "stage" token, when it is one of
    i/ii/iii/iv/1/2/3/4 (first qualifying occurrence); grade likewise
    after "grade" for a/b/c; extent: first "localized"/"generalized"
    token. Fields with no qualifying token are absent.
    """
    tokens = [t.text for t in tokenize(sentence.text)]
    stage = _value_after_keyword(tokens, "stage", STAGE_TOKENS)
    grade = _value_after_keyword(tokens, "grade", GRADE_TOKENS)
    extent = next((t for t in tokens if t in EXTENT_TOKENS), None)
    return RawDiagnosis(stage=stage, grade=grade, extent=extent)


def _value_after_keyword(
    tokens: list[str], keyword: str, allowed: tuple[str, ...]
) -> Optional[str]:
    for i, token in enumerate(tokens[:-1]):
        if token == keyword and tokens[i + 1] in allowed:
            return tokens[i + 1]
    return None


def inject_noise(clean: str, target: Sentence, config: MockConfig) -> str:
    """Corrupt a clean completion, deterministically per target sentence.

    Seeded by (rng_seed, note_id, sentence index). Gate draws happen
    before any choice draws, so the set of corrupted sentences at a lower
    probability is a subset of the set at a higher one.

    - hallucinate: one present field is replaced by a same-category
      vocabulary value that does not occur in the target's tokens.
    - extraneous: one present field gains a trailing "." or ",".
    - malformed: one "/" separator is dropped (combined completions only).
    """
    if config.mode != "noisy":
        return clean
    rng = random.Random(_noise_seed(config.rng_seed, target.note_id, target.index))
    gate_hallucinate = rng.random() < config.p_hallucinate
    gate_extraneous = rng.random() < config.p_extraneous
    gate_malformed = rng.random() < config.p_malformed

    had_leading_space = clean.startswith(" ")
    fields = clean.strip().split("/")
    is_combined = len(fields) == 3
    categories = ("stage", "grade", "extent") if is_combined else (None,)

    def present_indices() -> list[int]:
        return [i for i, f in enumerate(fields) if f and f.lower() != "none"]

    if gate_hallucinate:
        target_tokens = set(token_texts(target.text))
        candidates = []
        for i in present_indices():
            category = categories[i] if is_combined else _category_of(fields[i])
            if category is None:
                continue
            absent = [v for v in SURFACE_TOKENS[category] if v not in target_tokens]
            if absent:
                candidates.append((i, absent))
        if candidates:
            i, absent = candidates[rng.randrange(len(candidates))]
            fields[i] = absent[rng.randrange(len(absent))]

    if gate_extraneous:
        idx = present_indices()
        if idx:
            i = idx[rng.randrange(len(idx))]
            fields[i] += rng.choice([".", ","])

    out = "/".join(fields)
    if gate_malformed and is_combined:
        slash_positions = [i for i, ch in enumerate(out) if ch == "/"]
        drop = slash_positions[rng.randrange(len(slash_positions))]
        out = out[:drop] + out[drop + 1 :]

    return (" " if had_leading_space else "") + out


def _category_of(value: str) -> Optional[str]:
    for category, tokens in SURFACE_TOKENS.items():
        if value.lower().rstrip(".,") in tokens:
            return category
    return None


def _noise_seed(rng_seed: int, note_id: str, index: int) -> int:
    digest = hashlib.sha256(f"{rng_seed}\x00{note_id}\x00{index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


class MockBackend:
    """Answers from the reference extractor; optionally noisy.

    Only the final target block of the prompt is read (the line before the
    trailing cue), so example composition never changes mock behavior.
    Identical (prompt, config) always yields an identical completion.
    """

    def __init__(self, config: MockConfig = MockConfig()):
        self.config = config

    def complete(self, request: CompletionRequest) -> str:
        target_text, cue = self._target_block(request.prompt)
        sentence = Sentence(
            note_id=hashlib.sha256(target_text.encode()).hexdigest()[:16],
            index=0,
            text=target_text,
        )
        raw = oracle_extract(sentence)
        if cue == COMBINED_CUE:
            clean = f" {render_answer_combined(raw)}"
        else:
            category = next(c for c, v in SEPARATE_CUES.items() if v == cue)
            value = raw.get(category)
            clean = f" {value if value is not None else 'None'}"
        return inject_noise(clean, sentence, self.config)

    @staticmethod
    def _target_block(prompt: str) -> tuple[str, str]:
        lines = prompt.split("\n")
        cue = lines[-1] if lines else ""
        if cue != COMBINED_CUE and cue not in SEPARATE_CUES.values():
            raise ValueError(f"prompt does not end with a recognized cue: {cue!r}")
        if len(lines) < 2 or not lines[-2].lower().startswith("d:"):
            raise ValueError("prompt has no target sentence line before the cue")
        return lines[-2], cue


class HttpBackend:
    """Completion client for a locally hosted model endpoint.

    Connection failures, timeouts, and 5xx responses are retried with
    exponential backoff; other non-2xx responses raise immediately.
    """

    def __init__(
        self,
        url: str,
        timeout: float = 120.0,
        retries: int = 3,
        backoff_base: float = 0.5,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.url = url
        self.retries = retries
        self.backoff_base = backoff_base
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "prompt": request.prompt,
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
            "stop": list(request.stop),
        }
        last_error: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._client.post(self.url, json=payload)
            except httpx.TransportError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = BackendError(
                    f"server error {response.status_code}: {response.text[:200]}",
                    status_code=response.status_code,
                )
                continue
            if not response.is_success:
                raise BackendError(
                    f"completion request failed with {response.status_code}: "
                    f"{response.text[:200]}",
                    status_code=response.status_code,
                )
            body = response.json()
            if not isinstance(body, dict) or not isinstance(body.get("text"), str):
                raise BackendError("response body lacks a \"text\" string")
            return body["text"]
        if isinstance(last_error, BackendError):
            raise last_error
        raise BackendUnavailable(
            f"endpoint {self.url} unreachable after {self.retries + 1} attempts: {last_error}"
        )

    def close(self) -> None:
        self._client.close()


@dataclass(frozen=True)
class BackendSettings:
    """backend.* and mock.* configuration keys with their defaults."""

    type: str = "mock"
    url: str = ""
    max_tokens: int = 16
    temperature: float = 0.0
    stop: tuple[str, ...] = ("\n",)
    concurrency: int = 4
    timeout: float = 120.0
    retries: int = 3
    mock: MockConfig = field(default_factory=MockConfig)


def make_backend(settings: BackendSettings) -> Backend:
    if settings.type == "mock":
        return MockBackend(settings.mock)
    if settings.type == "http":
        if not settings.url:
            raise ValueError("backend.url is required for the http backend")
        return HttpBackend(settings.url, timeout=settings.timeout, retries=settings.retries)
    raise ValueError(f"unknown backend type {settings.type!r}")
