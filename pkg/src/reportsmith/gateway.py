"""Uniform client for chat-completion and embedding backends (OpenAI-compatible
wire format), prompt construction, generation parsing, and a deterministic
in-process mock backend for offline runs."""

from __future__ import annotations

import enum
import hashlib
import json
import math
import os
import threading
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable, Mapping, Optional, Sequence, Union

import requests

from .errors import AuthFailed, MalformedGeneration, ProviderUnavailable, TimedOut
from .report_model import (
    StructuredReport,
    parse_sections,
    report_from_dict,
    report_to_json,
)
from .textmetrics import tokenize

API_KEY_ENV_PREFIX = "REPORTSMITH_API_KEY_"

Message = dict  # {"role": ..., "content": ...}


@dataclass(frozen=True)
class BackendConfig:
    name: str
    base_url: str
    model_id: str
    api_key_ref: str = ""
    max_concurrency: int = 4
    timeout: float = 30.0
    temperature: float = 0.0

    def __post_init__(self) -> None:
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not self.api_key_ref:
            ref = API_KEY_ENV_PREFIX + self.name.upper().replace("-", "_")
            object.__setattr__(self, "api_key_ref", ref)


@dataclass(frozen=True)
class PromptBundle:
    system: str
    user: str
    shots: tuple[tuple[str, str], ...] = ()

    def to_messages(self) -> list[Message]:
        messages: list[Message] = [{"role": "system", "content": self.system}]
        for shot_input, shot_output in self.shots:
            messages.append({"role": "user", "content": _alpaca_body(shot_input)})
            messages.append({"role": "assistant", "content": shot_output})
        messages.append({"role": "user", "content": self.user})
        return messages


@dataclass(frozen=True)
class GenerationResult:
    raw_text: str
    report: Optional[StructuredReport] = None
    parse_error: Optional[str] = None
    latency: float = 0.0

    def __post_init__(self) -> None:
        if (self.report is None) == (self.parse_error is None):
            raise ValueError("exactly one of report/parse_error must be set")


@dataclass(frozen=True)
class TrainingRecipe:
    """Fine-tuning hyperparameters exported as dataset metadata, never executed."""

    lora_rank: int = 16
    target_modules: tuple[str, ...] = (
        "q_proj",
        "k_proj",
        "o_proj",
        "v_proj",
        "down_proj",
        "gate_proj",
        "up_proj",
    )
    epochs: int = 3
    learning_rate: Mapping[str, float] = field(
        default_factory=lambda: {"7b": 2e-4, "3b": 3e-3}
    )
    batch_size: int = 8
    cross_validation_folds: int = 4

    def to_dict(self) -> dict:
        return {
            "lora_rank": self.lora_rank,
            "target_modules": list(self.target_modules),
            "epochs": self.epochs,
            "learning_rate": dict(self.learning_rate),
            "batch_size": self.batch_size,
            "cross_validation_folds": self.cross_validation_folds,
        }


@lru_cache(maxsize=None)
def _template(name: str) -> str:
    return (
        resources.files("reportsmith")
        .joinpath(f"fixtures/prompts/{name}")
        .read_text(encoding="utf-8")
    )


def alpaca_system_role() -> str:
    return _template("alpaca_template.txt").split("\n", 1)[0]


def alpaca_instruction() -> str:
    """The instruction block between the role line and the input marker."""
    body = _template("alpaca_template.txt")
    start = body.index("### Instruction:\n") + len("### Instruction:\n")
    end = body.index("\n\n### Input:")
    return body[start:end]


def build_alpaca_prompt(unstructured: str) -> str:
    """Instruction/input/response prompt; byte-stable against the shipped fixture."""
    return _template("alpaca_template.txt").replace("{unstructured_report}", unstructured)


def _alpaca_body(unstructured: str) -> str:
    prompt = build_alpaca_prompt(unstructured)
    return prompt.split("\n", 1)[1]


def build_synthesis_prompt(structured_text: str) -> str:
    """Casual-rewrite prompt; the input lands after the literal 'Bug report: '."""
    return _template("synthesis_template.txt").replace("{text}", structured_text)


def build_fewshot_messages(
    shots: Sequence[tuple[str, str]], unstructured: str
) -> list[Message]:
    """System role, then user/assistant exemplar pairs, then the target input."""
    bundle = PromptBundle(
        system=alpaca_system_role(),
        user=_alpaca_body(unstructured),
        shots=tuple(shots),
    )
    return bundle.to_messages()


_MISSING_PHRASES = {
    "",
    "missing",
    "n/a",
    "na",
    "none",
    "not provided",
    "not specified",
    "not available",
    "unknown",
}


def is_missing_phrase(text: str) -> bool:
    normalized = text.strip().strip("<>[]()").strip().rstrip(".").strip().lower()
    return normalized in _MISSING_PHRASES


def _extract_json_object(raw: str) -> Optional[dict]:
    """First balanced JSON object in raw text, tolerating fences and prose."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        data = json.loads(raw[start : i + 1])
                    except json.JSONDecodeError:
                        break
                    if isinstance(data, dict):
                        return data
                    break
        start = raw.find("{", start + 1)
    return None


def parse_generation(raw: str) -> StructuredReport:
    """Pull the report object out of a model generation.

    Fields that merely say the information is absent ("not provided", "n/a",
    "<MISSING>", ...) are normalized to empty and flagged.
    """
    data = _extract_json_object(raw)
    if data is None:
        raise MalformedGeneration("no JSON object found in generation")

    cleaned = dict(data)
    steps = cleaned.get("steps_to_reproduce", [])
    if isinstance(steps, str):
        steps = [steps]
    if isinstance(steps, list):
        steps = [s for s in steps if isinstance(s, str) and not is_missing_phrase(s)]
    else:
        steps = []
    cleaned["steps_to_reproduce"] = steps
    for key in ("title", "expected_result", "actual_result", "additional_information"):
        value = cleaned.get(key, "")
        if not isinstance(value, str) or is_missing_phrase(value):
            cleaned[key] = ""
    # Declared flags are recomputed from content below; drop inconsistent ones.
    cleaned["missing_fields"] = []
    report = report_from_dict(cleaned)
    return report.normalized()


class HttpBackend:
    """OpenAI-compatible chat/embeddings client with retries and a per-backend
    in-flight cap."""

    MAX_ATTEMPTS = 3
    BACKOFF_SECONDS = (1.0, 2.0, 4.0)

    def __init__(
        self,
        config: BackendConfig,
        session: Optional[requests.Session] = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.session = session or requests.Session()
        self._gate = threading.BoundedSemaphore(config.max_concurrency)
        self._sleep = sleeper
        self._lock = threading.Lock()
        self.last_retry_count = 0
        self.total_requests = 0

    @property
    def name(self) -> str:
        return self.config.name

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_ref, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        retries = 0
        last_error: Optional[Exception] = None
        timed_out = False
        with self._gate:
            for attempt in range(self.MAX_ATTEMPTS):
                if attempt:
                    self._sleep(self.BACKOFF_SECONDS[attempt - 1])
                    retries += 1
                with self._lock:
                    self.total_requests += 1
                try:
                    response = self.session.post(
                        url,
                        json=payload,
                        headers=self._headers(),
                        timeout=self.config.timeout,
                    )
                except requests.Timeout as exc:
                    last_error, timed_out = exc, True
                    continue
                except requests.RequestException as exc:
                    last_error, timed_out = exc, False
                    continue
                if response.status_code in (401, 403):
                    raise AuthFailed(f"{self.name}: HTTP {response.status_code}")
                if response.status_code >= 500:
                    last_error = ProviderUnavailable(
                        f"{self.name}: HTTP {response.status_code}"
                    )
                    timed_out = False
                    continue
                if response.status_code != 200:
                    raise ProviderUnavailable(
                        f"{self.name}: HTTP {response.status_code}: {response.text[:200]}"
                    )
                with self._lock:
                    self.last_retry_count = retries
                return response.json()
        with self._lock:
            self.last_retry_count = retries
        if timed_out:
            raise TimedOut(f"{self.name}: timed out after {self.MAX_ATTEMPTS} attempts")
        raise ProviderUnavailable(
            f"{self.name}: unavailable after {self.MAX_ATTEMPTS} attempts: {last_error}"
        )

    def complete(self, messages: Sequence[Message]) -> str:
        data = self._post(
            "/v1/chat/completions",
            {
                "model": self.config.model_id,
                "messages": list(messages),
                "temperature": self.config.temperature,
            },
        )
        try:
            return data["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"{self.name}: malformed completion payload") from exc

    def embed(self, text: str) -> list[float]:
        data = self._post(
            "/v1/embeddings", {"model": self.config.model_id, "input": text}
        )
        try:
            return list(data["data"][0]["embedding"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"{self.name}: malformed embedding payload") from exc


_backends: dict[BackendConfig, HttpBackend] = {}
_backends_lock = threading.Lock()


def get_backend(config: BackendConfig) -> HttpBackend:
    with _backends_lock:
        backend = _backends.get(config)
        if backend is None:
            backend = _backends[config] = HttpBackend(config)
        return backend


def chat_complete(config: BackendConfig, messages: Sequence[Message]) -> str:
    return get_backend(config).complete(messages)


def embed(config: BackendConfig, text: str) -> list[float]:
    return get_backend(config).embed(text)


class HashedBagEmbedding:
    """Deterministic fallback provider: 256-dim feature-hashed term-frequency
    bag, L2-normalized. Order-free and offline."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dim

    def embed(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        for token in tokenize(text):
            vec[self._bucket(token)] += 1.0
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0:
            return vec
        return [v / norm for v in vec]


class MockBehavior(enum.Enum):
    PERFECT_EXTRACTOR = "PERFECT_EXTRACTOR"
    FLAG_MISSING = "FLAG_MISSING"
    HALLUCINATE = "HALLUCINATE"


_HALLUCINATION_FILLERS = {
    "steps_to_reproduce": ("Perform the usual workflow in the application.",),
    "expected_result": "The feature behaves as documented.",
    "actual_result": "The feature misbehaves in an unspecified way.",
    "additional_information": "Observed on the latest nightly build.",
}


def extract_user_input(messages: Sequence[Message]) -> str:
    """Recover the raw input text from a prompt (Alpaca, synthesis, or plain)."""
    content = ""
    for message in reversed(messages):
        if message.get("role") == "user":
            content = message.get("content", "")
            break
    if "### Input:\n" in content:
        after = content.split("### Input:\n", 1)[1]
        return after.split("\n\n### Response:", 1)[0]
    if "Bug report: " in content:
        return content.split("Bug report: ", 1)[1]
    return content


ScriptType = Union[Mapping[str, str], Callable[[str], str]]


class MockBackend:
    """Deterministic in-process backend; also provides fallback embeddings."""

    def __init__(
        self,
        behavior: MockBehavior = MockBehavior.PERFECT_EXTRACTOR,
        script: Optional[ScriptType] = None,
        dim: int = 256,
    ):
        self.behavior = behavior
        self.script = script
        self._embedder = HashedBagEmbedding(dim)
        self._lock = threading.Lock()
        self.calls: list[str] = []

    @property
    def name(self) -> str:
        if self.script is not None:
            return "mock:scripted"
        return f"mock:{self.behavior.value}"

    def complete(self, messages: Sequence[Message]) -> str:
        text = extract_user_input(messages)
        with self._lock:
            self.calls.append(text)
        if self.script is not None:
            if callable(self.script):
                return self.script(text)
            return self.script[text]
        report = parse_sections(text)
        if self.behavior is MockBehavior.HALLUCINATE:
            filled = {
                "title": report.title or "Untitled report",
                "steps_to_reproduce": list(report.steps_to_reproduce)
                or list(_HALLUCINATION_FILLERS["steps_to_reproduce"]),
                "expected_result": report.expected_result
                or _HALLUCINATION_FILLERS["expected_result"],
                "actual_result": report.actual_result
                or _HALLUCINATION_FILLERS["actual_result"],
                "additional_information": report.additional_information
                or _HALLUCINATION_FILLERS["additional_information"],
                "missing_fields": [],
            }
            return json.dumps(filled)
        # PERFECT_EXTRACTOR and FLAG_MISSING both return the parse verbatim;
        # parse_sections already flags every empty section.
        return report_to_json(report)

    def embed(self, text: str) -> list[float]:
        return self._embedder.embed(text)


def mock_backend(behavior_script: Union[MockBehavior, str, ScriptType, None] = None) -> MockBackend:
    """Build a mock backend from a behavior name, enum, or response script."""
    if behavior_script is None:
        return MockBackend()
    if isinstance(behavior_script, MockBehavior):
        return MockBackend(behavior_script)
    if isinstance(behavior_script, str):
        return MockBackend(MockBehavior[behavior_script.upper()])
    return MockBackend(script=behavior_script)


def generate_report(backend, messages: Sequence[Message]) -> GenerationResult:
    """Run one completion and parse it, timing the call."""
    started = time.monotonic()
    raw = backend.complete(messages)
    latency = time.monotonic() - started
    try:
        report = parse_generation(raw)
    except MalformedGeneration as exc:
        return GenerationResult(raw_text=raw, parse_error=str(exc), latency=latency)
    return GenerationResult(raw_text=raw, report=report, latency=latency)


__all__ = [
    "API_KEY_ENV_PREFIX",
    "BackendConfig",
    "GenerationResult",
    "HashedBagEmbedding",
    "HttpBackend",
    "MockBackend",
    "MockBehavior",
    "PromptBundle",
    "TrainingRecipe",
    "alpaca_instruction",
    "alpaca_system_role",
    "build_alpaca_prompt",
    "build_fewshot_messages",
    "build_synthesis_prompt",
    "chat_complete",
    "embed",
    "extract_user_input",
    "generate_report",
    "get_backend",
    "is_missing_phrase",
    "mock_backend",
    "parse_generation",
]
