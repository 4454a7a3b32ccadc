"""Bugzilla mining, the report filter chain, pseudo-ground-truth synthesis,
deterministic splitting, and instruction-tuning JSONL export."""

from __future__ import annotations

import json
import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import requests

from . import ctqrs
from .errors import IoFailure, PartialFetch, ProviderUnavailable, RetentionFailed
from .gateway import TrainingRecipe, build_synthesis_prompt
from .report_model import (
    BODY_SECTIONS,
    StructuredReport,
    detect_artifacts,
    json_to_report,
    parse_sections,
    render_report,
    report_to_json,
)
from .textmetrics import EmbeddingProvider, cosine_tf, embedding_similarity, tokenize


@dataclass(frozen=True)
class BugComment:
    comment_id: int
    author: str
    created: str
    text: str


@dataclass(frozen=True)
class BugzillaBug:
    bug_id: int
    status: str
    resolution: str
    comments: tuple[BugComment, ...]
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.comments:
            raise ValueError(f"bug {self.bug_id} has no comments")

    @property
    def description(self) -> str:
        return self.comments[0].text

    def to_dict(self) -> dict:
        return {
            "bug_id": self.bug_id,
            "status": self.status,
            "resolution": self.resolution,
            "comments": [
                {
                    "comment_id": c.comment_id,
                    "author": c.author,
                    "created": c.created,
                    "text": c.text,
                }
                for c in self.comments
            ],
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BugzillaBug":
        return cls(
            bug_id=data["bug_id"],
            status=data.get("status", ""),
            resolution=data.get("resolution", ""),
            comments=tuple(
                BugComment(
                    comment_id=c.get("comment_id", 0),
                    author=c.get("author", ""),
                    created=c.get("created", ""),
                    text=c.get("text", ""),
                )
                for c in data.get("comments", [])
            ),
            meta=data.get("meta", {}),
        )


@dataclass(frozen=True)
class RejectionReason:
    kind: str  # missing_section | code_artifacts | low_ctqrs
    detail: str = ""

    def label(self) -> str:
        return f"{self.kind}({self.detail})" if self.detail else self.kind


@dataclass(frozen=True)
class FilterOutcome:
    bug_id: int
    accepted: bool
    rejection_reason: Optional[RejectionReason] = None
    report: Optional[StructuredReport] = None

    def __post_init__(self) -> None:
        if self.accepted == (self.rejection_reason is not None):
            raise ValueError("accepted XOR rejection_reason must hold")


class RateLimiter:
    """Minimum-interval limiter shared across fetch workers."""

    def __init__(self, min_interval: float):
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next_at = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next_at - now
            self._next_at = max(now, self._next_at) + self.min_interval
        if delay > 0:
            time.sleep(delay)


def _load_cursor(path: Optional[Path], since: str) -> int:
    if path is None or not Path(path).exists():
        return 0
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        return 0
    if data.get("last_change_time") != since:
        return 0
    return int(data.get("offset", 0))


def _save_cursor(path: Optional[Path], since: str, offset: int) -> None:
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps({"last_change_time": since, "offset": offset}), encoding="utf-8"
    )


def fetch_fixed_bugs(
    base_url: str,
    since: str,
    limit: int,
    *,
    statuses: Sequence[str] = ("RESOLVED", "VERIFIED"),
    resolution: str = "FIXED",
    page_size: int = 100,
    cursor_path: Optional[Path] = None,
    session: Optional[requests.Session] = None,
    concurrency: int = 4,
    min_request_interval: float = 0.0,
    timeout: float = 30.0,
) -> list[BugzillaBug]:
    """Page fixed/closed bugs plus their comments from a Bugzilla REST endpoint.

    Resumable: progress is checkpointed to cursor_path, and a mid-run failure
    raises PartialFetch carrying the fetched prefix and the resume cursor.
    """
    if limit <= 0:
        return []
    session = session or requests.Session()
    limiter = RateLimiter(min_request_interval)
    offset = _load_cursor(cursor_path, since)
    fetched: list[BugzillaBug] = []

    def fail(message: str) -> PartialFetch:
        _save_cursor(cursor_path, since, offset + len(fetched))
        cursor = {"last_change_time": since, "offset": offset + len(fetched)}
        if fetched or offset:
            return PartialFetch(message, list(fetched), cursor)
        return ProviderUnavailable(message)

    def fetch_comments(stub: Mapping) -> BugzillaBug:
        limiter.wait()
        bug_id = stub["id"]
        response = session.get(
            f"{base_url.rstrip('/')}/rest/bug/{bug_id}/comment", timeout=timeout
        )
        response.raise_for_status()
        payload = response.json()
        comments = tuple(
            BugComment(
                comment_id=c.get("id", 0),
                author=c.get("creator", c.get("author", "")),
                created=c.get("creation_time", ""),
                text=c.get("text", ""),
            )
            for c in payload["bugs"][str(bug_id)]["comments"]
        )
        meta_keys = ("priority", "severity", "product", "component")
        return BugzillaBug(
            bug_id=bug_id,
            status=stub.get("status", ""),
            resolution=stub.get("resolution", ""),
            comments=comments,
            meta={k: str(stub[k]) for k in meta_keys if k in stub},
        )

    while len(fetched) < limit:
        page_limit = min(page_size, limit - len(fetched))
        params = [("status", s) for s in statuses]
        params += [
            ("resolution", resolution),
            ("last_change_time", since),
            ("limit", str(page_limit)),
            ("offset", str(offset + len(fetched))),
        ]
        limiter.wait()
        try:
            response = session.get(
                f"{base_url.rstrip('/')}/rest/bug", params=params, timeout=timeout
            )
            response.raise_for_status()
            stubs = response.json().get("bugs", [])
        except requests.RequestException as exc:
            raise fail(f"bug listing failed: {exc}")
        if not stubs:
            break
        page_bugs: list[Optional[BugzillaBug]] = [None] * len(stubs)
        error: Optional[Exception] = None
        with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
            futures = {pool.submit(fetch_comments, stub): i for i, stub in enumerate(stubs)}
            for future, index in futures.items():
                try:
                    page_bugs[index] = future.result()
                except Exception as exc:  # noqa: BLE001 - re-raised as PartialFetch
                    error = error or exc
        for bug in page_bugs:
            if bug is None:
                break
            fetched.append(bug)
            if len(fetched) >= limit:
                break
        if error is not None and len(fetched) < limit:
            raise fail(f"comment fetch failed: {error}")
        _save_cursor(cursor_path, since, offset + len(fetched))
        if len(stubs) < page_limit:
            break
    return fetched


def filter_report(
    bug: BugzillaBug, scorer: Optional[ctqrs.CtqrsScorer] = None
) -> FilterOutcome:
    """Apply the filter chain: section completeness, artifact exclusion, then
    the quality bar (CTQRS must exceed 14)."""
    parsed = parse_sections(bug.description)
    for kind in BODY_SECTIONS:
        if kind in parsed.missing_fields:
            return FilterOutcome(
                bug.bug_id,
                accepted=False,
                rejection_reason=RejectionReason("missing_section", kind.value),
            )
    if detect_artifacts(bug.description):
        return FilterOutcome(
            bug.bug_id, accepted=False, rejection_reason=RejectionReason("code_artifacts")
        )
    breakdown = (scorer or ctqrs.default_scorer()).score(parsed)
    if breakdown.total <= 14:
        return FilterOutcome(
            bug.bug_id,
            accepted=False,
            rejection_reason=RejectionReason("low_ctqrs", str(breakdown.total)),
        )
    return FilterOutcome(bug.bug_id, accepted=True, report=parsed)


@dataclass
class FilterSummary:
    outcomes: list[FilterOutcome]

    @property
    def accepted(self) -> list[FilterOutcome]:
        return [o for o in self.outcomes if o.accepted]

    @property
    def rejected(self) -> list[FilterOutcome]:
        return [o for o in self.outcomes if not o.accepted]

    def counts(self) -> dict[str, int]:
        counts = {"fetched": len(self.outcomes), "accepted": len(self.accepted)}
        for outcome in self.rejected:
            key = outcome.rejection_reason.kind
            counts[key] = counts.get(key, 0) + 1
        return counts


def filter_corpus(
    bugs: Sequence[BugzillaBug], scorer: Optional[ctqrs.CtqrsScorer] = None
) -> FilterSummary:
    scorer = scorer or ctqrs.default_scorer()
    return FilterSummary([filter_report(bug, scorer) for bug in bugs])


@dataclass(frozen=True)
class SynthesisConfig:
    attempts: int = 3
    embedding_min: float = 0.85  # exclusive
    cosine_min: float = 0.80  # exclusive

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        for value in (self.embedding_min, self.cosine_min):
            if not 0 < value < 1:
                raise ValueError("thresholds must lie in (0, 1)")

    def retains(self, embedding_score: float, cosine_score: float) -> bool:
        """Strict gates: both similarities must exceed their thresholds."""
        return embedding_score > self.embedding_min and cosine_score > self.cosine_min

    def to_dict(self) -> dict:
        return {
            "attempts": self.attempts,
            "embedding_min": self.embedding_min,
            "cosine_min": self.cosine_min,
        }


@dataclass(frozen=True)
class SynthesisResult:
    text: str
    embedding_score: float
    cosine_score: float
    attempts_used: int
    attempt_log: tuple[dict, ...]


def synthesize_unstructured(
    backend,
    report: StructuredReport,
    cfg: SynthesisConfig,
    provider: EmbeddingProvider,
) -> SynthesisResult:
    """Generate a casual rewrite of the rendered report, retrying up to
    cfg.attempts times until both similarity gates pass."""
    reference = render_report(report)
    prompt = build_synthesis_prompt(reference)
    messages = [{"role": "user", "content": prompt}]
    ref_tokens = tokenize(reference)
    log: list[dict] = []
    for attempt in range(1, cfg.attempts + 1):
        candidate = backend.complete(messages).strip()
        emb = embedding_similarity(provider, candidate, reference)
        cos = cosine_tf(tokenize(candidate), ref_tokens)
        log.append({"attempt": attempt, "embedding": emb, "cosine": cos})
        if cfg.retains(emb, cos):
            return SynthesisResult(
                text=candidate,
                embedding_score=emb,
                cosine_score=cos,
                attempts_used=attempt,
                attempt_log=tuple(log),
            )
    raise RetentionFailed(
        f"no candidate cleared embedding>{cfg.embedding_min} and cosine>{cfg.cosine_min} "
        f"in {cfg.attempts} attempts",
        attempts=log,
    )


@dataclass(frozen=True)
class SplitRatios:
    train: float = 0.8
    test: float = 0.1
    validation: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        total = self.train + self.test + self.validation
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"ratios must sum to 1, got {total}")
        if min(self.train, self.test, self.validation) < 0:
            raise ValueError("ratios must be non-negative")

    def to_dict(self) -> dict:
        return {
            "train": self.train,
            "test": self.test,
            "validation": self.validation,
            "seed": self.seed,
        }


def split_sizes(n: int, ratios: SplitRatios) -> tuple[int, int, int]:
    """floor for train; the remainder goes ceil-half to test, rest to validation."""
    train_n = math.floor(ratios.train * n)
    remainder = n - train_n
    tail = ratios.test + ratios.validation
    test_share = ratios.test / tail if tail > 0 else 0.0
    test_n = math.ceil(remainder * test_share)
    return train_n, test_n, remainder - test_n


def split_dataset(records: Sequence, ratios: SplitRatios) -> tuple[list, list, list]:
    """Seeded uniform shuffle, then partition by the rounding rule above."""
    if not records:
        raise ValueError("records must be non-empty")
    shuffled = list(records)
    random.Random(ratios.seed).shuffle(shuffled)
    train_n, test_n, val_n = split_sizes(len(shuffled), ratios)
    train = shuffled[:train_n]
    test = shuffled[train_n : train_n + test_n]
    validation = shuffled[train_n + test_n :]
    assert len(validation) == val_n
    return train, test, validation


@dataclass(frozen=True)
class InstructionExample:
    instruction: str
    input: str
    output: str
    provenance: Mapping[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"instruction": self.instruction, "input": self.input, "output": self.output}


def make_instruction_example(
    bug_id: int,
    unstructured: str,
    report: StructuredReport,
    synthesis: SynthesisResult,
    cfg: SynthesisConfig,
    instruction: str,
) -> InstructionExample:
    output = report_to_json(report)
    json_to_report(output)  # output must round-trip
    if not cfg.retains(synthesis.embedding_score, synthesis.cosine_score):
        raise ValueError("similarity scores below retention thresholds")
    return InstructionExample(
        instruction=instruction,
        input=unstructured,
        output=output,
        provenance={
            "bug_id": bug_id,
            "embedding_score": synthesis.embedding_score,
            "cosine_score": synthesis.cosine_score,
        },
    )


def export_instruction_jsonl(
    split: Sequence[InstructionExample],
    path: Path,
    *,
    synthesis: Optional[SynthesisConfig] = None,
    recipe: Optional[TrainingRecipe] = None,
    split_ratios: Optional[SplitRatios] = None,
) -> Path:
    """Write one {"instruction","input","output"} object per line, plus a
    metadata.json sidecar carrying the training recipe and pipeline config."""
    if not split:
        raise ValueError("split must be non-empty")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as fh:
            for example in split:
                fh.write(json.dumps(example.to_dict()))
                fh.write("\n")
        metadata = {
            "training_recipe": (recipe or TrainingRecipe()).to_dict(),
            "rule_table": ctqrs.RULE_TABLE_VERSION,
            "synthesis": (synthesis or SynthesisConfig()).to_dict(),
        }
        if split_ratios is not None:
            metadata["split"] = split_ratios.to_dict()
        sidecar = path.parent / "metadata.json"
        sidecar.write_text(json.dumps(metadata, indent=2), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"writing {path}: {exc}") from exc
    return path


def load_instruction_jsonl(path: Path) -> list[InstructionExample]:
    examples = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        examples.append(
            InstructionExample(
                instruction=data["instruction"],
                input=data["input"],
                output=data["output"],
            )
        )
    return examples
