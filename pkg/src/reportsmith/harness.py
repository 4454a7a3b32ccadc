"""Evaluation harness for the three experiment suites: generation quality,
missing-information detection via section masking, and section-mapping
fidelity. Emits aggregate.json, rows.csv, and confusion.csv."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from . import ctqrs
from .errors import AuthFailed, IoFailure, NothingToMask, ProviderUnavailable, TimedOut
from .gateway import build_fewshot_messages, generate_report

_PROVIDER_ERRORS = (ProviderUnavailable, TimedOut, AuthFailed)
from .report_model import (
    BODY_SECTIONS,
    SectionKind,
    StructuredReport,
    render_report,
    report_from_dict,
    report_to_dict,
    report_to_json,
)
from .textmetrics import (
    EmbeddingProvider,
    MetricReport,
    compute_metric_report,
    meteor,
    rouge1,
    split_sentences,
    tokenize,
)

SUITES = ("generation", "missing", "mapping")
MASKABLE_SECTIONS = (
    SectionKind.STEPS_TO_REPRODUCE,
    SectionKind.EXPECTED_RESULT,
    SectionKind.ACTUAL_RESULT,
)
MASK_ALIGNMENT_THRESHOLD = 0.5


@dataclass(frozen=True)
class TestCase:
    bug_id: str
    unstructured: str
    gold: StructuredReport


@dataclass(frozen=True)
class EvalRunConfig:
    suite: str
    backend_name: str
    shots: int = 0
    testset_path: Optional[Path] = None
    seed: int = 0
    output_dir: Optional[Path] = None

    def __post_init__(self) -> None:
        if self.suite not in SUITES:
            raise ValueError(f"suite must be one of {SUITES}")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")


def load_testset(path: Path) -> list[TestCase]:
    cases = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        cases.append(
            TestCase(
                bug_id=str(data["bug_id"]),
                unstructured=data["unstructured"],
                gold=report_from_dict(data["gold"]),
            )
        )
    return cases


def save_testset(cases: Sequence[TestCase], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for case in cases:
            fh.write(
                json.dumps(
                    {
                        "bug_id": case.bug_id,
                        "unstructured": case.unstructured,
                        "gold": report_to_dict(case.gold),
                    }
                )
            )
            fh.write("\n")
    return path


@dataclass(frozen=True)
class EvalRow:
    bug_id: str
    variant: str  # "original" or "masked:<section>"
    ctqrs_percent: float
    metric: MetricReport
    parse_failed: bool
    per_section: Optional[Mapping[SectionKind, tuple[float, float]]] = None
    detection: Optional[Mapping[SectionKind, bool]] = None

    def __post_init__(self) -> None:
        if self.parse_failed and self.ctqrs_percent != 0.0:
            raise ValueError("parse_failed rows must score zero")


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total if self.total else 0.0

    def f1(self) -> float:
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0


@dataclass
class AggregateReport:
    suite: str
    backend: str
    shots: int
    n: int
    ctqrs_percent_mean: float
    rouge1_f_mean: float
    meteor_mean: float
    embedding_similarity_mean: Optional[float]
    detection: dict = field(default_factory=dict)
    mapping: dict = field(default_factory=dict)
    parse_failed: int = 0
    mapping_excluded: dict = field(default_factory=dict)
    rule_table: str = ctqrs.RULE_TABLE_VERSION

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "backend": self.backend,
            "shots": self.shots,
            "n": self.n,
            "ctqrs_percent_mean": self.ctqrs_percent_mean,
            "rouge1_f_mean": self.rouge1_f_mean,
            "meteor_mean": self.meteor_mean,
            "embedding_similarity_mean": self.embedding_similarity_mean,
            "detection": self.detection,
            "mapping": self.mapping,
            "parse_failed": self.parse_failed,
            "mapping_excluded": self.mapping_excluded,
            "rule_table": self.rule_table,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "AggregateReport":
        return cls(
            suite=data["suite"],
            backend=data["backend"],
            shots=data["shots"],
            n=data["n"],
            ctqrs_percent_mean=data["ctqrs_percent_mean"],
            rouge1_f_mean=data["rouge1_f_mean"],
            meteor_mean=data["meteor_mean"],
            embedding_similarity_mean=data.get("embedding_similarity_mean"),
            detection=dict(data.get("detection", {})),
            mapping=dict(data.get("mapping", {})),
            parse_failed=data.get("parse_failed", 0),
            mapping_excluded=dict(data.get("mapping_excluded", {})),
            rule_table=data.get("rule_table", ctqrs.RULE_TABLE_VERSION),
        )


@dataclass
class EvalOutcome:
    config: EvalRunConfig
    rows: list[EvalRow]
    aggregate: AggregateReport
    confusion: dict[SectionKind, ConfusionCounts] = field(default_factory=dict)
    partial_error: Optional[str] = None  # set when a provider failure cut the run short


def _id_key(bug_id: str) -> tuple:
    return (0, int(bug_id), "") if bug_id.isdigit() else (1, 0, bug_id)


def _split_shots(
    testset: Sequence[TestCase], shots: int
) -> tuple[list[tuple[str, str]], list[TestCase]]:
    """Reserve the first `shots` cases (by bug id) as few-shot exemplars."""
    ordered = sorted(testset, key=lambda c: _id_key(c.bug_id))
    if shots >= len(ordered):
        raise ValueError(f"{shots} shots leave no cases to evaluate")
    exemplars = [(c.unstructured, report_to_json(c.gold)) for c in ordered[:shots]]
    return exemplars, ordered[shots:]


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _generate(backend, shots: Sequence[tuple[str, str]], unstructured: str):
    messages = build_fewshot_messages(shots, unstructured)
    return generate_report(backend, messages)


def _row_for_result(
    bug_id: str,
    variant: str,
    result,
    gold: StructuredReport,
    provider: Optional[EmbeddingProvider],
    scorer: ctqrs.CtqrsScorer,
    per_section=None,
    detection=None,
) -> EvalRow:
    if result.report is None:
        return EvalRow(
            bug_id=bug_id,
            variant=variant,
            ctqrs_percent=0.0,
            metric=MetricReport.zeros(),
            parse_failed=True,
            per_section=per_section,
            detection=detection,
        )
    breakdown = scorer.score(result.report)
    metric = compute_metric_report(
        render_report(result.report), render_report(gold), provider
    )
    return EvalRow(
        bug_id=bug_id,
        variant=variant,
        ctqrs_percent=ctqrs.score_percent(breakdown),
        metric=metric,
        parse_failed=False,
        per_section=per_section,
        detection=detection,
    )


def _aggregate_rows(
    config: EvalRunConfig, rows: Sequence[EvalRow]
) -> AggregateReport:
    embeddings = [
        r.metric.embedding_similarity
        for r in rows
        if r.metric.embedding_similarity is not None
    ]
    return AggregateReport(
        suite=config.suite,
        backend=config.backend_name,
        shots=config.shots,
        n=len(rows),
        ctqrs_percent_mean=_mean([r.ctqrs_percent for r in rows]),
        rouge1_f_mean=_mean([r.metric.rouge1_f for r in rows]),
        meteor_mean=_mean([r.metric.meteor for r in rows]),
        embedding_similarity_mean=_mean(embeddings) if embeddings else None,
        parse_failed=sum(1 for r in rows if r.parse_failed),
    )


def evaluate_generation(
    backend,
    testset: Sequence[TestCase],
    *,
    shots: int = 0,
    provider: Optional[EmbeddingProvider] = None,
    scorer: Optional[ctqrs.CtqrsScorer] = None,
    seed: int = 0,
) -> EvalOutcome:
    """Prompt, generate, parse, and score every test case; aggregate means."""
    scorer = scorer or ctqrs.default_scorer()
    config = EvalRunConfig(
        suite="generation", backend_name=getattr(backend, "name", "backend"),
        shots=shots, seed=seed,
    )
    exemplars, cases = _split_shots(testset, shots)
    rows = []
    partial_error = None
    for case in cases:
        try:
            result = _generate(backend, exemplars, case.unstructured)
        except _PROVIDER_ERRORS as exc:
            partial_error = str(exc)
            break
        rows.append(
            _row_for_result(case.bug_id, "original", result, case.gold, provider, scorer)
        )
    rows.sort(key=lambda r: (_id_key(r.bug_id), r.variant))
    return EvalOutcome(
        config=config,
        rows=rows,
        aggregate=_aggregate_rows(config, rows),
        partial_error=partial_error,
    )


def mask_section(
    unstructured: str,
    gold: StructuredReport,
    kind: SectionKind,
    threshold: float = MASK_ALIGNMENT_THRESHOLD,
) -> str:
    """Delete every sentence whose unigram content is mostly covered by the
    gold section (ROUGE-1 recall of the sentence against the section text
    above the threshold)."""
    if kind not in MASKABLE_SECTIONS:
        raise ValueError(f"{kind.value} is not maskable")
    section_text = gold.section_text(kind)
    if not section_text.strip():
        raise NothingToMask(f"gold {kind.value} is empty")
    section_tokens = tokenize(section_text)
    removed: list[tuple[int, int]] = []
    for sentence in split_sentences(unstructured):
        sentence_tokens = tokenize(sentence.text)
        if not sentence_tokens:
            continue
        coverage = rouge1(section_tokens, sentence_tokens).recall
        if coverage > threshold:
            removed.append((sentence.start, sentence.end))
    if not removed:
        raise NothingToMask(f"no sentence aligns with {kind.value}")
    kept: list[str] = []
    pos = 0
    for start, end in removed:
        kept.append(unstructured[pos:start])
        pos = end
    kept.append(unstructured[pos:])
    lines = "".join(kept).split("\n")
    return "\n".join(line.rstrip() for line in lines if line.strip())


def missing_detection_eval(
    backend,
    testset: Sequence[TestCase],
    *,
    shots: int = 0,
    provider: Optional[EmbeddingProvider] = None,
    scorer: Optional[ctqrs.CtqrsScorer] = None,
    seed: int = 0,
) -> EvalOutcome:
    """Mask each populated section in turn (positive) and pair it with the
    unmasked original (negative); a prediction is the section appearing in
    the generated report's missing_fields."""
    scorer = scorer or ctqrs.default_scorer()
    config = EvalRunConfig(
        suite="missing", backend_name=getattr(backend, "name", "backend"),
        shots=shots, seed=seed,
    )
    exemplars, cases = _split_shots(testset, shots)
    confusion = {kind: ConfusionCounts() for kind in MASKABLE_SECTIONS}
    rows = []
    skipped = 0
    partial_error = None
    for case in cases:
        try:
            original = _generate(backend, exemplars, case.unstructured)
        except _PROVIDER_ERRORS as exc:
            partial_error = str(exc)
            break
        original_flags = (
            frozenset(original.report.missing_fields) if original.report else frozenset()
        )
        rows.append(
            _row_for_result(
                case.bug_id,
                "original",
                original,
                case.gold,
                provider,
                scorer,
                detection={k: (k in original_flags) for k in MASKABLE_SECTIONS},
            )
        )
        for kind in MASKABLE_SECTIONS:
            if not case.gold.section_text(kind).strip():
                skipped += 1
                continue
            try:
                masked_text = mask_section(case.unstructured, case.gold, kind)
            except NothingToMask:
                skipped += 1
                continue
            try:
                masked = _generate(backend, exemplars, masked_text)
            except _PROVIDER_ERRORS as exc:
                partial_error = str(exc)
                break
            masked_flags = (
                frozenset(masked.report.missing_fields) if masked.report else frozenset()
            )
            rows.append(
                _row_for_result(
                    case.bug_id,
                    f"masked:{kind.value}",
                    masked,
                    case.gold,
                    provider,
                    scorer,
                    detection={k: (k in masked_flags) for k in MASKABLE_SECTIONS},
                )
            )
            counts = confusion[kind]
            if kind in masked_flags:
                counts.tp += 1
            else:
                counts.fn += 1
            if kind in original_flags:
                counts.fp += 1
            else:
                counts.tn += 1
        if partial_error is not None:
            break
    rows.sort(key=lambda r: (_id_key(r.bug_id), r.variant))
    aggregate = _aggregate_rows(config, rows)
    aggregate.detection = {
        kind.value: {"accuracy": counts.accuracy(), "f1": counts.f1()}
        for kind, counts in confusion.items()
    }
    return EvalOutcome(
        config=config,
        rows=rows,
        aggregate=aggregate,
        confusion=confusion,
        partial_error=partial_error,
    )


def mapping_eval(
    backend,
    testset: Sequence[TestCase],
    *,
    shots: int = 0,
    provider: Optional[EmbeddingProvider] = None,
    scorer: Optional[ctqrs.CtqrsScorer] = None,
    seed: int = 0,
) -> EvalOutcome:
    """Per-section ROUGE-1 F and METEOR between generated and gold sections;
    sections missing on either side are excluded and counted."""
    scorer = scorer or ctqrs.default_scorer()
    config = EvalRunConfig(
        suite="mapping", backend_name=getattr(backend, "name", "backend"),
        shots=shots, seed=seed,
    )
    exemplars, cases = _split_shots(testset, shots)
    sums = {kind: [0.0, 0.0, 0] for kind in BODY_SECTIONS}  # rouge, meteor, n
    excluded = {kind: 0 for kind in BODY_SECTIONS}
    rows = []
    partial_error = None
    for case in cases:
        try:
            result = _generate(backend, exemplars, case.unstructured)
        except _PROVIDER_ERRORS as exc:
            partial_error = str(exc)
            break
        per_section: dict[SectionKind, tuple[float, float]] = {}
        for kind in BODY_SECTIONS:
            gold_text = case.gold.section_text(kind)
            gen_text = result.report.section_text(kind) if result.report else ""
            if not gold_text.strip() or not gen_text.strip():
                excluded[kind] += 1
                continue
            gen_tokens = tokenize(gen_text)
            gold_tokens = tokenize(gold_text)
            pair = (rouge1(gen_tokens, gold_tokens).f1, meteor(gen_tokens, gold_tokens))
            per_section[kind] = pair
            sums[kind][0] += pair[0]
            sums[kind][1] += pair[1]
            sums[kind][2] += 1
        rows.append(
            _row_for_result(
                case.bug_id, "original", result, case.gold, provider, scorer,
                per_section=per_section,
            )
        )
    rows.sort(key=lambda r: (_id_key(r.bug_id), r.variant))
    aggregate = _aggregate_rows(config, rows)
    aggregate.mapping = {
        kind.value: {
            "rouge1_f": sums[kind][0] / sums[kind][2] if sums[kind][2] else 0.0,
            "meteor": sums[kind][1] / sums[kind][2] if sums[kind][2] else 0.0,
        }
        for kind in BODY_SECTIONS
    }
    aggregate.mapping_excluded = {kind.value: excluded[kind] for kind in BODY_SECTIONS}
    return EvalOutcome(
        config=config, rows=rows, aggregate=aggregate, partial_error=partial_error
    )


def run_suite(
    suite: str,
    backend,
    testset: Sequence[TestCase],
    *,
    shots: int = 0,
    provider: Optional[EmbeddingProvider] = None,
    seed: int = 0,
) -> EvalOutcome:
    if suite == "generation":
        return evaluate_generation(backend, testset, shots=shots, provider=provider, seed=seed)
    if suite == "missing":
        return missing_detection_eval(backend, testset, shots=shots, provider=provider, seed=seed)
    if suite == "mapping":
        return mapping_eval(backend, testset, shots=shots, provider=provider, seed=seed)
    raise ValueError(f"unknown suite {suite!r}")


ROWS_HEADER = (
    ["bug_id", "variant", "parse_failed", "ctqrs_percent", "rouge1_p", "rouge1_r",
     "rouge1_f", "meteor", "cosine_tf", "embedding_similarity"]
    + [f"{kind.value}_rouge1_f" for kind in BODY_SECTIONS]
    + [f"{kind.value}_meteor" for kind in BODY_SECTIONS]
    + [f"{kind.value}_flagged" for kind in BODY_SECTIONS]
)

CONFUSION_HEADER = ["section", "tp", "fp", "fn", "tn", "accuracy", "f1"]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _row_record(row: EvalRow) -> list[str]:
    record = [
        row.bug_id,
        row.variant,
        _fmt(row.parse_failed),
        _fmt(row.ctqrs_percent),
        _fmt(row.metric.rouge1_precision),
        _fmt(row.metric.rouge1_recall),
        _fmt(row.metric.rouge1_f),
        _fmt(row.metric.meteor),
        _fmt(row.metric.cosine_tf),
        _fmt(row.metric.embedding_similarity),
    ]
    for kind in BODY_SECTIONS:
        pair = (row.per_section or {}).get(kind)
        record.append(_fmt(pair[0]) if pair else "")
    for kind in BODY_SECTIONS:
        pair = (row.per_section or {}).get(kind)
        record.append(_fmt(pair[1]) if pair else "")
    for kind in BODY_SECTIONS:
        flags = row.detection or {}
        record.append(_fmt(flags.get(kind)) if kind in flags else "")
    return record


def emit_report(outcome: EvalOutcome, output_dir: Path) -> dict[str, Path]:
    """Write aggregate.json, rows.csv, and confusion.csv; same inputs always
    produce byte-identical files."""
    output_dir = Path(output_dir)
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        aggregate_path = output_dir / "aggregate.json"
        aggregate_path.write_text(
            json.dumps(outcome.aggregate.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        rows_path = output_dir / "rows.csv"
        with rows_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(ROWS_HEADER)
            for row in outcome.rows:
                writer.writerow(_row_record(row))
        confusion_path = output_dir / "confusion.csv"
        with confusion_path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CONFUSION_HEADER)
            for kind in MASKABLE_SECTIONS:
                counts = outcome.confusion.get(kind)
                if counts is None:
                    continue
                writer.writerow(
                    [kind.value, counts.tp, counts.fp, counts.fn, counts.tn,
                     _fmt(counts.accuracy()), _fmt(counts.f1())]
                )
    except OSError as exc:
        raise IoFailure(f"writing harness outputs to {output_dir}: {exc}") from exc
    return {
        "aggregate": aggregate_path,
        "rows": rows_path,
        "confusion": confusion_path,
    }
