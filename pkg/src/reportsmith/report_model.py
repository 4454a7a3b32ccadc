"""Bug-report document model: template section parsing, artifact detection,
rendering, and the JSON wire format."""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import MalformedDocument

MISSING_MARKER = "<MISSING>"


class SectionKind(enum.Enum):
    TITLE = "title"
    STEPS_TO_REPRODUCE = "steps_to_reproduce"
    EXPECTED_RESULT = "expected_result"
    ACTUAL_RESULT = "actual_result"
    ADDITIONAL_INFORMATION = "additional_information"


# The four flaggable sections, in canonical order. Title is never flagged.
BODY_SECTIONS = (
    SectionKind.STEPS_TO_REPRODUCE,
    SectionKind.EXPECTED_RESULT,
    SectionKind.ACTUAL_RESULT,
    SectionKind.ADDITIONAL_INFORMATION,
)

# Bugzilla corpora mix these header spellings; matched case-insensitively,
# either as `alias: ...` or as a line that is exactly the alias.
HEADER_ALIASES: dict[SectionKind, tuple[str, ...]] = {
    SectionKind.TITLE: ("title",),
    SectionKind.STEPS_TO_REPRODUCE: (
        "steps to reproduce",
        "str",
        "reproduction steps",
        "steps",
    ),
    SectionKind.EXPECTED_RESULT: (
        "expected results",
        "expected result",
        "expected behavior",
        "expected",
    ),
    SectionKind.ACTUAL_RESULT: (
        "actual results",
        "actual result",
        "actual behavior",
        "observed behavior",
        "actual",
    ),
    SectionKind.ADDITIONAL_INFORMATION: (
        "additional information",
        "additional info",
        "environment",
    ),
}

_STEP_PREFIX_RE = re.compile(r"^\s*(?:\d+[.)]|[-*•])\s+")
_MAX_FALLBACK_TITLE_LEN = 120


@dataclass(frozen=True)
class StructuredReport:
    """Canonical five-field bug report plus missing-field flags."""

    title: str = ""
    steps_to_reproduce: tuple[str, ...] = ()
    expected_result: str = ""
    actual_result: str = ""
    additional_information: str = ""
    missing_fields: frozenset[SectionKind] = frozenset()

    def __post_init__(self) -> None:
        steps = tuple(s.strip() for s in self.steps_to_reproduce if s.strip())
        object.__setattr__(self, "steps_to_reproduce", steps)
        flags = frozenset(self.missing_fields) - {SectionKind.TITLE}
        object.__setattr__(self, "missing_fields", flags)
        for kind in flags:
            if self.section_text(kind):
                raise ValueError(f"{kind.value} flagged missing but non-empty")

    def section_text(self, kind: SectionKind) -> str:
        if kind is SectionKind.TITLE:
            return self.title
        if kind is SectionKind.STEPS_TO_REPRODUCE:
            return "\n".join(self.steps_to_reproduce)
        if kind is SectionKind.EXPECTED_RESULT:
            return self.expected_result
        if kind is SectionKind.ACTUAL_RESULT:
            return self.actual_result
        return self.additional_information

    def normalized(self) -> "StructuredReport":
        """Flag every empty body section (the parse_sections convention)."""
        flags = frozenset(k for k in BODY_SECTIONS if not self.section_text(k))
        return StructuredReport(
            title=self.title.strip(),
            steps_to_reproduce=self.steps_to_reproduce,
            expected_result=self.expected_result.strip(),
            actual_result=self.actual_result.strip(),
            additional_information=self.additional_information.strip(),
            missing_fields=flags,
        )


@dataclass(frozen=True)
class RawReport:
    """Free-form reporter text, optionally tagged with its origin."""

    body: str
    source_id: Optional[str] = None
    source_meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.body.strip():
            raise ValueError("RawReport body is empty")


class ArtifactKind(enum.Enum):
    STACK_TRACE = "stack_trace"
    CODE_SNIPPET = "code_snippet"


@dataclass(frozen=True)
class ArtifactSpan:
    kind: ArtifactKind
    start: int
    end: int

    def __post_init__(self) -> None:
        if not 0 <= self.start < self.end:
            raise ValueError(f"bad span [{self.start}, {self.end})")


def _match_header(line: str) -> Optional[tuple[SectionKind, str]]:
    """Return (kind, same-line content) when the line is a section header."""
    stripped = line.strip().lstrip("#").strip()
    if not stripped:
        return None
    lowered = stripped.lower()
    for kind, aliases in HEADER_ALIASES.items():
        for alias in aliases:
            if lowered == alias:
                return kind, ""
            if lowered.startswith(alias):
                rest = stripped[len(alias) :]
                if rest.startswith(":"):
                    return kind, rest[1:].strip()
    return None


def _split_steps(lines: list[str]) -> list[str]:
    steps: list[str] = []
    for line in lines:
        if not line.strip():
            continue
        if _STEP_PREFIX_RE.match(line):
            steps.append(_STEP_PREFIX_RE.sub("", line, count=1).strip())
        elif steps:
            steps[-1] = f"{steps[-1]} {line.strip()}"
        else:
            steps.append(line.strip())
    return [s for s in steps if s]


def _block_text(lines: list[str]) -> str:
    text = "\n".join(lines).strip()
    return "" if text == MISSING_MARKER else text


def parse_sections(body: str) -> StructuredReport:
    """Extract template sections from raw text.

    Each section is filled from the first block whose header matches one of
    its aliases; sections with no block (or an empty one) are flagged in
    missing_fields. Total: any text, however messy, yields a report.
    """
    lines = body.split("\n")
    preamble: list[str] = []
    blocks: list[tuple[SectionKind, list[str]]] = []
    current: Optional[list[str]] = None
    for line in lines:
        header = _match_header(line)
        if header is not None:
            kind, inline = header
            current = [inline] if inline else []
            blocks.append((kind, current))
        elif current is not None:
            current.append(line)
        else:
            preamble.append(line)

    first_block: dict[SectionKind, list[str]] = {}
    for kind, block_lines in blocks:
        first_block.setdefault(kind, block_lines)

    title = ""
    if SectionKind.TITLE in first_block:
        block = first_block[SectionKind.TITLE]
        for line in block:
            if line.strip():
                title = line.strip()
                break
    elif blocks:
        for line in preamble:
            candidate = line.strip()
            if candidate:
                if len(candidate) <= _MAX_FALLBACK_TITLE_LEN:
                    title = candidate
                break
    if title == MISSING_MARKER:
        title = ""

    steps_lines = first_block.get(SectionKind.STEPS_TO_REPRODUCE, [])
    steps = () if _block_text(steps_lines) == "" else tuple(_split_steps(steps_lines))
    report = StructuredReport(
        title=title,
        steps_to_reproduce=steps,
        expected_result=_block_text(first_block.get(SectionKind.EXPECTED_RESULT, [])),
        actual_result=_block_text(first_block.get(SectionKind.ACTUAL_RESULT, [])),
        additional_information=_block_text(
            first_block.get(SectionKind.ADDITIONAL_INFORMATION, [])
        ),
    )
    return report.normalized()


_FRAME_RES = (
    re.compile(r"^\s*at\s+[\w$.<>\[\]/]+\s*\(.*\)\s*$"),
    re.compile(r"^\s*#\d+\s+0x[0-9a-fA-F]+"),
)
_FENCE_RE = re.compile(r"^\s*```")
_CODE_CHARS = set(";{}()=")
_MIN_RUN = 3
_MIN_CODE_DENSITY = 2.0


def _line_offsets(body: str) -> list[tuple[str, int, int]]:
    out = []
    offset = 0
    for line in body.split("\n"):
        out.append((line, offset, offset + len(line)))
        offset += len(line) + 1
    return out


def detect_artifacts(body: str) -> list[ArtifactSpan]:
    """Find stack traces and code blocks; spans are sorted and non-overlapping."""
    lines = _line_offsets(body)
    candidates: list[ArtifactSpan] = []

    fence_open: Optional[int] = None
    for line, start, end in lines:
        if _FENCE_RE.match(line):
            if fence_open is None:
                fence_open = start
            else:
                candidates.append(ArtifactSpan(ArtifactKind.CODE_SNIPPET, fence_open, end))
                fence_open = None
    if fence_open is not None and len(body) > fence_open:
        candidates.append(ArtifactSpan(ArtifactKind.CODE_SNIPPET, fence_open, len(body)))

    def flush_run(run: list[tuple[str, int, int]], kind: ArtifactKind, check_density: bool):
        if len(run) < _MIN_RUN:
            return
        if check_density:
            punct = sum(1 for line, _, _ in run for c in line if c in _CODE_CHARS)
            if punct / len(run) < _MIN_CODE_DENSITY:
                return
        candidates.append(ArtifactSpan(kind, run[0][1], run[-1][2]))

    frame_run: list[tuple[str, int, int]] = []
    indent_run: list[tuple[str, int, int]] = []
    for line, start, end in lines:
        if any(r.match(line) for r in _FRAME_RES):
            frame_run.append((line, start, end))
        else:
            flush_run(frame_run, ArtifactKind.STACK_TRACE, False)
            frame_run = []
        if line.startswith("    ") and line.strip():
            indent_run.append((line, start, end))
        else:
            flush_run(indent_run, ArtifactKind.CODE_SNIPPET, True)
            indent_run = []
    flush_run(frame_run, ArtifactKind.STACK_TRACE, False)
    flush_run(indent_run, ArtifactKind.CODE_SNIPPET, True)

    candidates.sort(key=lambda s: (s.start, -s.end))
    spans: list[ArtifactSpan] = []
    for span in candidates:
        if spans and span.start < spans[-1].end:
            continue
        spans.append(span)
    return spans


def render_report(report: StructuredReport) -> str:
    """Emit the canonical template text (inverse of parse_sections)."""
    lines = [f"Title: {report.title}".rstrip()]
    lines.append("Steps to Reproduce:")
    if SectionKind.STEPS_TO_REPRODUCE in report.missing_fields:
        lines.append(MISSING_MARKER)
    else:
        lines.extend(f"{i}. {step}" for i, step in enumerate(report.steps_to_reproduce, 1))
    for header, kind, text in (
        ("Expected Results:", SectionKind.EXPECTED_RESULT, report.expected_result),
        ("Actual Results:", SectionKind.ACTUAL_RESULT, report.actual_result),
        ("Additional Information:", SectionKind.ADDITIONAL_INFORMATION, report.additional_information),
    ):
        lines.append(header)
        if kind in report.missing_fields:
            lines.append(MISSING_MARKER)
        elif text:
            lines.append(text)
    return "\n".join(lines) + "\n"


def report_to_dict(report: StructuredReport) -> dict:
    return {
        "title": report.title,
        "steps_to_reproduce": list(report.steps_to_reproduce),
        "expected_result": report.expected_result,
        "actual_result": report.actual_result,
        "additional_information": report.additional_information,
        "missing_fields": [k.value for k in BODY_SECTIONS if k in report.missing_fields],
    }


def report_to_json(report: StructuredReport, indent: Optional[int] = None) -> str:
    return json.dumps(report_to_dict(report), indent=indent)


def _expect_str(data: Mapping, key: str) -> str:
    value = data.get(key, "")
    if not isinstance(value, str):
        raise MalformedDocument(f"field {key!r} must be a string")
    return value


def report_from_dict(data: Mapping) -> StructuredReport:
    if not isinstance(data, Mapping):
        raise MalformedDocument("report document must be a JSON object")
    steps = data.get("steps_to_reproduce", [])
    if isinstance(steps, str):
        steps = [steps] if steps.strip() else []
    if not isinstance(steps, list) or not all(isinstance(s, str) for s in steps):
        raise MalformedDocument("steps_to_reproduce must be a list of strings")
    raw_flags = data.get("missing_fields", [])
    if not isinstance(raw_flags, list) or not all(isinstance(f, str) for f in raw_flags):
        raise MalformedDocument("missing_fields must be a list of strings")
    by_value = {k.value: k for k in BODY_SECTIONS}
    flags = frozenset(by_value[f] for f in raw_flags if f in by_value)
    try:
        return StructuredReport(
            title=_expect_str(data, "title"),
            steps_to_reproduce=tuple(steps),
            expected_result=_expect_str(data, "expected_result"),
            actual_result=_expect_str(data, "actual_result"),
            additional_information=_expect_str(data, "additional_information"),
            missing_fields=flags,
        )
    except ValueError as exc:
        raise MalformedDocument(str(exc)) from exc


def json_to_report(text: str) -> StructuredReport:
    """Parse the wire-format JSON object; unknown keys are ignored."""
    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedDocument(f"not a JSON document: {exc}") from exc
    if not isinstance(data, dict):
        raise MalformedDocument("top-level JSON value must be an object")
    return report_from_dict(data)


def iter_section_texts(report: StructuredReport) -> Iterable[tuple[SectionKind, str]]:
    for kind in BODY_SECTIONS:
        yield kind, report.section_text(kind)
