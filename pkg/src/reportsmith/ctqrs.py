"""Deterministic 13-rule bug-report quality score, 17 points total.

Rules fall into three indicator categories: morphological (M1-M4, 4 pts),
relational (RL1-RL5, 7 pts), and analytical (A1-A4, 6 pts). Scoring uses
term lexicons shipped as data files instead of dependency parsing, so it is
deterministic and runs offline.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .report_model import StructuredReport
from .textmetrics import Sentence, split_sentences, stem, tokenize

RULE_TABLE_VERSION = "rule_table_v1"
MAX_TOTAL = 17


class RuleId(enum.Enum):
    M1 = "M1"
    M2 = "M2"
    M3 = "M3"
    M4 = "M4"
    RL1 = "RL1"
    RL2 = "RL2"
    RL3 = "RL3"
    RL4 = "RL4"
    RL5 = "RL5"
    A1 = "A1"
    A2 = "A2"
    A3 = "A3"
    A4 = "A4"


RULE_CATEGORY = {
    RuleId.M1: "morphological",
    RuleId.M2: "morphological",
    RuleId.M3: "morphological",
    RuleId.M4: "morphological",
    RuleId.RL1: "relational",
    RuleId.RL2: "relational",
    RuleId.RL3: "relational",
    RuleId.RL4: "relational",
    RuleId.RL5: "relational",
    RuleId.A1: "analytical",
    RuleId.A2: "analytical",
    RuleId.A3: "analytical",
    RuleId.A4: "analytical",
}

RULE_PROPERTY = {
    RuleId.M1: "conciseness",
    RuleId.M2: "understandability",
    RuleId.M3: "understandability",
    RuleId.M4: "conciseness",
    RuleId.RL1: "completeness",
    RuleId.RL2: "atomicity",
    RuleId.RL3: "completeness",
    RuleId.RL4: "completeness",
    RuleId.RL5: "completeness",
    RuleId.A1: "reproducibility",
    RuleId.A2: "reproducibility",
    RuleId.A3: "reproducibility",
    RuleId.A4: "reproducibility",
}

RULE_MAX = {
    RuleId.M1: 1,
    RuleId.M2: 1,
    RuleId.M3: 1,
    RuleId.M4: 1,
    RuleId.RL1: 2,
    RuleId.RL2: 1,
    RuleId.RL3: 1,
    RuleId.RL4: 1,
    RuleId.RL5: 2,
    RuleId.A1: 2,
    RuleId.A2: 1,
    RuleId.A3: 2,
    RuleId.A4: 1,
}


@dataclass(frozen=True)
class RuleResult:
    rule: RuleId
    points_awarded: int
    points_max: int
    evidence: str

    def __post_init__(self) -> None:
        if not 0 <= self.points_awarded <= self.points_max:
            raise ValueError(f"{self.rule.value}: {self.points_awarded}/{self.points_max}")


@dataclass(frozen=True)
class CtqrsBreakdown:
    results: tuple[RuleResult, ...]
    total: int
    max_total: int = MAX_TOTAL

    def result(self, rule: RuleId) -> RuleResult:
        for r in self.results:
            if r.rule is rule:
                return r
        raise KeyError(rule)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "max_total": self.max_total,
            "rule_table": RULE_TABLE_VERSION,
            "rules": [
                {
                    "rule": r.rule.value,
                    "points": r.points_awarded,
                    "max": r.points_max,
                    "evidence": r.evidence,
                }
                for r in self.results
            ],
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def score_percent(breakdown: CtqrsBreakdown) -> float:
    """Fraction of the 17 available points, full precision."""
    return breakdown.total / breakdown.max_total


class TermSet:
    """Lexicon terms matched by surface or stem equality."""

    def __init__(self, terms: Iterable[str]):
        self.terms = frozenset(t.lower() for t in terms)
        self.stems = frozenset(stem(t) for t in self.terms)

    def matches(self, token: str) -> bool:
        return token in self.terms or stem(token) in self.stems

    def first_hit(self, tokens: Sequence[str]) -> Optional[str]:
        for tok in tokens:
            if self.matches(tok):
                return tok
        return None

    def __len__(self) -> int:
        return len(self.terms)


def load_lexicon_file(path: Path) -> list[str]:
    """One lowercase term per line; '#' starts a comment."""
    terms = []
    for line in path.read_text(encoding="utf-8").splitlines():
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            terms.append(entry)
    return terms


_LEXICON_NAMES = ("action_verbs", "ui_nouns", "defect_terms", "artifact_nouns")


def _default_lexicon_dir() -> Path:
    return Path(str(resources.files("reportsmith").joinpath("data/lexicons")))


@dataclass(frozen=True)
class Lexicons:
    action_verbs: TermSet
    ui_nouns: TermSet
    defect_terms: TermSet
    artifact_nouns: TermSet

    @classmethod
    def load(cls, paths: Optional[Mapping[str, Path]] = None) -> "Lexicons":
        base = _default_lexicon_dir()
        resolved = {}
        for name in _LEXICON_NAMES:
            path = Path(paths[name]) if paths and name in paths else base / f"{name}.txt"
            resolved[name] = TermSet(load_lexicon_file(path))
        return cls(**resolved)


# Environment-information patterns for RL5. The screenshot/attachment pattern
# stands in for the original screenshot indicator on a text-only corpus.
ENV_PATTERNS: tuple[tuple[str, re.Pattern], ...] = (
    ("version", re.compile(r"\bversions?\b|\bv\d+\.\d", re.IGNORECASE)),
    ("build", re.compile(r"\bbuild\b", re.IGNORECASE)),
    (
        "os",
        re.compile(
            r"\b(windows|linux|macos|mac os|os x|ubuntu|debian|fedora|android|ios|freebsd)\b",
            re.IGNORECASE,
        ),
    ),
    ("user_agent", re.compile(r"\buser[- ]?agent\b|\bmozilla/\d", re.IGNORECASE)),
    (
        "screenshot",
        re.compile(r"\bscreen\s?shots?\b|\battach(?:ment|ed)s?\b|\.(?:png|jpe?g|gif)\b", re.IGNORECASE),
    ),
)

_PUNCT_RUN_RE = re.compile(r"([^\w\s])\1{2,}")

_WORDS_MIN, _WORDS_MAX = 10, 500
_MAX_MEAN_SENTENCE = 30
_MIN_TERMINAL_FRACTION = 0.9
_MAX_SENTENCE_TOKENS = 60
_ACTIONABLE_FULL, _ACTIONABLE_HALF = 0.8, 0.5
_MAX_CONTRAST_JACCARD = 0.8


class CtqrsScorer:
    """Stateless after lexicon load; safe for concurrent use."""

    def __init__(self, lexicons: Optional[Lexicons] = None):
        self.lexicons = lexicons or Lexicons.load()

    def score(self, report: StructuredReport) -> CtqrsBreakdown:
        units: list[str] = list(report.steps_to_reproduce)
        units.extend(
            [report.expected_result, report.actual_result, report.additional_information]
        )
        units = [u for u in units if u.strip()]
        body_text = "\n".join(units)
        sentences: list[Sentence] = []
        for unit in units:
            sentences.extend(split_sentences(unit))
        sentence_tokens = [tokenize(s.text) for s in sentences]
        words = sum(len(tokenize(u)) for u in units)

        results = [
            self._m1(words),
            self._m2(sentence_tokens),
            self._m3(sentences, body_text),
            self._m4(sentence_tokens),
            self._rl1(report),
            self._rl2(report),
            self._rl3(report),
            self._rl4(report),
            self._rl5(body_text),
            self._a1(report),
            self._a2(report),
            self._a3(report),
            self._a4(report),
        ]
        total = sum(r.points_awarded for r in results)
        return CtqrsBreakdown(results=tuple(results), total=total)

    def _m1(self, words: int) -> RuleResult:
        ok = _WORDS_MIN <= words <= _WORDS_MAX
        return _result(RuleId.M1, 1 if ok else 0, f"{words} words")

    def _m2(self, sentence_tokens: list[list[str]]) -> RuleResult:
        counted = [len(t) for t in sentence_tokens if t]
        if not counted:
            return _result(RuleId.M2, 0, "no sentences")
        mean = sum(counted) / len(counted)
        ok = mean <= _MAX_MEAN_SENTENCE
        return _result(RuleId.M2, 1 if ok else 0, f"mean sentence length {mean:.1f}")

    def _m3(self, sentences: list[Sentence], body_text: str) -> RuleResult:
        if not sentences:
            return _result(RuleId.M3, 0, "no sentences")
        terminal = sum(1 for s in sentences if s.terminal)
        fraction = terminal / len(sentences)
        run = _PUNCT_RUN_RE.search(body_text)
        ok = fraction >= _MIN_TERMINAL_FRACTION and run is None
        evidence = f"{terminal}/{len(sentences)} terminated"
        if run:
            evidence += f", run {run.group(0)!r}"
        return _result(RuleId.M3, 1 if ok else 0, evidence)

    def _m4(self, sentence_tokens: list[list[str]]) -> RuleResult:
        counted = [len(t) for t in sentence_tokens if t]
        if not counted:
            return _result(RuleId.M4, 0, "no sentences")
        longest = max(counted)
        ok = longest <= _MAX_SENTENCE_TOKENS
        return _result(RuleId.M4, 1 if ok else 0, f"longest sentence {longest} tokens")

    def _rl1(self, report: StructuredReport) -> RuleResult:
        present = bool(report.steps_to_reproduce)
        return _result(RuleId.RL1, 2 if present else 0, f"{len(report.steps_to_reproduce)} steps")

    def _rl2(self, report: StructuredReport) -> RuleResult:
        itemized = len(report.steps_to_reproduce) >= 2
        return _result(RuleId.RL2, 1 if itemized else 0, f"{len(report.steps_to_reproduce)} steps")

    def _rl3(self, report: StructuredReport) -> RuleResult:
        present = bool(report.expected_result.strip())
        return _result(RuleId.RL3, 1 if present else 0, "expected result" + ("" if present else " empty"))

    def _rl4(self, report: StructuredReport) -> RuleResult:
        present = bool(report.actual_result.strip())
        return _result(RuleId.RL4, 1 if present else 0, "actual result" + ("" if present else " empty"))

    def _rl5(self, body_text: str) -> RuleResult:
        hits = sorted(name for name, pattern in ENV_PATTERNS if pattern.search(body_text))
        points = 2 if len(hits) >= 2 else (1 if hits else 0)
        return _result(RuleId.RL5, points, "env: " + (", ".join(hits) if hits else "none"))

    def _a1(self, report: StructuredReport) -> RuleResult:
        steps = report.steps_to_reproduce
        if not steps:
            return _result(RuleId.A1, 0, "no steps")
        leads = [tokenize(s)[0] for s in steps if tokenize(s)]
        actionable = sum(1 for lead in leads if self.lexicons.action_verbs.matches(lead))
        fraction = actionable / len(steps)
        points = 2 if fraction >= _ACTIONABLE_FULL else (1 if fraction >= _ACTIONABLE_HALF else 0)
        return _result(RuleId.A1, points, f"{actionable}/{len(steps)} actionable")

    def _a2(self, report: StructuredReport) -> RuleResult:
        tokens = [t for s in report.steps_to_reproduce for t in tokenize(s)]
        hit = self.lexicons.ui_nouns.first_hit(tokens)
        return _result(RuleId.A2, 1 if hit else 0, f"ui noun: {hit or 'none'}")

    def _a3(self, report: StructuredReport) -> RuleResult:
        tokens = tokenize(report.actual_result)
        defect = self.lexicons.defect_terms.first_hit(tokens)
        if defect is None:
            return _result(RuleId.A3, 0, "no defect term")
        anchor = self.lexicons.ui_nouns.first_hit(tokens) or self.lexicons.artifact_nouns.first_hit(
            tokens
        )
        points = 2 if anchor else 1
        return _result(RuleId.A3, points, f"defect: {defect}" + (f" + {anchor}" if anchor else ""))

    def _a4(self, report: StructuredReport) -> RuleResult:
        er = set(tokenize(report.expected_result))
        ar = set(tokenize(report.actual_result))
        if not er or not ar:
            return _result(RuleId.A4, 0, "missing side")
        jaccard = len(er & ar) / len(er | ar)
        ok = jaccard <= _MAX_CONTRAST_JACCARD
        return _result(RuleId.A4, 1 if ok else 0, f"jaccard {jaccard:.2f}")


def _result(rule: RuleId, points: int, evidence: str) -> RuleResult:
    return RuleResult(rule, points, RULE_MAX[rule], evidence)


_default_scorer: Optional[CtqrsScorer] = None


def default_scorer() -> CtqrsScorer:
    global _default_scorer
    if _default_scorer is None:
        _default_scorer = CtqrsScorer()
    return _default_scorer


def score(report: StructuredReport) -> CtqrsBreakdown:
    """Score with the shipped lexicons."""
    return default_scorer().score(report)
