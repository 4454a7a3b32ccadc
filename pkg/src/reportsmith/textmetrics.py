"""Shared tokenizer, sentence splitter, and the evaluation metric suite.

All modules that count words or sentences go through `tokenize` and
`split_sentences` so there is a single definition of both.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Protocol, Sequence

from .errors import ProviderUnavailable

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_TERMINATOR_RE = re.compile(r"[.!?]+(?=\s|$)")
_LETTER_RE = re.compile(r"[^\W\d_]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character.

    Digit runs are kept as tokens; underscores count as separators.
    """
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Sentence:
    """One sentence with its span in the original text."""

    text: str
    start: int
    end: int
    terminal: bool  # ended by ./!/? in the source


def split_sentences(text: str) -> list[Sentence]:
    """Split text into sentences on [.!?] runs followed by whitespace or EOL.

    Lines are segmented independently, so a line break always closes a
    sentence; a sentence is `terminal` only when it was closed by
    punctuation rather than by a line break or end of input. A terminator is
    only honored once the piece holds at least one letter, so enumerator
    prefixes like "1." stay attached to their step text.
    """
    sentences: list[Sentence] = []
    offset = 0
    for line in text.split("\n"):
        pos = 0
        for match in _TERMINATOR_RE.finditer(line):
            piece = line[pos : match.end()]
            if not _LETTER_RE.search(piece):
                continue
            if piece.strip():
                sentences.append(
                    Sentence(piece.strip(), offset + pos, offset + match.end(), True)
                )
            pos = match.end()
        tail = line[pos:]
        if tail.strip():
            sentences.append(Sentence(tail.strip(), offset + pos, offset + len(line), False))
        offset += len(line) + 1
    return sentences


@dataclass(frozen=True)
class Rouge1Score:
    precision: float
    recall: float
    f1: float


def rouge1(candidate: Sequence[str], reference: Sequence[str]) -> Rouge1Score:
    """Unigram overlap with clipped counts; precision/recall/F1."""
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    overlap = sum((cand_counts & ref_counts).values())
    precision = overlap / len(candidate) if candidate else 0.0
    recall = overlap / len(reference) if reference else 0.0
    if precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return Rouge1Score(precision, recall, f1)


_VOWELS = set("aeiouy")


def _has_vowel(word: str) -> bool:
    return any(c in _VOWELS for c in word)


def _undouble(word: str) -> str:
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if len(word) >= 2 and word[-1] == word[-2] and word[-1] not in "lsz" and word[-1] not in _VOWELS:
        return word[:-1]
    return word


def stem(word: str) -> str:
    """Suffix stemmer in the Porter style (plural/participle/adverbial step only)."""
    w = word
    if len(w) <= 2:
        return w
    if w.endswith(("sses", "shes", "ches", "xes", "zes")):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-3] + "i"
    elif w.endswith("s") and not w.endswith("ss") and _has_vowel(w[:-1]):
        w = w[:-1]
    if w.endswith("eed"):
        if len(w) > 4:
            w = w[:-1]
    elif w.endswith("ed") and _has_vowel(w[:-2]):
        w = _undouble(w[:-2])
    elif w.endswith("ing") and _has_vowel(w[:-3]):
        w = _undouble(w[:-3])
    if w.endswith("y") and len(w) > 2 and _has_vowel(w[:-1]):
        w = w[:-1] + "i"
    return w


def _align(candidate: Sequence[str], reference: Sequence[str]) -> list[tuple[int, int]]:
    """Two-stage unigram alignment: exact surface match, then stemmed match.

    Within a stage, candidates bind left-to-right and prefer the reference
    position that continues the previous match, which keeps the chunk count
    low without a full search.
    """
    pairs: dict[int, int] = {}
    used_ref: set[int] = set()
    for key_fn in (lambda t: t, stem):
        ref_slots: dict[str, list[int]] = {}
        for j, tok in enumerate(reference):
            if j not in used_ref:
                ref_slots.setdefault(key_fn(tok), []).append(j)
        for i, tok in enumerate(candidate):
            if i in pairs:
                continue
            slots = [j for j in ref_slots.get(key_fn(tok), ()) if j not in used_ref]
            if not slots:
                continue
            prev = pairs.get(i - 1)
            if prev is not None and prev + 1 in slots:
                choice = prev + 1
            else:
                choice = slots[0]
            pairs[i] = choice
            used_ref.add(choice)
    return sorted(pairs.items())


def meteor(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Alignment-based unigram metric with fragmentation penalty.

    m aligned unigrams give P = m/|cand|, R = m/|ref|,
    Fmean = P*R / (0.9*P + 0.1*R), Penalty = 0.5 * (chunks/m)^3,
    score = Fmean * (1 - Penalty). Zero when nothing aligns.
    """
    if not candidate or not reference:
        return 0.0
    pairs = _align(candidate, reference)
    m = len(pairs)
    if m == 0:
        return 0.0
    chunks = 1
    for (ci, ri), (cj, rj) in zip(pairs, pairs[1:]):
        if cj != ci + 1 or rj != ri + 1:
            chunks += 1
    precision = m / len(candidate)
    recall = m / len(reference)
    fmean = precision * recall / (0.9 * precision + 0.1 * recall)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def cosine_tf(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Cosine of raw term-frequency vectors; 0 when either side is empty."""
    if not candidate or not reference:
        return 0.0
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    dot = sum(cand_counts[t] * ref_counts.get(t, 0) for t in cand_counts)
    norm_c = math.sqrt(sum(v * v for v in cand_counts.values()))
    norm_r = math.sqrt(sum(v * v for v in ref_counts.values()))
    if norm_c == 0 or norm_r == 0:
        return 0.0
    return dot / (norm_c * norm_r)


def vector_cosine(a: Sequence[float], b: Sequence[float]) -> float:
    if len(a) != len(b):
        raise ValueError(f"dimension mismatch: {len(a)} vs {len(b)}")
    dot = sum(x * y for x, y in zip(a, b))
    norm_a = math.sqrt(sum(x * x for x in a))
    norm_b = math.sqrt(sum(y * y for y in b))
    if norm_a == 0 or norm_b == 0:
        return 0.0
    return dot / (norm_a * norm_b)


class EmbeddingProvider(Protocol):
    """Anything that turns text into a fixed-dimension vector."""

    def embed(self, text: str) -> list[float]: ...


def embedding_similarity(provider: EmbeddingProvider, a: str, b: str) -> float:
    """Cosine of the provider's vectors for a and b.

    ProviderUnavailable from the provider propagates to the caller.
    """
    if provider is None:
        raise ProviderUnavailable("no embedding provider configured")
    return vector_cosine(provider.embed(a), provider.embed(b))


@dataclass(frozen=True)
class MetricReport:
    """All pairwise text metrics for one candidate/reference pair."""

    rouge1_precision: float
    rouge1_recall: float
    rouge1_f: float
    meteor: float
    cosine_tf: float
    embedding_similarity: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "rouge1": {
                "p": self.rouge1_precision,
                "r": self.rouge1_recall,
                "f": self.rouge1_f,
            },
            "meteor": self.meteor,
            "cosine_tf": self.cosine_tf,
            "embedding_similarity": self.embedding_similarity,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricReport":
        r = data["rouge1"]
        return cls(
            rouge1_precision=r["p"],
            rouge1_recall=r["r"],
            rouge1_f=r["f"],
            meteor=data["meteor"],
            cosine_tf=data["cosine_tf"],
            embedding_similarity=data.get("embedding_similarity"),
        )

    @classmethod
    def zeros(cls) -> "MetricReport":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def compute_metric_report(
    candidate: str, reference: str, provider: Optional[EmbeddingProvider] = None
) -> MetricReport:
    """Tokenize both texts and run the whole metric suite."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    rouge = rouge1(cand, ref)
    emb = embedding_similarity(provider, candidate, reference) if provider is not None else None
    return MetricReport(
        rouge1_precision=rouge.precision,
        rouge1_recall=rouge.recall,
        rouge1_f=rouge.f1,
        meteor=meteor(cand, ref),
        cosine_tf=cosine_tf(cand, ref),
        embedding_similarity=emb,
    )


def word_count(texts: Iterable[str]) -> int:
    return sum(len(tokenize(t)) for t in texts)
