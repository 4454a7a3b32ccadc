"""Acceptance criteria, one test per criterion, each printing a PASS line.

Tolerances and runtime budgets are pinned here; nothing is deferred to
later calibration.
"""

from __future__ import annotations

import json
import math
import random
import time

import pytest

from fixture_data import (
    FIG2_TEXT,
    FILTER_CORPUS,
    G1_TEXT,
    filter_corpus_bugs,
    make_gold_report,
    make_testset,
)
from reportsmith.cli import main
from reportsmith.ctqrs import score
from reportsmith.errors import RetentionFailed
from reportsmith.gateway import (
    HashedBagEmbedding,
    MockBackend,
    build_alpaca_prompt,
    build_fewshot_messages,
    build_synthesis_prompt,
    mock_backend,
)
from reportsmith.harness import (
    evaluate_generation,
    mapping_eval,
    missing_detection_eval,
    save_testset,
)
from reportsmith.pipeline import (
    SplitRatios,
    SynthesisConfig,
    filter_corpus,
    split_dataset,
    split_sizes,
    synthesize_unstructured,
)
from reportsmith.report_model import (
    BODY_SECTIONS,
    StructuredReport,
    parse_sections,
    report_to_dict,
)
from reportsmith.textmetrics import cosine_tf, meteor, rouge1, tokenize
from test_harness import _case_index
from test_gateway import ALPACA_GOLDEN, SYNTHESIS_GOLDEN
from test_textmetrics import oracle_rouge1

PROVIDER = HashedBagEmbedding()


def _report_pass(name: str, started: float, budget: float) -> None:
    elapsed = time.monotonic() - started
    assert elapsed < budget, f"{name} exceeded its {budget}s budget ({elapsed:.2f}s)"
    print(f"[acceptance] {name}: PASS ({elapsed:.2f}s)")


def _random_report(rng: random.Random) -> StructuredReport:
    vocab = (
        "the menu fails error open click build version value panel page stuck "
        "crash wrong app view data entry 42 slow . ! ? ,"
    ).split()

    def chunk(lo: int, hi: int) -> str:
        return " ".join(rng.choice(vocab) for _ in range(rng.randrange(lo, hi)))

    steps = tuple(chunk(1, 12) for _ in range(rng.randrange(0, 6)))
    return StructuredReport(
        title=chunk(0, 8),
        steps_to_reproduce=steps,
        expected_result=chunk(0, 30) if rng.random() < 0.8 else "",
        actual_result=chunk(0, 30) if rng.random() < 0.8 else "",
        additional_information=chunk(0, 40) if rng.random() < 0.6 else "",
    ).normalized()


def test_ctqrs_determinism_and_bounds():
    started = time.monotonic()
    assert score(parse_sections(G1_TEXT)).total == 17
    assert score(StructuredReport().normalized()).total == 0
    assert score(parse_sections(FIG2_TEXT)).total >= 14

    rng = random.Random(20240515)
    for _ in range(10_000):
        breakdown = score(_random_report(rng))
        assert 0 <= breakdown.total <= 17
        assert sum(r.points_max for r in breakdown.results) == 17
    _report_pass("ctqrs-determinism-and-bounds", started, 5.0)


def test_metric_oracles():
    started = time.monotonic()
    rng = random.Random(77)
    vocab = [f"w{i}" for i in range(14)]
    for _ in range(1000):
        cand = [rng.choice(vocab) for _ in range(rng.randrange(0, 16))]
        ref = [rng.choice(vocab) for _ in range(rng.randrange(0, 16))]
        got = rouge1(cand, ref)
        assert (got.precision, got.recall, got.f1) == oracle_rouge1(cand, ref)

    # identity over four tokens: Fmean 1, penalty 0.5*(1/4)^3, i.e. 0.9922 rounded
    identity = meteor(["a", "b", "c", "d"], ["a", "b", "c", "d"])
    assert abs(identity - 0.9921875) < 1e-9

    assert abs(cosine_tf(tokenize("a b"), tokenize("a c")) - 0.5) < 1e-12
    _report_pass("metric-oracles", started, 10.0)


def test_split_reproduction():
    started = time.monotonic()
    ratios = SplitRatios(seed=13)
    train, test, val = split_dataset(list(range(3903)), ratios)
    assert (len(train), len(test), len(val)) == (3122, 391, 390)

    for n in range(3, 10_001):
        train_n, test_n, val_n = split_sizes(n, ratios)
        assert train_n == math.floor(0.8 * n)
        remainder = n - train_n
        assert test_n == math.ceil(remainder / 2)
        assert val_n == remainder - test_n
        assert train_n + test_n + val_n == n

    rng = random.Random(5)
    sampled = list(range(3, 200)) + [rng.randrange(200, 10_001) for _ in range(40)] + [3903]
    for n in sampled:
        records = list(range(n))
        first = split_dataset(records, ratios)
        again = split_dataset(records, ratios)
        assert first == again
        assert sorted(first[0] + first[1] + first[2]) == records
        other = split_dataset(records, SplitRatios(seed=14))
        assert tuple(map(len, other)) == tuple(map(len, first))
    _report_pass("split-reproduction", started, 5.0)


def test_filter_chain():
    started = time.monotonic()
    summary = filter_corpus(filter_corpus_bugs())
    got = {
        o.bug_id: ("accepted" if o.accepted else o.rejection_reason.label())
        for o in summary.outcomes
    }
    want = {bug_id: expected for bug_id, (_, expected) in FILTER_CORPUS.items()}
    assert got == want
    counts = summary.counts()
    rejected = sum(v for k, v in counts.items() if k not in ("fetched", "accepted"))
    assert counts["fetched"] == counts["accepted"] + rejected == 12
    _report_pass("filter-chain", started, 2.0)


def test_synthesis_retention():
    started = time.monotonic()
    cfg = SynthesisConfig()
    gold = make_gold_report(3)

    echoed = synthesize_unstructured(
        MockBackend(script=lambda text: text), gold, cfg, PROVIDER
    )
    assert echoed.embedding_score == pytest.approx(1.0, abs=1e-9)
    assert echoed.cosine_score == pytest.approx(1.0, abs=1e-9)

    # the embedding gate is strict: exactly 0.85 is rejected
    assert not cfg.retains(0.85, 0.9)
    assert cfg.retains(1.0, 1.0)

    unrelated = MockBackend(script=lambda text: "entirely unrelated words over here")
    with pytest.raises(RetentionFailed) as err:
        synthesize_unstructured(unrelated, gold, cfg, PROVIDER)
    assert len(err.value.attempts) == 3
    _report_pass("synthesis-retention", started, 2.0)


def test_rq3_harness_oracle():
    started = time.monotonic()
    cases = make_testset(50)

    def confusion_script(text: str) -> str:
        parsed = parse_sections(text)
        index = _case_index(text) % 10
        data = report_to_dict(parsed)
        s2r_missing = not parsed.steps_to_reproduce
        if s2r_missing and index >= 7:
            data["steps_to_reproduce"] = ["Do the usual sequence of ordinary things."]
        elif not s2r_missing and index < 2:
            data["steps_to_reproduce"] = []
        data["missing_fields"] = [
            kind.value
            for kind in BODY_SECTIONS
            if not data[kind.value]
        ]
        return json.dumps(data)

    ten = cases[:10]
    outcome = missing_detection_eval(MockBackend(script=confusion_script), ten, provider=PROVIDER)
    from reportsmith.report_model import SectionKind

    counts = outcome.confusion[SectionKind.STEPS_TO_REPRODUCE]
    assert (counts.tp, counts.fp, counts.fn) == (7, 2, 3)
    assert abs(counts.f1() - 0.7368421052631579) < 1e-9

    flagger = missing_detection_eval(mock_backend("FLAG_MISSING"), cases, provider=PROVIDER)
    for section, stats in flagger.aggregate.detection.items():
        assert stats["f1"] == 1.0, section

    mapper = mapping_eval(mock_backend(), cases, provider=PROVIDER)
    for section, stats in mapper.aggregate.mapping.items():
        assert stats["rouge1_f"] == 1.0, section

    generation = evaluate_generation(mock_backend(), cases, provider=PROVIDER)
    assert generation.aggregate.rouge1_f_mean == 1.0
    _report_pass("rq3-harness-oracle", started, 30.0)


def test_end_to_end_determinism(tmp_path):
    started = time.monotonic()
    testset = tmp_path / "testset.jsonl"
    save_testset(make_testset(20), testset)
    outs = []
    for name in ("run_a", "run_b"):
        out = tmp_path / name
        code = main(
            ["eval", "--suite", "missing", "--backend", "mock:flag_missing",
             "--testset", str(testset), "--out", str(out), "--seed", "11"]
        )
        assert code == 0
        outs.append(out)
    for filename in ("aggregate.json", "rows.csv", "confusion.csv"):
        first = (outs[0] / filename).read_bytes()
        second = (outs[1] / filename).read_bytes()
        assert first == second, f"{filename} differs between identical runs"
    _report_pass("end-to-end-determinism", started, 30.0)


def test_prompt_fidelity():
    started = time.monotonic()
    assert build_alpaca_prompt("X") == ALPACA_GOLDEN.replace("{unstructured_report}", "X")
    assert build_synthesis_prompt("Y") == SYNTHESIS_GOLDEN.replace("{text}", "Y")
    for k in (0, 1, 3):
        shots = [(f"input {i}", "{}") for i in range(k)]
        assert len(build_fewshot_messages(shots, "target")) == 2 + 2 * k
    _report_pass("prompt-fidelity", started, 5.0)
