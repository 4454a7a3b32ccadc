"""Command-line entry point for every pipeline stage plus the HTTP service.

Exit codes: 0 success, 1 user error, 2 provider failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .config import AppConfig, load_app_config, resolve_backend
from .errors import (
    AuthFailed,
    IoFailure,
    MalformedDocument,
    MalformedGeneration,
    PartialFetch,
    ProviderUnavailable,
    RetentionFailed,
    TimedOut,
)
from .gateway import HashedBagEmbedding, alpaca_instruction, build_fewshot_messages
from .harness import emit_report, load_testset, run_suite
from .pipeline import (
    BugzillaBug,
    InstructionExample,
    fetch_fixed_bugs,
    filter_corpus,
    load_instruction_jsonl,
    export_instruction_jsonl,
    split_dataset,
    synthesize_unstructured,
)
from .report_model import json_to_report, report_from_dict, report_to_dict
from .service import BUILTIN_SHOTS, score_payload_json

PROVIDER_ERRORS = (ProviderUnavailable, AuthFailed, TimedOut, MalformedGeneration)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="reportsmith", description=__doc__)
    parser.add_argument("--config", type=Path, default=None, help="TOML config file")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("score", help="score a report file with the CTQRS rule engine")
    p.add_argument("file", type=Path)

    p = sub.add_parser("structure", help="restructure an unstructured report via a backend")
    p.add_argument("file", type=Path)
    p.add_argument("--backend", default=None)
    p.add_argument("--shots", type=int, default=0)

    p = sub.add_parser("ingest", help="fetch fixed bugs from a Bugzilla REST endpoint")
    p.add_argument("corpus", type=Path)
    p.add_argument("--base-url", required=True)
    p.add_argument("--since", required=True)
    p.add_argument("--limit", type=int, required=True)

    p = sub.add_parser("filter", help="apply the filter chain to a fetched corpus")
    p.add_argument("corpus", type=Path)

    p = sub.add_parser("synth", help="synthesize unstructured rewrites for accepted reports")
    p.add_argument("corpus", type=Path)
    p.add_argument("--backend", default=None)

    p = sub.add_parser("split", help="split synthesized examples into train/test/validation")
    p.add_argument("corpus", type=Path)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("export", help="export one split as instruction-tuning JSONL")
    p.add_argument("corpus", type=Path)
    p.add_argument("--split", choices=("train", "test", "validation"), default="train")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("eval", help="run an evaluation suite")
    p.add_argument("--suite", choices=("generation", "missing", "mapping"), required=True)
    p.add_argument("--backend", default=None)
    p.add_argument("--shots", type=int, default=0)
    p.add_argument("--testset", type=Path, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument(
        "--embedding",
        choices=("fallback", "backend", "none"),
        default="fallback",
        help="embedding provider for similarity columns",
    )

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--bind", default=None)
    return parser


def _read_text(path: Path) -> str:
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    return path.read_text(encoding="utf-8")


def _corpus_paths(corpus: Path) -> dict[str, Path]:
    return {
        "raw": corpus / "raw" / "bugs.jsonl",
        "cursor": corpus / "cursor.json",
        "accepted": corpus / "filtered" / "accepted.jsonl",
        "rejections": corpus / "rejections.csv",
        "synth": corpus / "synth" / "examples.jsonl",
        "splits": corpus / "splits",
        "metadata": corpus / "metadata.json",
    }


def _write_bugs(path: Path, bugs: Sequence[BugzillaBug]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for bug in bugs:
            fh.write(json.dumps(bug.to_dict()))
            fh.write("\n")


def _read_bugs(path: Path) -> list[BugzillaBug]:
    if not path.exists():
        raise UsageError(f"no fetched corpus at {path}; run ingest first")
    return [
        BugzillaBug.from_dict(json.loads(line))
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def _cmd_score(args, config: AppConfig) -> int:
    text = _read_text(args.file)
    if not text.strip():
        raise UsageError(f"{args.file} is empty")
    print(score_payload_json(text))
    return 0


def _cmd_structure(args, config: AppConfig) -> int:
    text = _read_text(args.file)
    backend = resolve_backend(config, args.backend)
    if args.shots > len(BUILTIN_SHOTS):
        raise UsageError(f"at most {len(BUILTIN_SHOTS)} shots are available")
    messages = build_fewshot_messages(BUILTIN_SHOTS[: args.shots], text)
    raw = backend.complete(messages)
    report = json_to_report_or_none(raw)
    if report is None:
        print(json.dumps({"raw": raw, "parse_error": "no parsable report"}), file=sys.stderr)
        return 2
    print(json.dumps({"report": report_to_dict(report), "raw": raw}, indent=2))
    return 0


def json_to_report_or_none(raw: str):
    from .gateway import parse_generation

    try:
        return parse_generation(raw)
    except MalformedGeneration:
        return None


def _cmd_ingest(args, config: AppConfig) -> int:
    paths = _corpus_paths(args.corpus)
    try:
        bugs = fetch_fixed_bugs(
            args.base_url, args.since, args.limit, cursor_path=paths["cursor"]
        )
    except PartialFetch as exc:
        _write_bugs(paths["raw"], exc.bugs)
        print(
            json.dumps({"fetched": len(exc.bugs), "partial": True, "cursor": exc.cursor}),
            file=sys.stderr,
        )
        return 2
    _write_bugs(paths["raw"], bugs)
    print(json.dumps({"fetched": len(bugs), "partial": False}))
    return 0


def _cmd_filter(args, config: AppConfig) -> int:
    paths = _corpus_paths(args.corpus)
    bugs = _read_bugs(paths["raw"])
    summary = filter_corpus(bugs)
    paths["accepted"].parent.mkdir(parents=True, exist_ok=True)
    with paths["accepted"].open("w", encoding="utf-8") as fh:
        for outcome in summary.accepted:
            fh.write(
                json.dumps({"bug_id": outcome.bug_id, "report": report_to_dict(outcome.report)})
            )
            fh.write("\n")
    with paths["rejections"].open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bug_id", "reason"])
        for outcome in summary.rejected:
            writer.writerow([outcome.bug_id, outcome.rejection_reason.label()])
    print(json.dumps(summary.counts()))
    return 0


def _cmd_synth(args, config: AppConfig) -> int:
    paths = _corpus_paths(args.corpus)
    if not paths["accepted"].exists():
        raise UsageError(f"no filtered corpus at {paths['accepted']}; run filter first")
    backend = resolve_backend(config, args.backend)
    provider = backend if hasattr(backend, "embed") else HashedBagEmbedding()
    paths["synth"].parent.mkdir(parents=True, exist_ok=True)
    kept = failed = 0
    with paths["synth"].open("w", encoding="utf-8") as fh:
        for line in paths["accepted"].read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            report = report_from_dict(record["report"])
            try:
                result = synthesize_unstructured(backend, report, config.synthesis, provider)
            except RetentionFailed:
                failed += 1
                continue
            kept += 1
            fh.write(
                json.dumps(
                    {
                        "bug_id": record["bug_id"],
                        "unstructured": result.text,
                        "embedding_score": result.embedding_score,
                        "cosine_score": result.cosine_score,
                        "report": record["report"],
                    }
                )
            )
            fh.write("\n")
    print(json.dumps({"retained": kept, "retention_failed": failed}))
    return 0


def _cmd_split(args, config: AppConfig) -> int:
    paths = _corpus_paths(args.corpus)
    if not paths["synth"].exists():
        raise UsageError(f"no synthesized examples at {paths['synth']}; run synth first")
    ratios = config.split
    if args.seed is not None:
        from dataclasses import replace

        ratios = replace(ratios, seed=args.seed)
    instruction = alpaca_instruction()
    examples = []
    for line in paths["synth"].read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        report = report_from_dict(record["report"])
        examples.append(
            InstructionExample(
                instruction=instruction,
                input=record["unstructured"],
                output=json.dumps(report_to_dict(report)),
                provenance={
                    "bug_id": record["bug_id"],
                    "embedding_score": record.get("embedding_score"),
                    "cosine_score": record.get("cosine_score"),
                },
            )
        )
    if not examples:
        raise UsageError("nothing to split: synth produced no retained examples")
    train, test, validation = split_dataset(examples, ratios)
    sizes = {}
    for name, part in (("train", train), ("test", test), ("validation", validation)):
        out = paths["splits"] / f"{name}.jsonl"
        if part:
            export_instruction_jsonl(
                part, out, synthesis=config.synthesis, split_ratios=ratios
            )
            sizes[name] = len(part)
        else:
            sizes[name] = 0
    metadata = (paths["splits"] / "metadata.json")
    if metadata.exists():
        paths["metadata"].write_text(metadata.read_text(encoding="utf-8"), encoding="utf-8")
    print(json.dumps(sizes))
    return 0


def _cmd_export(args, config: AppConfig) -> int:
    paths = _corpus_paths(args.corpus)
    src = paths["splits"] / f"{args.split}.jsonl"
    if not src.exists():
        raise UsageError(f"no split file at {src}; run split first")
    examples = load_instruction_jsonl(src)
    export_instruction_jsonl(
        examples, args.out, synthesis=config.synthesis, split_ratios=config.split
    )
    print(json.dumps({"exported": len(examples), "path": str(args.out)}))
    return 0


def _cmd_eval(args, config: AppConfig) -> int:
    backend = resolve_backend(config, args.backend)
    testset = load_testset(args.testset)
    if args.embedding == "fallback":
        provider = HashedBagEmbedding()
    elif args.embedding == "backend":
        provider = backend
    else:
        provider = None
    outcome = run_suite(
        args.suite, backend, testset, shots=args.shots, provider=provider, seed=args.seed
    )
    emit_report(outcome, args.out)
    print(json.dumps(outcome.aggregate.to_dict(), indent=2))
    if outcome.partial_error:
        print(f"aborted early: {outcome.partial_error}", file=sys.stderr)
        return 2
    return 0


def _cmd_serve(args, config: AppConfig) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(config)
    uvicorn.run(
        app,
        host=args.bind or config.service.bind,
        port=args.port or config.service.port,
        log_level="info",
    )
    return 0


_COMMANDS = {
    "score": _cmd_score,
    "structure": _cmd_structure,
    "ingest": _cmd_ingest,
    "filter": _cmd_filter,
    "synth": _cmd_synth,
    "split": _cmd_split,
    "export": _cmd_export,
    "eval": _cmd_eval,
    "serve": _cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        config = load_app_config(args.config) if args.config else AppConfig()
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_help(sys.stderr)
        return 1
    except (MalformedDocument, IoFailure, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PROVIDER_ERRORS as exc:
        print(f"provider failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
