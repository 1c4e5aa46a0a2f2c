"""Command-line interface: validate study definitions, ingest response
files, compute reports, generate the reference fixture, and serve the API.

Exit codes: 0 success, 2 usage error (argparse), 3 validation failure,
4 data error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .design import StudyDefinition, validate_study_definition
from .fixture import write_fixture
from .metrics import BlankPolicy
from .model import DomainError
from .report import REPORT_KINDS, build_report, render
from .semantic import load_starter_lexicon, parse_lexicon
from .service import StudyService, create_app
from .store import EventStore, import_responses

EXIT_OK = 0
EXIT_VALIDATION = 3
EXIT_DATA = 4

DATA_DIR_ENV = "VU_DATA_DIR"
LOG_NAME = "events.jsonl"


def _data_dir(args) -> Path:
    if args.data_dir:
        return Path(args.data_dir)
    return Path(os.environ.get(DATA_DIR_ENV, ".vu-data"))


def _open_store(args) -> EventStore:
    directory = _data_dir(args)
    directory.mkdir(parents=True, exist_ok=True)
    return EventStore(directory / LOG_NAME)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, "utf-8")
    else:
        sys.stdout.write(text)


def cmd_validate(args) -> int:
    try:
        definition = StudyDefinition.from_json(Path(args.definition).read_text("utf-8"))
    except OSError as exc:
        print(f"error: cannot read {args.definition}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    report = validate_study_definition(definition, strict=args.strict)
    for finding in report.findings:
        print(f"{finding.severity.value}: [{finding.code}] {finding.message}")
    if report.passed:
        print(f"ok: study definition {definition.study_id} passed")
        return EXIT_OK
    return EXIT_VALIDATION


def cmd_ingest(args) -> int:
    store = _open_store(args)
    study_id = args.study
    if args.definition:
        try:
            definition = StudyDefinition.from_json(Path(args.definition).read_text("utf-8"))
        except (OSError, DomainError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
        study_id = study_id or definition.study_id
        if definition.study_id not in store.studies():
            try:
                store.create_study(definition)
                print(f"created study {definition.study_id}")
            except DomainError as exc:
                print(f"error: {exc}", file=sys.stderr)
                return EXIT_VALIDATION
    if not study_id:
        print("error: --study or --definition is required", file=sys.stderr)
        return EXIT_DATA
    total_accepted = 0
    total_rejected = 0
    for name in args.files:
        path = Path(name)
        fmt = args.format or ("csv" if path.suffix.lower() == ".csv" else "jsonl")
        try:
            text = path.read_text("utf-8")
            result = import_responses(store, study_id, text, fmt)
        except (OSError, DomainError) as exc:
            print(f"error: {name}: {exc}", file=sys.stderr)
            return EXIT_DATA
        total_accepted += result.accepted
        total_rejected += len(result.rejected)
        print(f"{name}: accepted {result.accepted}, rejected {len(result.rejected)}")
        for rejected in result.rejected[: args.max_errors]:
            print(f"  row {rejected.row}: {rejected.reason}")
        if len(result.rejected) > args.max_errors:
            print(f"  … {len(result.rejected) - args.max_errors} more")
    return EXIT_OK if total_rejected == 0 else EXIT_DATA


def cmd_report(args) -> int:
    store = _open_store(args)
    lexicon = None
    if args.lexicon:
        try:
            lexicon = parse_lexicon(Path(args.lexicon).read_text("utf-8"))
        except (OSError, DomainError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_DATA
    try:
        snapshot = store.snapshot(args.study)
        doc = build_report(
            snapshot,
            args.kind,
            args.group,
            policy=BlankPolicy(args.policy),
            threshold=args.threshold,
            k=args.k,
            lexicon=lexicon,
        )
        _emit(render(doc, args.format), args.out)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_fixture(args) -> int:
    try:
        paths = write_fixture(Path(args.out), seed=args.seed)
    except (OSError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for label, path in paths.items():
        print(f"{label}: {path}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    store = _open_store(args)
    lexicon = parse_lexicon(Path(args.lexicon).read_text("utf-8")) if args.lexicon else load_starter_lexicon()
    app = create_app(StudyService(store, lexicon=lexicon))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vu",
        description="Urban-identity evaluation studies: validation, ingestion, reports, service.",
    )
    parser.add_argument(
        "--data-dir",
        help=f"event store directory (default: ${DATA_DIR_ENV} or ./.vu-data)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="validate a study definition file")
    p.add_argument("definition", help="path to a study definition (json)")
    p.add_argument("--strict", action="store_true", help="treat stimulus manifest findings as failures")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ingest", help="bulk-import participant and response files")
    p.add_argument("files", nargs="+", help="csv or jsonl files")
    p.add_argument("--study", help="target study id")
    p.add_argument("--definition", help="study definition json; creates the study when absent")
    p.add_argument("--format", choices=("csv", "jsonl"), help="override format detection")
    p.add_argument("--max-errors", type=int, default=10, help="rejected rows to print per file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="compute a report from stored responses")
    p.add_argument("kind", choices=REPORT_KINDS)
    p.add_argument("--study", required=True)
    p.add_argument("--group", choices=("general", "local", "foreign"), default="general")
    p.add_argument("--k", type=int, default=3, help="elements per area (semantic)")
    p.add_argument("--policy", choices=("exclude", "incorrect"), default="exclude",
                   help="blank-guess handling in accuracy denominators")
    p.add_argument("--threshold", type=int, default=2, help="rank-divergence threshold (metrics)")
    p.add_argument("--format", choices=("json", "csv", "text"), default="json")
    p.add_argument("--out", help="write to file instead of stdout")
    p.add_argument("--lexicon", help="lexicon tsv overriding the packaged one (semantic)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("fixture", help="generate the reference study dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--lexicon", help="lexicon tsv overriding the packaged one")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
