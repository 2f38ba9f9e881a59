#!/usr/bin/env python3
"""
Command line entry point for genescan.

    genescan scan --sigs SIGS [--rules RULES] [--best] [--format text|json] [--no-canonicalize] [--jobs N] MODEL...
    genescan lint SIGS
    genescan blocks MODEL [--dot] [--sigs SIGS] [--no-canonicalize]
    genescan export MODEL
    genescan serve [--host HOST] [--port PORT]

Exit codes: 0 success, 1 lint errors or unusable signatures, 2 unreadable
model, 64 usage error, 66 missing input file.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence, TextIO

from pydantic import ValidationError

from genescan import __version__
from genescan.backend.config import LOG_LEVELS, get_config
from genescan.backend.engine.exceptions import GenescanError, IngestError, RewriteError, SignatureError
from genescan.backend.engine.ingest import ModelSource
from genescan.backend.models import CliConfig, Command, LintReport, OutputFormat, ScanMode, ScanOutcome
from genescan.backend.services import get_scan_service
from genescan.backend.utils import (
    collect_model_paths, log_error, missing_paths, set_log_level, write_json_line
)


EXIT_OK = 0
EXIT_LINT_ERRORS = 1
EXIT_UNREADABLE_MODEL = 2
EXIT_USAGE = 64
EXIT_NO_INPUT = 66


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with the sysexits usage code instead of 2"""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", choices=LOG_LEVELS, default=None,
                        help="Verbosity of the banners on stderr")
    common.add_argument("--strict", action="store_true", default=None,
                        help="Reject tensors that nothing produces")

    parser = _ArgumentParser(prog="genescan", description="Identify model families from computational graphs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    scan = sub.add_parser("scan", parents=[common], help="Scan models against a signature database")
    scan.add_argument("models", nargs="+", metavar="MODEL", help="Model files or directories")
    scan.add_argument("--sigs", dest="signature_path", help="Signature file or directory (default: GENESCAN_SIGS)")
    scan.add_argument("--rules", dest="rules_path", help="Rewrite rules file or directory")
    scan.add_argument("--best", action="store_true", help="Report only the most specific family")
    scan.add_argument("--format", dest="output", choices=[f.value for f in OutputFormat], default="text")
    scan.add_argument("--no-canonicalize", dest="canonicalize", action="store_false", default=None)
    scan.add_argument("--jobs", type=int, default=None, help="Models scanned in parallel")

    lint = sub.add_parser("lint", parents=[common], help="Check a signature database")
    lint.add_argument("signature_path", metavar="SIGS")
    lint.add_argument("--format", dest="output", choices=[f.value for f in OutputFormat], default="text")

    blocks = sub.add_parser("blocks", parents=[common], help="Dump the block decomposition of a model")
    blocks.add_argument("models", nargs=1, metavar="MODEL")
    blocks.add_argument("--dot", action="store_true", help="Graphviz DOT instead of JSON")
    blocks.add_argument("--sigs", dest="signature_path", help="Colour blocks of matching families")
    blocks.add_argument("--rules", dest="rules_path")
    blocks.add_argument("--no-canonicalize", dest="canonicalize", action="store_false", default=None)

    export = sub.add_parser("export", parents=[common], help="Write a model in the JSON interchange format")
    export.add_argument("models", nargs=1, metavar="MODEL")

    serve = sub.add_parser("serve", parents=[common], help="Run the HTTP API")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)

    return parser


def to_cli_config(args: argparse.Namespace) -> CliConfig:
    config = get_config()
    command = Command(args.command)
    signature_path = getattr(args, "signature_path", None)
    if command == Command.SCAN and not signature_path:
        signature_path = config.paths.signature_path
    validated = config.validate_scan_params(
        jobs=getattr(args, "jobs", None),
        canonicalize=getattr(args, "canonicalize", None),
        strict=args.strict,
    )
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    try:
        return CliConfig(
            command=command,
            model_paths=getattr(args, "models", []),
            signature_path=signature_path,
            rules_path=getattr(args, "rules_path", None),
            mode=ScanMode.BEST_MATCH if getattr(args, "best", False) else ScanMode.ALL_MATCHES,
            output=getattr(args, "output", "text"),
            canonicalize=validated['canonicalize'],
            jobs=validated['jobs'],
            strict=validated['strict'],
            dot=getattr(args, "dot", False),
            host=getattr(args, "host", None),
            port=getattr(args, "port", None),
        )
    except ValidationError as e:
        raise UsageError("; ".join(error["msg"] for error in e.errors())) from e


# ==================== OUTPUT ====================

def write_report_text(outcome: ScanOutcome, stream: TextIO) -> None:
    if not outcome.ok:
        print(f"== {outcome.origin}: unreadable ({outcome.error_type})", file=stream)
        print(f"   {outcome.error}", file=stream)
        return
    report = outcome.report
    stats = report.stats
    print(f"== {report.origin}  (nodes {stats.nodes}, blocks {stats.blocks}, "
          f"fused {stats.canonicalized}, {stats.ms:.1f} ms)", file=stream)
    if not report.detections:
        print("   no known family detected", file=stream)
    else:
        width = max(len("FAMILY"), *(len(d.family) for d in report.detections))
        print(f"   {'FAMILY':<{width}}  SPECIFICITY  COMPONENTS  OCCURRENCES", file=stream)
        for detection in report.detections:
            print(f"   {detection.family:<{width}}  {detection.specificity:<11}  "
                  f"{detection.total_components:<10}  {len(detection.start_block_ids)}", file=stream)
    for warning in report.warnings:
        print(f"   warning: {warning}", file=stream)


def write_report_json(outcome: ScanOutcome, stream: TextIO) -> None:
    if outcome.ok:
        write_json_line(outcome.report.to_json_dict(), stream)
    else:
        write_json_line({"origin": outcome.origin, "error": outcome.error, "error_type": outcome.error_type}, stream)


def write_lint(report: LintReport, output: OutputFormat, stream: TextIO) -> None:
    if output == OutputFormat.JSON:
        write_json_line(report.model_dump(mode="json"), stream)
        return
    for finding in report.findings:
        print(f"{finding.severity} {finding.code} [{', '.join(finding.families)}]: {finding.message}", file=stream)
    print(f"{report.errors} errors, {report.warnings} warnings", file=stream)


# ==================== COMMANDS ====================

def _require_files(paths: Sequence[Path]) -> None:
    missing = missing_paths(paths)
    if missing:
        raise FileNotFoundError(", ".join(str(path) for path in missing))


def run_scan(cli: CliConfig, stdout: TextIO) -> int:
    paths = collect_model_paths(cli.model_paths)
    _require_files(paths)
    if not Path(cli.signature_path).exists():
        raise FileNotFoundError(cli.signature_path)

    service = get_scan_service()
    service.load_database(cli.signature_path, cli.rules_path)
    progress = cli.output == OutputFormat.TEXT and sys.stderr.isatty()
    outcomes = service.scan_paths(
        paths, mode=cli.mode, canonicalize=cli.canonicalize, jobs=cli.jobs,
        strict=cli.strict, progress=progress,
    )

    writer = write_report_json if cli.output == OutputFormat.JSON else write_report_text
    for outcome in outcomes:
        writer(outcome, stdout)
    return EXIT_OK if all(outcome.ok for outcome in outcomes) else EXIT_UNREADABLE_MODEL


def run_lint(cli: CliConfig, stdout: TextIO) -> int:
    if not Path(cli.signature_path).exists():
        raise FileNotFoundError(cli.signature_path)
    service = get_scan_service()
    service.load_database(cli.signature_path, cli.rules_path)
    report = service.lint()
    write_lint(report, cli.output, stdout)
    return EXIT_LINT_ERRORS if report.errors else EXIT_OK


def run_blocks(cli: CliConfig, stdout: TextIO) -> int:
    path = Path(cli.model_paths[0])
    _require_files([path])
    service = get_scan_service()
    highlight = bool(cli.signature_path) and cli.dot
    if cli.signature_path or cli.rules_path:
        service.load_database(cli.signature_path, cli.rules_path)
    result = service.block_dump(
        ModelSource.from_path(path), canonicalize=cli.canonicalize, dot=cli.dot,
        highlight=highlight, strict=cli.strict,
    )
    stdout.write(result if cli.dot else json.dumps(result, indent=2) + "\n")
    return EXIT_OK


def run_export(cli: CliConfig, stdout: TextIO) -> int:
    path = Path(cli.model_paths[0])
    _require_files([path])
    document = get_scan_service().export_source(ModelSource.from_path(path), strict=cli.strict)
    stdout.write(json.dumps(document, indent=2) + "\n")
    return EXIT_OK


def run_serve(cli: CliConfig, stdout: TextIO) -> int:
    from genescan.backend.main import run

    run(host=cli.host, port=cli.port)
    return EXIT_OK


COMMANDS = {
    Command.SCAN: run_scan,
    Command.LINT: run_lint,
    Command.BLOCKS: run_blocks,
    Command.EXPORT: run_export,
    Command.SERVE: run_serve,
}


def run(cli: CliConfig, stdout: Optional[TextIO] = None) -> int:
    """Run one command and map failures to exit codes"""
    stdout = stdout or sys.stdout
    try:
        return COMMANDS[cli.command](cli, stdout)
    except FileNotFoundError as e:
        log_error(error_type="MISSING_INPUT", error_message=f"No such file: {e}")
        return EXIT_NO_INPUT
    except (SignatureError, RewriteError) as e:
        log_error(error_type=e.error_type, error_message="Signature database is unusable", exception=e)
        if cli.command == Command.LINT and isinstance(e, SignatureError):
            print(f"error {e.path}: {e.message}", file=stdout)
        return EXIT_LINT_ERRORS
    except (IngestError, GenescanError) as e:
        log_error(error_type=e.error_type, error_message="Model could not be read", exception=e)
        return EXIT_UNREADABLE_MODEL


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    if args.log_level:
        set_log_level(args.log_level)

    try:
        cli = to_cli_config(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"genescan: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    return run(cli)


if __name__ == "__main__":
    sys.exit(main())
