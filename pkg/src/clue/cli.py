"""``clue`` command-line entry point.

Exit codes: 0 clean run (with or without findings), 1 fixture validation
found problems, 2 configuration error, 3 source or infrastructure failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from clue import __version__
from clue.disasm import disassemble, format_listing, parse_hex_code
from clue.model import ParseError, parse_address
from clue.runner import DETECTOR_NAMES, ConfigError, format_summary, resolve_config, run
from clue.source import SourceError
from clue.symexec import ExecConfig, execute, resolve_delegate_target
from clue.valuation import CATEGORIES

log = logging.getLogger("clue")

EXIT_OK, EXIT_INVALID, EXIT_CONFIG, EXIT_SOURCE = 0, 1, 2, 3


def _read_code(arg: str) -> bytes:
    """Bytecode from a ``0x``-hex literal or a file holding hex text."""
    text = arg
    if not arg.startswith(("0x", "0X")):
        try:
            text = Path(arg).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read bytecode file {arg}: {exc}") from None
    try:
        return parse_hex_code(text)
    except ValueError as exc:
        raise ConfigError(f"{arg}: {exc}") from None


def _add_exec_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-paths", type=int, dest="max_paths")
    p.add_argument("--max-steps", type=int, dest="max_steps_per_path")
    p.add_argument("--max-loop-iterations", type=int, dest="max_loop_iterations")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clue", description="Find accounts whose ETH or tokens can never move again.")
    parser.add_argument("--version", action="version", version=f"clue {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    det = sub.add_parser("detect", help="run lock detectors and write a report")
    det.add_argument("detector", choices=sorted(DETECTOR_NAMES) + ["all"])
    src = det.add_mutually_exclusive_group()
    src.add_argument("--fixture", type=Path, help="fixture directory")
    src.add_argument("--rpc", dest="rpc_url", help="JSON-RPC endpoint (default: $CLUE_RPC_URL)")
    det.add_argument("--config", type=Path, help="INI config file")
    det.add_argument("--tx-list", type=Path, dest="tx_list", help="file of transaction hashes to scan")
    det.add_argument("--candidates", type=Path, help="file of candidate addresses (required for RPC account scans)")
    det.add_argument("--prices", type=Path, help="price table JSON")
    det.add_argument("--library", dest="library_address", help="destroyed library address")
    det.add_argument("--attack-block", type=int, dest="attack_block")
    det.add_argument("--parallelism", type=int)
    det.add_argument("--timeout", type=float)
    det.add_argument("--retries", type=int, dest="retry_count")
    det.add_argument("--rate-limit", type=float, dest="rate_limit", help="max RPC requests per second")
    _add_exec_flags(det)
    det.add_argument("--out", help="JSON report path, '-' for stdout")
    det.add_argument("--csv", type=Path, help="CSV findings path")
    det.add_argument("--generated-at", dest="generated_at", help="pin the report timestamp")

    dis = sub.add_parser("disasm", help="print a linear-sweep disassembly")
    dis.add_argument("code", help="0x-hex bytecode or a file holding it")

    sym = sub.add_parser("symexec", help="list external call sites and their targets")
    sym.add_argument("code", help="0x-hex bytecode or a file holding it")
    sym.add_argument("--library", required=True, help="library address to classify against")
    _add_exec_flags(sym)

    fix = sub.add_parser("fixture", help="generate or validate synthetic fixtures")
    fsub = fix.add_subparsers(dest="fixture_command", required=True)
    gen = fsub.add_parser("generate")
    gen.add_argument("--kind", required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True)
    gen.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="scenario parameter")
    val = fsub.add_parser("validate")
    val.add_argument("dir", type=Path)
    return parser


def _cmd_detect(args: argparse.Namespace) -> int:
    flags = {
        k: getattr(args, k)
        for k in (
            "fixture", "rpc_url", "tx_list", "candidates", "prices", "library_address", "attack_block",
            "parallelism", "timeout", "retry_count", "rate_limit", "max_paths", "max_steps_per_path",
            "max_loop_iterations", "generated_at",
        )
    }
    flags["detectors"] = CATEGORIES if args.detector == "all" else (DETECTOR_NAMES[args.detector],)
    cfg = resolve_config(flags, args.config, os.environ)
    report = run(cfg)
    if args.out == "-":
        sys.stdout.write(report.to_json())
    elif args.out:
        Path(args.out).write_text(report.to_json())
        log.info("wrote %s", args.out)
    else:
        sys.stdout.write(format_summary(report))
    if args.csv:
        args.csv.write_text(report.to_csv())
    for name, diag in report.diagnostics.items():
        warnings = diag.get("warnings", [])
        for warning in warnings:
            log.info("%s: %s", name, warning)
        if warnings:
            log.warning("%s: %d warnings recorded in the report diagnostics", name, len(warnings))
    return EXIT_OK


def _exec_config(args: argparse.Namespace) -> ExecConfig:
    base = ExecConfig()
    return ExecConfig(
        max_paths=args.max_paths or base.max_paths,
        max_steps_per_path=args.max_steps_per_path or base.max_steps_per_path,
        max_loop_iterations=args.max_loop_iterations or base.max_loop_iterations,
    )


def _cmd_disasm(args: argparse.Namespace) -> int:
    for line in format_listing(disassemble(_read_code(args.code))):
        print(line)
    return EXIT_OK


def _cmd_symexec(args: argparse.Namespace) -> int:
    try:
        library = parse_address(args.library)
    except ParseError as exc:
        raise ConfigError(f"--library: {exc}") from None
    report = execute(disassemble(_read_code(args.code)), _exec_config(args))
    for site in report.call_sites:
        print(f"pc={site.pc} op={site.opcode} target={site.target}")
    print(f"paths={report.paths_explored} truncated={str(report.truncated).lower()}")
    print(f"verdict={resolve_delegate_target(report, library)}")
    return EXIT_OK


def _parse_param(text: str):
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"--param expects KEY=VALUE, got {text!r}")
    lowered = value.lower()
    if lowered in ("true", "false"):
        return key, lowered == "true"
    try:
        return key, int(value)
    except ValueError:
        return key, value


def _cmd_fixture(args: argparse.Namespace) -> int:
    from clue.synthchain import GeneratorError, KINDS, Scenario, generate, validate

    if args.fixture_command == "generate":
        if args.kind not in KINDS:
            raise ConfigError(f"unknown fixture kind {args.kind!r}; choose from {', '.join(KINDS)}")
        params = dict(_parse_param(p) for p in args.param)
        try:
            manifest = generate(Scenario(args.kind, args.seed, params), args.out)
        except GeneratorError as exc:
            raise ConfigError(str(exc)) from None
        total = sum(len(v) for v in manifest.expected_findings.values())
        log.info("wrote %s fixture (seed %d, %d expected findings) to %s", args.kind, args.seed, total, args.out)
        return EXIT_OK
    problems = validate(args.dir)
    for p in problems:
        print(p)
    if not problems:
        print("ok")
    return EXIT_INVALID if problems else EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {"detect": _cmd_detect, "disasm": _cmd_disasm, "symexec": _cmd_symexec, "fixture": _cmd_fixture}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"clue: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceError as exc:
        print(f"clue: source failure: {exc}", file=sys.stderr)
        return EXIT_SOURCE


if __name__ == "__main__":
    sys.exit(main())
