"""Command line: ``gwasym {invariants,singularity,asympt,verify,report}``.

Exit status is 0 on success, 1 when a check fails and 2 on a fatal
inconsistency or bad input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import load_config
from .errors import GwasymError, InvariantViolation
from .pipeline import (
    dump_json,
    ensure_table,
    ensure_tables,
    load_or_run_singularity,
    render_report,
    run_asymptotics,
    run_singularity,
    run_verify,
)

log = logging.getLogger("gwasym")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    p.add_argument("--precision", type=int, dest="precision_bits", help="working precision in bits")
    p.add_argument("--cache-dir", type=Path, dest="cache_dir")
    p.add_argument("--output-dir", type=Path, dest="output_dir")
    p.add_argument("--d-exact", type=int, dest="d_exact")
    p.add_argument("--d-float", type=int, dest="d_float")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gwasym", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("invariants", help="compute or reuse a table of n_{g,d}")
    _common(p)
    p.add_argument("--genus", type=int, choices=(0, 1), required=True)
    p.add_argument("--dmax", type=int, required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="mode", action="store_const", const="exact")
    mode.add_argument("--scaled", dest="mode", action="store_const", const="scaled")
    p.set_defaults(mode="exact")
    p.add_argument("--out", type=Path, help="also write records 1..dmax here")

    p = sub.add_parser("singularity", help="locate x0 and derive the expansion coefficients")
    _common(p)
    p.add_argument("--z-init", type=float, dest="z_init")
    p.add_argument("--taylor-order", type=int, dest="taylor_order")
    p.add_argument("-N", "--terms", type=int, dest="N")
    p.add_argument("--out", type=Path, help="copy of the report JSON")

    p = sub.add_parser("asympt", help="validate the expansions against the tables")
    _common(p)
    p.add_argument("-N", "--terms", type=int, dest="N")
    p.add_argument("--out", type=Path, help="copy of the validation JSON")

    p = sub.add_parser("verify", help="run verification suites")
    _common(p)
    p.add_argument("--suite", choices=("all", "cache", "wdvv", "bounds", "asymptotics"),
                   default="all")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("report", help="human-readable summary")
    _common(p)
    p.add_argument("--out", type=Path)
    return ap


_CONFIG_KEYS = ("precision_bits", "cache_dir", "output_dir", "d_exact", "d_float",
                "z_init", "taylor_order", "N")


def _emit(text: str, out: Path | None):
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
    sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    flags = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    try:
        cfg = load_config(args.config, **flags)
        if args.command == "invariants":
            ensure_table(cfg, args.genus, args.dmax, args.mode, out=args.out)
            path = args.out or cfg.table_path(args.genus, args.mode)
            print(path)
            return 0
        if args.command == "singularity":
            rep = run_singularity(cfg)
            text = dump_json(rep.to_json())
            if args.out is not None:
                args.out.parent.mkdir(parents=True, exist_ok=True)
                args.out.write_text(text)
            for name, chk in rep.checks.items():
                sys.stderr.write(f"{'PASS' if chk['pass'] else 'FAIL'}  {name}\n")
            print(cfg.report_path("singularity"))
            return 0 if rep.ok else 1
        if args.command == "asympt":
            summary = run_asymptotics(cfg)
            _emit(dump_json(summary), args.out)
            return 0 if summary["pass"] else 1
        if args.command == "verify":
            res = run_verify(cfg, args.suite)
            _emit(dump_json(res), args.out)
            return 0 if res["pass"] else 1
        if args.command == "report":
            tables = ensure_tables(cfg)
            rep = load_or_run_singularity(cfg, tables[0])
            vpath = cfg.report_path("asymptotics")
            validation = (json.loads(vpath.read_text()) if vpath.exists()
                          else run_asymptotics(cfg, tables, rep))
            _emit(render_report(rep, validation), args.out)
            return 0
    except InvariantViolation as exc:
        log.error("fatal: %s", exc)
        return 2
    except (GwasymError, ValueError) as exc:
        log.error("%s", exc)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
