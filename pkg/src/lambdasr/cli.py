"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 integration or invariant failure, 5 comparison outside tolerance.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import MODES, parse_config
from .errors import LambdaSRError
from .scenarios import SCENARIOS, scenario_text

log = logging.getLogger("lambdasr")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lambdasr", description=__doc__.splitlines()[0],
                                 epilog="Any config key can be set from the environment as "
                                        "LAMBDASR__SECTION__KEY, e.g. LAMBDASR__SOLVER__REL=1e-8.")
    sub = ap.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", type=Path, help="INI configuration file")
        src.add_argument("--scenario", choices=sorted(SCENARIOS), help="built-in configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--svg", choices=("on", "off"))
        p.add_argument("--tol-rel", type=float)
        p.add_argument("--tol-abs", type=float)
        p.add_argument("--seed-policy", choices=("none", "fluctuation"))
        p.add_argument("--dicke", action="store_true", help="uniform all-to-all couplings (exact mode)")
        p.add_argument("-v", "--verbose", action="store_true")
        if mode == "analyze":
            p.add_argument("input", nargs="?", help="run directory or trajectory CSV")
        if mode == "compare":
            p.add_argument("run_a", nargs="?")
            p.add_argument("run_b", nargs="?")
            p.add_argument("--columns", help="comma-separated column names")
            p.add_argument("--tolerance", type=float)
    return ap


def _overrides(args) -> dict:
    ov = {("run", "mode"): args.mode}
    simple = {
        ("output", "dir"): args.out,
        ("output", "svg"): args.svg,
        ("solver", "rel"): args.tol_rel,
        ("solver", "abs"): args.tol_abs,
        ("solver", "seed_policy"): args.seed_policy,
        ("geometry", "dicke"): "true" if args.dicke else None,
        ("analyze", "input"): getattr(args, "input", None),
        ("compare", "run_a"): getattr(args, "run_a", None),
        ("compare", "run_b"): getattr(args, "run_b", None),
        ("compare", "columns"): getattr(args, "columns", None),
        ("compare", "tolerance"): getattr(args, "tolerance", None),
    }
    ov.update({k: v for k, v in simple.items() if v is not None})
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .runner import run

    try:
        if args.config is not None:
            try:
                text = args.config.read_text(encoding="utf-8")
            except OSError as exc:
                print(f"error: cannot read {args.config}: {exc}", file=sys.stderr)
                return 2
        elif args.scenario is not None:
            text = scenario_text(args.scenario)
        else:
            text = ""
        cfg = parse_config(text, env=os.environ, overrides=_overrides(args))
        res = run(cfg)
    except LambdaSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if res.report is not None and cfg.mode in ("analyze", "compare"):
        print(json.dumps(res.report, indent=2, sort_keys=True, default=str))
    for a in res.artifacts:
        print(a)
    return res.status


if __name__ == "__main__":
    sys.exit(main())
