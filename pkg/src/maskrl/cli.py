"""Command-line entry point: run experiments, list them, regenerate plots.

The output root defaults to ./results and can be pinned with the
MASKRL_OUT environment variable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise SystemExit(f"override {pair!r} must look like key=value")
        key, value = pair.split("=", 1)
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="maskrl",
        description="Action-removal attack experiments on self-play RL")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a registered experiment")
    run_p.add_argument("experiment")
    run_p.add_argument("--seeds", help="comma-separated seed list")
    run_p.add_argument("--out", help="output root (default $MASKRL_OUT or ./results)")
    run_p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="experiment parameter override (repeatable)")
    run_p.add_argument("--workers", type=int, default=1,
                       help="parallel (seed, condition) workers")

    plot_p = sub.add_parser("plot", help="regenerate figures from result files")
    plot_p.add_argument("directory")

    sub.add_parser("list", help="list registered experiments")

    args = parser.parse_args(argv)

    if args.command == "list":
        from .registry import EXPERIMENTS
        width = max(len(name) for name in EXPERIMENTS)
        for name in sorted(EXPERIMENTS):
            print(f"{name:<{width}}  {EXPERIMENTS[name].description}")
        return 0

    if args.command == "plot":
        from .plots import emit_plots
        emit_plots(args.directory)
        return 0

    from .registry import run
    seeds = None
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
    out_root = Path(args.out or os.environ.get("MASKRL_OUT", "results"))
    summary = run(args.experiment, seeds=seeds, out_root=out_root,
                  overrides=_parse_overrides(args.override),
                  workers=args.workers)
    print(json.dumps({"experiment": args.experiment,
                      "out_dir": str(out_root / args.experiment),
                      "config_hash": summary.get("config_hash"),
                      "summary": summary.get("summary")},
                     indent=1, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
