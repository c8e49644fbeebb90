"""Command-line entry point.

    affinegas run CONFIG.json [--out DIR]
    affinegas sweep CONFIG_DIR [--jobs K] [--out DIR]
    affinegas check-ops [--order I] [--seed S] [--out DIR]

Exit codes: 0 success, 1 run failed, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError
from .harness import run_scenario, sweep


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="affinegas",
                                     description="Affine gas-ball perturbation laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config", help="path to a scenario JSON file")
    p_run.add_argument("--out", default=None, help="output directory")

    p_sweep = sub.add_parser("sweep", help="run every *.json config in a directory")
    p_sweep.add_argument("config_dir")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default=None)

    p_ops = sub.add_parser("check-ops", help="operator identity and control checks")
    p_ops.add_argument("--order", type=int, default=2)
    p_ops.add_argument("--seed", type=int, default=0)
    p_ops.add_argument("--n", type=int, default=128)
    p_ops.add_argument("--out", default="check-ops-out")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            raw = _load_config(args.config)
            summary = run_scenario(raw, args.out)
            print(f"{summary['kind']}: {summary['status']}")
            return 0 if summary["status"] == "pass" else 1
        if args.command == "sweep":
            configs = _load_dir(args.config_dir)
            out = args.out or os.path.join(args.config_dir, "sweep-out")
            report = sweep(configs, out, jobs=args.jobs)
            print(f"sweep: {report['status']} ({report['n_runs']} runs, "
                  f"{len(report['failed'])} failed)")
            return 0 if report["status"] == "pass" else 1
        if args.command == "check-ops":
            raw = {"kind": "operator-properties", "n": args.n, "seed": args.seed,
                   "order_list": list(range(args.order + 1))}
            summary = run_scenario(raw, args.out)
            print(f"operator-properties: {summary['status']}")
            return 0 if summary["status"] == "pass" else 1
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return 2


def _load_config(path: str) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err


def _load_dir(path: str) -> list[dict]:
    if not os.path.isdir(path):
        raise ConfigError(f"{path} is not a directory")
    names = sorted(fn for fn in os.listdir(path) if fn.endswith(".json"))
    return [_load_config(os.path.join(path, fn)) for fn in names]


if __name__ == "__main__":
    sys.exit(main())
