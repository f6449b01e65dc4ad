"""Command line entry points for the studies.

    eig-error    error table of the penalized eigenvalues against a disk/square
    optimize     one projected-gradient run from a config file
    sweep-alpha  alpha sweep with warm starts (largest alpha first)
    stability    repeated runs from random starts
    calibrate    alpha scan for the periodic hexagonal configuration
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .optimizer import format_config, load_config, optimize
from .phases import triple_blocks
from .studies import CONVENTIONS, alpha_sweep, calibrate_alpha, error_table, stability_study


def _floats(text: str) -> list:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list:
    return [int(float(t)) for t in text.replace(",", " ").split()]


def _add_common(p):
    p.add_argument("--config", required=True, type=Path, help="key = value file with OptimizerConfig fields")
    p.add_argument("--out", required=True, type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral-partitions", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eig-error", help="relative eigenvalue errors over (N, C)")
    p.add_argument("--shape", choices=("disk", "square"), required=True)
    p.add_argument("--n", type=_ints, required=True, help="resolutions, e.g. '100 200'")
    p.add_argument("--c", type=_floats, required=True, help="penalizations, e.g. '1e3 1e6'")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--convention", choices=CONVENTIONS, default="paper")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", type=Path, required=True, help="CSV file")

    p = sub.add_parser("optimize", help="run the optimizer once")
    _add_common(p)
    p.add_argument("--run-id", default="run")

    p = sub.add_parser("sweep-alpha", help="alpha sweep, warm-started from the largest alpha")
    _add_common(p)
    p.add_argument("--alphas", type=_floats, required=True)

    p = sub.add_parser("stability", help="runs from several random starts")
    _add_common(p)
    p.add_argument("--seeds", type=int, default=4, help="number of seeds (0..n-1)")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("calibrate", help="scan alpha for the target hexagonal cost")
    _add_common(p)
    p.add_argument("--alphas", type=_floats, required=True)
    p.add_argument("--target", type=float, default=205.2)
    p.add_argument("--jobs", type=int, default=1)
    return parser


def _cmd_eig_error(args) -> int:
    table = error_table(args.shape, args.n, args.c, args.kmax, args.tol, args.seed,
                        convention=args.convention, n_jobs=args.jobs)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    table.write_csv(args.out)
    sys.stdout.write(table.csv_text())
    return 0


def _cmd_optimize(args) -> int:
    cfg = load_config(args.config)
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / f"{args.run_id}.cfg").write_text(format_config(cfg))
    runlog = optimize(cfg, out_dir=args.out, run_id=args.run_id)
    fc = runlog.final_cost
    print(f"termination={runlog.termination.value} iterations={len(runlog.records) - 1} total={fc.total!r}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    res = alpha_sweep(cfg, args.alphas, out_dir=args.out)
    (args.out / "sweep.csv").write_text(res.csv_text())
    sys.stdout.write(res.csv_text())
    return 0


def _cmd_stability(args) -> int:
    cfg = load_config(args.config)
    res = stability_study(cfg, args.seeds, out_dir=args.out, n_jobs=args.jobs)
    summary = {
        "totals": [r.total for r in res.runs],
        "spread": res.spread,
        "min_agreement": res.min_agreement,
        "triple_blocks": [triple_blocks(r.labels, cfg.h, cfg.grid.bc.value == "periodic") for r in res.runs],
    }
    (args.out / "stability.json").write_text(json.dumps(summary, indent=2))
    np.savetxt(args.out / "agreement.csv", res.agreement, delimiter=",", fmt="%.6f")
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    args.out.mkdir(parents=True, exist_ok=True)
    res = calibrate_alpha(cfg, args.alphas, args.target, n_jobs=args.jobs, out_dir=args.out)
    (args.out / "calibration.csv").write_text(res.csv_text())
    sys.stdout.write(res.csv_text())
    print(f"best_alpha={res.best_alpha} best_total={res.best_total} within_1pct={res.within_one_percent}")
    return 0


_COMMANDS = {
    "eig-error": _cmd_eig_error,
    "optimize": _cmd_optimize,
    "sweep-alpha": _cmd_sweep,
    "stability": _cmd_stability,
    "calibrate": _cmd_calibrate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
