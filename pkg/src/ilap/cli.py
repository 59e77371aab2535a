"""Command line entry point: ``ilap simulate | compare | solve | ingest``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .alloc import solve_allocation
from .datasets import complete_and_scale, ingest_ratings, write_matrix
from .harness import compare, load_config, run_experiment
from .market import ConstraintProfile


def _int_vector(text: str) -> np.ndarray:
    """Inline comma list, or a path to a one-line/one-column CSV."""
    path = Path(text)
    if path.is_file():
        return np.loadtxt(path, delimiter=",", ndmin=1).astype(np.int64).ravel()
    return np.array([int(x) for x in text.split(",") if x.strip()], dtype=np.int64)


def cmd_simulate(args) -> int:
    config = load_config(args.config)
    results = run_experiment(config, args.out)
    for r in results:
        print(f"seed {r.seed}: cumulative regret {r.cum_regret:.6g}, instability {r.cum_instability:.6g}")
    print(f"wrote {len(results) + 1} files to {args.out}")
    return 0


def cmd_compare(args) -> int:
    configs = [load_config(p) for p in args.configs.split(",") if p.strip()]
    compare(configs, args.out)
    print((Path(args.out) / "compare.csv").read_text(), end="")
    return 0


def cmd_solve(args) -> int:
    theta = np.loadtxt(args.theta, delimiter=",", ndmin=2)
    out = solve_allocation(theta, ConstraintProfile(_int_vector(args.demands), _int_vector(args.capacities)))
    w = sys.stdout
    w.write(f"welfare,{out.welfare:.9g}\n")
    w.write("user,item\n")
    for u, i in out.allocation.pairs:
        w.write(f"{u},{i}\n")
    w.write("item,price\n")
    for i, p in enumerate(out.prices):
        w.write(f"{i},{p:.9g}\n")
    return 0


def cmd_ingest(args) -> int:
    table = ingest_ratings(args.ratings)
    print(table.summary(), file=sys.stderr)
    rng = np.random.default_rng(args.seed)
    truth = complete_and_scale(table, args.rank, args.reg, rng=rng)
    write_matrix(args.out, truth.values)
    N, M = truth.shape
    print(f"wrote {N}x{M} matrix to {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ilap", description="Learning allocations and prices in matching markets.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one experiment config over its seeds")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run several configs on shared instances")
    p.add_argument("--configs", required=True, help="comma-separated config files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("solve", help="solve one allocation problem")
    p.add_argument("--theta", required=True, help="reward matrix CSV, one row per user")
    p.add_argument("--demands", required=True, help="CSV file or inline comma list")
    p.add_argument("--capacities", required=True, help="CSV file or inline comma list")
    p.add_argument("--min-prices", action="store_true", help="prices are always the minimal equilibrium prices; kept for compatibility")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("ingest", help="complete a ratings file to a dense reward matrix")
    p.add_argument("--ratings", required=True)
    p.add_argument("--rank", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reg", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"ilap: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
