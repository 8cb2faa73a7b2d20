"""Torus sweep of the largest frozen cluster and the crossing estimate of p_c.

    python3 scripts/torus_sweep.py --q 2 --L 16 --p-min 0.50 --p-max 0.68 --reps 1000
"""

import argparse
from pathlib import Path

from fkflow import experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=2)
    ap.add_argument("--L", type=int, default=16)
    ap.add_argument("--q", type=float, default=1.0)
    ap.add_argument("--p-min", type=float, default=0.40)
    ap.add_argument("--p-max", type=float, default=0.62)
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--reps", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--out", default="results/sweeps")
    ap.add_argument("--oracle", action="store_true",
                    help="also run the independent check (percolation for q=1, chain comparison otherwise)")
    args = ap.parse_args()

    n = int(round((args.p_max - args.p_min) / args.step)) + 1
    grid = [round(args.p_min + i * args.step, 10) for i in range(n)]
    rows = experiments.torus_sweep(args.d, args.L, args.q, grid, args.reps, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"torus{args.d}-L{args.L}-q{args.q:g}"
    experiments.write_sweep_csv(rows, out / f"{stem}.csv")
    experiments.plot_sweep(rows, out / f"{stem}.svg")
    print(f"pc_estimate = {experiments.pc_estimate(rows):.4f}")
    if args.oracle:
        if args.q == 1:
            ref = experiments.percolation_oracle(args.d, args.L, grid, args.reps)
            print(f"percolation oracle crossing = {experiments.pc_estimate(ref):.4f}")
        else:
            print(experiments.self_dual_crosscheck(args.L, int(args.q), args.seed))


if __name__ == "__main__":
    main()
