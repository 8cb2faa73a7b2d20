"""Run the validation campaigns and write one CSV per campaign plus report.json.

    python3 scripts/run_campaigns.py --out results/campaigns --seed 2026
"""

import argparse
import json
import time
from pathlib import Path

from fkflow import experiments


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/campaigns")
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--runs", type=int, default=100_000, help="runs per flow-equivalence case")
    ap.add_argument("--spot-runs", type=int, default=1_000_000)
    ap.add_argument("--only", nargs="*", help="subset of campaign names")
    args = ap.parse_args()

    campaigns = {
        "decomposition": lambda: experiments.campaign_decomposition(),
        "flow_equivalence": lambda: experiments.campaign_flow_equivalence(args.seed, args.runs),
        "spot_checks": lambda: experiments.spot_checks(args.seed, args.spot_runs, args.spot_runs),
        "mcmc_validation": lambda: experiments.mcmc_validation(args.seed),
        "discrepancy": lambda: experiments.discrepancy_report(),
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = {}
    for name, fn in campaigns.items():
        if args.only and name not in args.only:
            continue
        t0 = time.perf_counter()
        rep = fn()
        elapsed = time.perf_counter() - t0
        rep.write_csv(out / f"{name}.csv")
        summary[name] = {"passed": rep.passed, "seconds": round(elapsed, 1), **rep.summary}
        print(f"{name}: {'PASS' if rep.passed else 'FAIL'} in {elapsed:.1f}s")
        if name == "discrepancy":
            experiments.plot_discrepancy(rep, out / "discrepancy.svg")
    (out / "report.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")


if __name__ == "__main__":
    main()
