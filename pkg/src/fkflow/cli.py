"""Command-line entry point: ``fkflow {oracle,sample,flow,validate,sweep}``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import experiments, fk_oracle, fk_sampler, flow_direct, flow_intrinsic
from .graph_core import CapacityError, WeightedMultigraph, convert_weight, generate
from .io import seed_streams, write_trajectory
from .trajectory import replay_partition

FLOW_MODES = {
    "direct": None,
    "intrinsic-exact": "exact_rates",
    "intrinsic-mcmc": "mcmc_rates",
    "paper-simple": "paper_simple",
}
CAMPAIGNS = ("decomposition", "flow-equivalence", "spot-checks", "mcmc", "discrepancy", "all")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    graph: str | None = None
    q: float = 1.0
    convention: str | None = None
    weight: float | None = None
    mode: str | None = None
    seed: int = 0
    reps: int = 1
    t_max: float = math.inf
    out: str | None = None
    extra: dict = field(default_factory=dict)

    def conductance(self) -> float:
        if self.convention is None:
            return math.log(2)
        return convert_weight(self.weight, self.convention, "c")

    def build_graph(self) -> WeightedMultigraph:
        if self.graph is None:
            raise UsageError("--graph is required")
        desc = self.graph
        if desc.startswith("file:") or desc.endswith(".json"):
            if self.convention is not None:
                raise UsageError("weight flags cannot be combined with a graph file")
            return generate(desc)
        return generate(desc, self.conductance())


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", help="torus:d,L | complete:n | path:n | cycle:n | file:PATH")
    common.add_argument("--q", type=float, default=1.0)
    weights = common.add_mutually_exclusive_group()
    weights.add_argument("--p", type=float)
    weights.add_argument("--pi", type=float)
    weights.add_argument("--c", type=float)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--reps", type=int, default=1)
    common.add_argument("--t-max", type=float, default=math.inf)
    common.add_argument("--out")

    parser = argparse.ArgumentParser(prog="fkflow", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("oracle", parents=[common], help="exact Z, marginals, distribution dump")
    p = sub.add_parser("sample", parents=[common], help="MCMC samples and marginal estimates")
    p.add_argument("--mode", choices=("heat_bath", "sw"), default="heat_bath")
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=100)
    p = sub.add_parser("flow", parents=[common], help="simulate one collapse trajectory")
    p.add_argument("--mode", choices=tuple(FLOW_MODES), default="direct")
    p = sub.add_parser("validate", parents=[common], help="run validation campaigns")
    p.add_argument("--mode", choices=CAMPAIGNS, default="all")
    p.add_argument("--runs", type=int, default=100_000, help="runs per flow case")
    p = sub.add_parser("sweep", parents=[common], help="torus sweep and p_c estimate")
    p.add_argument("--p-grid", default="0.40:0.60:0.02", help="start:stop:step or comma list")
    p.add_argument("--plot", help="SVG path for the fraction-vs-p plot")
    return parser


def parse_cli(argv: list[str] | None = None) -> RunConfig:
    ns = _parser().parse_args(argv)
    convention, weight = None, None
    for name in ("p", "pi", "c"):
        if getattr(ns, name) is not None:
            convention, weight = name, getattr(ns, name)
    if not ns.q > 0:
        raise UsageError("q must be positive")
    if ns.reps < 1:
        raise UsageError("--reps must be positive")
    if convention is not None:
        try:
            convert_weight(weight, convention, "c")
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    extra = {k: v for k, v in vars(ns).items()
             if k not in {"subcommand", "graph", "q", "p", "pi", "c", "seed", "reps", "t_max",
                          "out", "mode"}}
    cfg = RunConfig(ns.subcommand, ns.graph, ns.q, convention, weight, getattr(ns, "mode", None),
                    ns.seed, ns.reps, ns.t_max, ns.out, extra)
    if cfg.subcommand == "flow" and cfg.q < 1:
        raise UsageError("q must be ≥ 1 for flow modes")
    if cfg.subcommand in ("sample", "sweep") and cfg.q < 1:
        raise UsageError("q must be ≥ 1 for samplers")
    return cfg


def _fmt(x) -> str:
    return f"{float(x):.15g}"


def cmd_oracle(cfg: RunConfig) -> int:
    g = cfg.build_graph()
    Z = fk_oracle.partition_function(g, cfg.q)
    margs = fk_oracle.marginals(g, cfg.q)
    print(f"Z={_fmt(Z)}")
    for e, m in zip(g.edges, margs):
        print(f"edge {e.id} ({e.u},{e.v}): P(open)={_fmt(m)}")
    if cfg.out:
        dist = fk_oracle.distribution(g, cfg.q)
        with open(cfg.out, "w", encoding="utf-8") as fh:
            json.dump({"Z": float(Z), "q": cfg.q, "graph": g.to_dict(),
                       "marginals": [float(m) for m in margs],
                       "distribution": [{"mask": i, "probability": float(p)}
                                        for i, p in enumerate(dist.probs)]}, fh)
            fh.write("\n")
    return 0


def cmd_sample(cfg: RunConfig) -> int:
    g = cfg.build_graph()
    rng = seed_streams(cfg.seed, 0)
    sg = fk_sampler.SamplerGraph(g)
    draws = np.array(list(fk_sampler.run_chain(
        sg, cfg.q, cfg.reps, rng, thin=cfg.extra["sweeps"], burn_in=cfg.extra["burn_in"],
        method=cfg.mode)))
    freq = draws.mean(axis=0)
    for e, f in zip(g.edges, freq):
        print(f"edge {e.id} ({e.u},{e.v}): open frequency={_fmt(f)}")
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            for row in draws:
                fh.write(json.dumps({"open": [int(x) for x in row]}) + "\n")
    return 0


def cmd_flow(cfg: RunConfig) -> int:
    g = cfg.build_graph()
    rng = seed_streams(cfg.seed, 0)
    mode = FLOW_MODES[cfg.mode]
    if mode is None:
        try:
            fk_oracle.check_capacity(g)
            sampler = "exact"
        except CapacityError:
            sampler = "exact" if cfg.q == 1 else "mcmc"
        traj = flow_direct.run(g, cfg.q, rng, sampler, method="sw" if float(cfg.q).is_integer()
                               else "heat_bath", seed=cfg.seed)
        if cfg.t_max < math.inf:
            traj.events = [ev for ev in traj.events if ev.time <= cfg.t_max]
            traj.final_blocks = tuple(replay_partition(g, traj.events).blocks())
    else:
        traj = flow_intrinsic.run(g, cfg.q, mode, rng, cfg.t_max, seed=cfg.seed)
    out = cfg.out or f"flow-{cfg.mode}-seed{cfg.seed}.jsonl"
    write_trajectory(traj, out)
    st = flow_direct.freeze_stats(traj)
    print(f"wrote {out}: {st.collapse_events} collapses, {st.final_clusters} clusters, "
          f"freeze time {st.freeze_time:.6g}")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    which = cfg.mode
    runs = cfg.extra["runs"]
    reports = []
    if which in ("decomposition", "all"):
        reports.append(experiments.campaign_decomposition())
    if which in ("flow-equivalence", "all"):
        reports.append(experiments.campaign_flow_equivalence(cfg.seed, runs))
    if which in ("spot-checks", "all"):
        reports.append(experiments.spot_checks(cfg.seed, 10 * runs, 10 * runs))
    if which in ("mcmc", "all"):
        reports.append(experiments.mcmc_validation(cfg.seed))
    if which in ("discrepancy", "all"):
        reports.append(experiments.discrepancy_report())
    out = Path(cfg.out) if cfg.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for rep in reports:
        print(f"{rep.name}: {'PASS' if rep.passed else 'FAIL'} {json.dumps(rep.summary, default=float)}")
        for row in rep.failures():
            print(f"  failed: {row}")
        if out:
            rep.write_csv(out / f"{rep.name}.csv")
    if out:
        with open(out / "report.json", "w", encoding="utf-8") as fh:
            json.dump({r.name: {"passed": r.passed, "summary": r.summary} for r in reports}, fh,
                      default=float, sort_keys=True)
            fh.write("\n")
    return 0 if all(r.passed for r in reports) else 1


def _grid(text: str) -> list[float]:
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 12) for i in range(n)]
    return [float(x) for x in text.split(",")]


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.graph is None or not cfg.graph.startswith("torus:"):
        raise UsageError("sweep needs --graph torus:d,L")
    d, L = (int(x) for x in cfg.graph.split(":", 1)[1].split(","))
    rows = experiments.torus_sweep(d, L, cfg.q, _grid(cfg.extra["p_grid"]), cfg.reps, cfg.seed)
    if cfg.out:
        experiments.write_sweep_csv(rows, cfg.out)
    else:
        for r in rows:
            print(json.dumps(asdict(r)))
    if cfg.extra.get("plot"):
        experiments.plot_sweep(rows, cfg.extra["plot"])
    try:
        print(f"pc_estimate={_fmt(experiments.pc_estimate(rows))}")
    except ValueError as exc:
        print(f"pc_estimate: {exc}")
    return 0


COMMANDS = {"oracle": cmd_oracle, "sample": cmd_sample, "flow": cmd_flow,
            "validate": cmd_validate, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_cli(argv)
        return COMMANDS[cfg.subcommand](cfg)
    except UsageError as exc:
        print(f"fkflow: error: {exc}", file=sys.stderr)
        return 2
    except (CapacityError, ValueError) as exc:
        print(f"fkflow: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
