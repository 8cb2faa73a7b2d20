"""Intrinsic construction of the collapse flow by Poisson thinning.

Between jumps every edge odds decays as ``pi(t) = pi(0) * exp(-t)``. An edge
of the current collapsed graph opens at rate ``mu_t(e open)``, the marginal
of the FK measure on that graph. Because ``mu_t(e open) <= p_e(t)`` for
``q >= 1``, candidates are drawn from independent percolation with hazard
``p_e(t) = pi_e(t) / (1 + pi_e(t))`` and accepted with probability
``mu_t(e open) / p_e(t)``.

Modes:

``exact_rates``
    State is the multigraph of original edges, each eroded separately;
    marginals from exact enumeration.
``mcmc_rates``
    Same state, marginals estimated by MCMC (clamped, biased).
``paper_simple``
    State is a simple graph; parallel conductances are added at each collapse
    and the merged value is eroded as one edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import fk_oracle, fk_sampler
from .graph_core import WeightedMultigraph, merge_parallel
from .trajectory import FlowEvent, FlowTrajectory

__all__ = [
    "HEADER_MODES",
    "IntrinsicState",
    "accept_probability",
    "initial_state",
    "next_candidate",
    "run",
    "survival_intrinsic",
]

MODES = ("exact_rates", "mcmc_rates", "paper_simple")
HEADER_MODES = {
    "exact_rates": "intrinsic-exact",
    "mcmc_rates": "intrinsic-mcmc",
    "paper_simple": "paper-simple",
}
ACCEPT_TOL = 1e-9


@dataclass
class IntrinsicState:
    """Current collapsed graph.

    ``edges`` holds ``[edge_id, cluster_a, cluster_b, odds0]`` where the odds
    at time ``t`` are ``odds0 * exp(-t)``. In ``paper_simple`` mode there is
    one entry per cluster pair and ``edge_id`` is the smallest original id
    merged into it.
    """

    q: float
    mode: str
    t: float
    edges: list[list]
    members: dict[int, list[int]]
    next_id: int
    events: list[FlowEvent] = field(default_factory=list)


def initial_state(g: WeightedMultigraph, q: float, mode: str) -> IntrinsicState:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if q < 1:
        raise ValueError("q must be >= 1 for flow modes")
    if mode == "paper_simple":
        first_id: dict[tuple[int, int], int] = {}
        for e in g.edges:
            key = (e.u, e.v) if e.u < e.v else (e.v, e.u)
            first_id.setdefault(key, e.id)
        simple = merge_parallel(g)
        edges = [[first_id[k], k[0], k[1], math.expm1(c)] for k, c in sorted(simple.weights.items())]
    else:
        edges = [[e.id, e.u, e.v, e.pi] for e in g.edges if e.pi > 0]
    members = {v: [v] for v in g.vertices}
    return IntrinsicState(q, mode, 0.0, edges, members, max(g.vertices, default=-1) + 1)


def next_candidate(state: IntrinsicState, rng: np.random.Generator) -> tuple[float, int] | None:
    """Earliest ring of the dominating percolation process after ``state.t``.

    For odds ``x`` at time 0 the remaining integrated hazard from ``t0`` is
    ``log(1 + x exp(-t0))``; an Exp(1) mark below it is inverted exactly.
    Returns ``(time, index into state.edges)`` or None.
    """
    if state.q < 1:
        raise ValueError("q must be >= 1 for flow modes")
    best = None
    decay0 = math.exp(-state.t)
    marks = rng.standard_exponential(len(state.edges)).tolist()
    for i, (edge, mark) in enumerate(zip(state.edges, marks)):
        x = edge[3]
        if x <= 0:
            continue
        remaining = math.log1p(x * decay0)
        if mark >= remaining:
            continue
        t = math.log(x) - math.log(math.expm1(remaining - mark))
        if best is None or t < best[0]:
            best = (t, i)
    return best


@lru_cache(maxsize=4096)
def _polynomial(key: tuple, q: float) -> fk_oracle.OpenCountPolynomial:
    n, pairs = key
    g = WeightedMultigraph.from_edges(range(n), [(a, b) for a, b, _ in pairs],
                                      [math.log1p(x) for _, _, x in pairs])
    return fk_oracle.OpenCountPolynomial(g, q)


def _structure_key(edges: list[list]) -> tuple:
    relabel: dict[int, int] = {}
    pairs = []
    for _, a, b, x in edges:
        pairs.append((relabel.setdefault(a, len(relabel)), relabel.setdefault(b, len(relabel)), x))
    return len(relabel), tuple(pairs)


def _as_graph(edges: list[list], t: float) -> WeightedMultigraph:
    decay = math.exp(-t)
    key = _structure_key(edges)
    n, pairs = key
    return WeightedMultigraph.from_edges(range(n), [(a, b) for a, b, _ in pairs],
                                         [math.log1p(x * decay) for _, _, x in pairs])


@dataclass
class MCMCRateConfig:
    sweeps: int = 2000
    burn_in: int = 200
    max_stderr: float = 0.05


def rate(state: IntrinsicState, index: int, t: float,
         mcmc: MCMCRateConfig | None = None, rng: np.random.Generator | None = None) -> float:
    """``mu_t(e open)`` for ``state.edges[index]`` on the current graph."""
    if state.mode == "mcmc_rates":
        cfg = mcmc or MCMCRateConfig()
        g = _as_graph(state.edges, t)
        est = fk_sampler.estimate_marginal(g, state.q, g.edges[index].id, cfg.sweeps, rng,
                                           burn_in=cfg.burn_in)
        if est.stderr > cfg.max_stderr:
            raise RuntimeError(f"MCMC rate estimate stderr {est.stderr:.3g} above cap {cfg.max_stderr}")
        return est.mean
    poly = _polynomial(_structure_key(state.edges), float(state.q))
    return poly.marginal(index, t)


def accept_probability(state: IntrinsicState, index: int, t: float,
                       mcmc: MCMCRateConfig | None = None,
                       rng: np.random.Generator | None = None) -> float:
    """Thinning ratio ``mu_t(e open) / p_e(t)``; must lie in [0, 1] for ``q >= 1``."""
    odds = state.edges[index][3] * math.exp(-t)
    p_dom = odds / (1.0 + odds)
    mu = rate(state, index, t, mcmc, rng)
    ratio = mu / p_dom
    if state.mode == "mcmc_rates":
        return min(max(ratio, 0.0), 1.0)
    if not -ACCEPT_TOL <= ratio <= 1.0 + ACCEPT_TOL:
        raise AssertionError(f"acceptance {ratio} outside [0, 1] (q={state.q}, mode={state.mode})")
    return min(max(ratio, 0.0), 1.0)


def _collapse(state: IntrinsicState, index: int, t: float) -> None:
    eid, x, y, _ = state.edges[index]
    new = state.next_id
    state.next_id += 1
    state.members[new] = state.members.pop(x) + state.members.pop(y)
    if state.mode == "paper_simple":
        decay, grow = math.exp(-t), math.exp(t)
        kept, towards = [], {}
        for edge in state.edges:
            fid, a, b, val = edge
            if {a, b} == {x, y}:
                continue
            if a in (x, y) or b in (x, y):
                z = b if a in (x, y) else a
                prev = towards.get(z)
                log1p_sum = math.log1p(val * decay) + (prev[1] if prev else 0.0)
                towards[z] = (min(fid, prev[0]) if prev else fid, log1p_sum)
            else:
                kept.append(edge)
        for z, (fid, c) in towards.items():
            kept.append([fid, new, z, math.expm1(c) * grow])
        state.edges = kept
    else:
        kept = []
        for fid, a, b, val in state.edges:
            a = new if a in (x, y) else a
            b = new if b in (x, y) else b
            if a != b:
                kept.append([fid, a, b, val])
        state.edges = kept
    state.events.append(FlowEvent(t, eid, (x, y), new, len(state.members), True))


def run(g: WeightedMultigraph, q: float, mode: str, rng: np.random.Generator,
        t_max: float = math.inf, *, mcmc: MCMCRateConfig | None = None,
        seed: int | None = None) -> FlowTrajectory:
    """Simulate collapses by thinning until no candidate remains or ``t > t_max``."""
    state = initial_state(g, q, mode)
    while state.edges:
        cand = next_candidate(state, rng)
        if cand is None:
            break
        t, index = cand
        if t > t_max:
            break
        state.t = t
        if rng.random() < accept_probability(state, index, t, mcmc, rng):
            _collapse(state, index, t)
    blocks = tuple(sorted(tuple(sorted(ms)) for ms in state.members.values()))
    return FlowTrajectory(g, q, state.events, blocks, mode=HEADER_MODES[mode], seed=seed)


def first_collapse_time(g: WeightedMultigraph, q: float, mode: str,
                        rng: np.random.Generator) -> float:
    """Time of the first accepted candidate (``inf`` if none); skips the rest of the run."""
    state = initial_state(g, q, mode)
    while state.edges:
        cand = next_candidate(state, rng)
        if cand is None:
            return math.inf
        t, index = cand
        state.t = t
        if rng.random() < accept_probability(state, index, t):
            return t
    return math.inf


def total_hazard(g: WeightedMultigraph, q: float, t: float, mode: str = "exact_rates") -> float:
    """Sum of opening rates at time ``t`` if nothing has collapsed yet."""
    state = initial_state(g, q, mode)
    if not state.edges:
        return 0.0
    poly = _polynomial(_structure_key(state.edges), float(q))
    return float(poly.marginals(t).sum())


def survival_intrinsic(g: WeightedMultigraph, q: float, t: float, mode: str = "exact_rates",
                       *, epsabs: float = 1e-13, epsrel: float = 1e-12) -> float:
    """``exp(-integral_0^t total_hazard(s) ds)`` by adaptive quadrature."""
    if mode not in ("exact_rates", "paper_simple"):
        raise ValueError("survival_intrinsic supports the exact_rates and paper_simple modes")
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    value, err = integrate.quad(lambda s: total_hazard(g, q, s, mode), 0.0, t,
                                epsabs=epsabs, epsrel=epsrel, limit=200)
    if err > 1e-9:
        raise ArithmeticError(f"quadrature did not converge (error estimate {err:.3g})")
    return math.exp(-value)
