"""Coupling construction of the collapse flow.

Sample ``w`` from the FK measure, give every edge an independent mean-one
exponential clock ``xi(e)`` and open ``e`` at time ``xi(e)`` if ``w(e) = 1``.
The collapsed graph at time ``t`` is the quotient by the clusters of
``w_t = w * 1[xi <= t]``.
"""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import fk_oracle, fk_sampler
from .graph_core import SimpleWeightedGraph, WeightedMultigraph
from .trajectory import FlowEvent, FlowTrajectory, FreezeStats, freeze_stats

__all__ = ["freeze_stats", "replay", "run", "run_many", "state_at", "FreezeStats"]


def replay(g: WeightedMultigraph, q: float, open_mask, clocks, *, mode: str = "direct",
           seed: int | None = None) -> FlowTrajectory:
    """Build the trajectory for a fixed configuration and clock assignment.

    ``open_mask`` is an int bitmask or a boolean sequence over ``g.edges``;
    ``clocks`` holds one time per edge. Ties are broken by edge id.
    """
    m = g.n_edges
    if isinstance(open_mask, (int, np.integer)):
        is_open = [bool(int(open_mask) >> i & 1) for i in range(m)]
    else:
        is_open = [bool(x) for x in open_mask]
    clocks = [float(x) for x in clocks]
    order = sorted((clocks[i], g.edges[i].id, i) for i in range(m) if is_open[i])

    cid = {v: v for v in g.vertices}
    members = {v: [v] for v in g.vertices}
    next_id = max(g.vertices, default=-1) + 1
    remaining = len(members)
    events = []
    for t, eid, i in order:
        e = g.edges[i]
        a, b = cid[e.u], cid[e.v]
        if a == b:
            events.append(FlowEvent(t, eid, (a, a), a, remaining, False))
            continue
        new = next_id
        next_id += 1
        merged = members.pop(a) + members.pop(b)
        members[new] = merged
        for x in merged:
            cid[x] = new
        remaining -= 1
        events.append(FlowEvent(t, eid, (a, b), new, remaining, True))
    blocks = tuple(sorted(tuple(sorted(ms)) for ms in members.values()))
    return FlowTrajectory(g, q, events, blocks, mode=mode, seed=seed)


def _sample_configuration(g, q, sampler, rng, sweeps, burn_in, method):
    if sampler == "exact":
        return fk_oracle.exact_sample(g, q, rng).mask
    if sampler == "mcmc":
        return fk_sampler.sample_after(g, q, sweeps, burn_in, rng, method=method)
    raise ValueError(f"unknown sampler {sampler!r} (expected 'exact' or 'mcmc')")


def run(g: WeightedMultigraph, q: float, rng: np.random.Generator, sampler: str = "exact", *,
        sweeps: int = 100, burn_in: int = 100, method: str = "heat_bath",
        seed: int | None = None) -> FlowTrajectory:
    """Sample ``w`` then replay its openings in clock order."""
    if sampler == "mcmc" and q < 1:
        raise ValueError("q must be >= 1 for the MCMC sampler")
    w = _sample_configuration(g, q, sampler, rng, sweeps, burn_in, method)
    clocks = rng.standard_exponential(g.n_edges)
    return replay(g, q, w, clocks, seed=seed)


def run_many(g: WeightedMultigraph, q: float, n: int, rng: np.random.Generator
             ) -> Iterator[FlowTrajectory]:
    """``n`` independent trajectories using one enumerated distribution (exact sampler)."""
    dist = fk_oracle.distribution(g, q)
    masks = fk_oracle.sample_masks(dist, n, rng)
    clocks = rng.standard_exponential((n, g.n_edges))
    for mask, xi in zip(masks.tolist(), clocks):
        yield replay(g, q, mask, xi)


def first_collapse_times(g: WeightedMultigraph, q: float, n: int, rng: np.random.Generator
                         ) -> np.ndarray:
    """Vectorised ``T1`` for ``n`` runs; ``inf`` where no edge is open."""
    dist = fk_oracle.distribution(g, q)
    masks = fk_oracle.sample_masks(dist, n, rng)
    clocks = rng.standard_exponential((n, g.n_edges))
    bits = (masks[:, None] >> np.arange(g.n_edges)) & 1
    return np.where(bits.astype(bool), clocks, np.inf).min(axis=1, initial=np.inf)


def state_at(traj: FlowTrajectory, t: float, convention: str = "exact") -> SimpleWeightedGraph:
    """Collapsed weighted graph at time ``t``.

    ``exact`` erodes every original edge separately and then adds the
    conductances joining two clusters. ``paper`` merges conductances at each
    collapse and erodes the merged value as a single edge.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = traj.graph
    owner = traj.cluster_ids_at(t)
    vertices = tuple(sorted(set(owner.values())))
    decay = math.exp(-t)
    if convention == "exact":
        weights: dict[tuple[int, int], float] = {}
        for e in g.edges:
            a, b = owner[e.u], owner[e.v]
            if a == b:
                continue
            key = (a, b) if a < b else (b, a)
            weights[key] = weights.get(key, 0.0) + math.log1p(e.pi * decay)
        return SimpleWeightedGraph(vertices, {k: c for k, c in weights.items() if c > 0})
    if convention == "paper":
        scaled = _paper_weights(traj, t)
        return SimpleWeightedGraph(
            vertices, {k: math.log1p(x * decay) for k, x in scaled.items() if x > 0})
    raise ValueError(f"unknown convention {convention!r}")


def _paper_weights(traj: FlowTrajectory, t: float) -> dict[tuple[int, int], float]:
    """Merged odds rescaled to time 0: the odds at time s are ``value * exp(-s)``."""
    scaled: dict[tuple[int, int], float] = {}
    for e in traj.graph.edges:
        key = (e.u, e.v) if e.u < e.v else (e.v, e.u)
        scaled[key] = (1.0 + scaled.get(key, 0.0)) * (1.0 + e.pi) - 1.0
    for ev in traj.events:
        if ev.time > t:
            break
        if ev.collapse:
            scaled = merge_pair_odds(scaled, ev.merged, ev.new, ev.time)
    return scaled


def merge_pair_odds(scaled: dict, pair: tuple[int, int], new: int, tau: float) -> dict:
    """Collapse ``pair`` at time ``tau`` using ``c'(xy, z) = c(x, z) + c(y, z)``.

    Weights are time-0 rescaled odds; conductances add, so ``1 + odds``
    multiply at the collapse time.
    """
    x, y = pair
    decay, grow = math.exp(-tau), math.exp(tau)
    out: dict[tuple[int, int], float] = {}
    towards: dict[int, float] = {}
    for (a, b), val in scaled.items():
        if {a, b} == {x, y}:
            continue
        if a in (x, y) or b in (x, y):
            z = b if a in (x, y) else a
            towards[z] = towards.get(z, 0.0) + math.log1p(val * decay)
        else:
            out[(a, b)] = val
    for z, c in towards.items():
        key = (new, z) if new < z else (z, new)
        out[key] = math.expm1(c) * grow
    return out
