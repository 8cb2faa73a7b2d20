"""MCMC for the random-cluster measure: heat-bath and Swendsen-Wang chains.

Chains start from the all-closed configuration (free boundary). The
heat-bath update needs "are the endpoints connected without this edge",
which is answered by a breadth-first search over open edges; that search is
the hot spot of the single-edge chain.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .graph_core import WeightedMultigraph

__all__ = [
    "ChainState",
    "MarginalEstimate",
    "SamplerGraph",
    "estimate_marginal",
    "heat_bath_step",
    "heat_bath_sweep",
    "count_clusters",
    "new_chain",
    "run_chain",
    "sample_after",
    "sw_sweep",
]

N_BATCHES = 32


class SamplerGraph:
    """Index-based view of a multigraph used by the chains."""

    def __init__(self, g: WeightedMultigraph):
        self.graph = g
        index = {v: i for i, v in enumerate(g.vertices)}
        self.n = g.n_vertices
        self.m = g.n_edges
        self.u = np.array([index[e.u] for e in g.edges], dtype=np.int64)
        self.v = np.array([index[e.v] for e in g.edges], dtype=np.int64)
        self.pi = np.array(g.pis(), dtype=float)
        self.p = np.array(g.ps(), dtype=float)
        self.adj: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for i, (a, b) in enumerate(zip(self.u.tolist(), self.v.tolist())):
            self.adj[a].append((b, i))
            self.adj[b].append((a, i))
        self._ul = self.u.tolist()
        self._vl = self.v.tolist()
        self._pil = self.pi.tolist()
        self._pl = self.p.tolist()


@dataclass
class ChainState:
    open: list[bool]
    k: int
    sweeps: int = 0
    stream_id: int = 0
    debug: bool = False

    def mask(self) -> int:
        return sum(1 << i for i, b in enumerate(self.open) if b)

    def to_array(self) -> np.ndarray:
        return np.array(self.open, dtype=bool)


@dataclass
class MarginalEstimate:
    mean: float
    stderr: float
    ess: float
    batch_means: list[float] = field(default_factory=list, repr=False)


def _as_sampler_graph(g) -> SamplerGraph:
    return g if isinstance(g, SamplerGraph) else SamplerGraph(g)


def _check_q(q) -> None:
    if q < 1:
        raise ValueError(f"samplers are exposed for q >= 1 only, got q={q}")


def count_clusters(sg: SamplerGraph, open_: np.ndarray | list) -> int:
    open_ = np.asarray(open_, dtype=bool)
    if sg.n == 0:
        return 0
    ncomp, _ = _components(sg, open_)
    return ncomp


def _components(sg: SamplerGraph, open_: np.ndarray) -> tuple[int, np.ndarray]:
    adj = coo_matrix((np.ones(int(open_.sum())), (sg.u[open_], sg.v[open_])), shape=(sg.n, sg.n))
    return connected_components(adj, directed=False)


def new_chain(g, stream_id: int = 0, debug: bool = False) -> ChainState:
    sg = _as_sampler_graph(g)
    return ChainState([False] * sg.m, sg.n, 0, stream_id, debug)


def _connected_without(sg: SamplerGraph, open_: list[bool], edge: int) -> bool:
    src, dst = sg._ul[edge], sg._vl[edge]
    if src == dst:
        return True
    seen = {src}
    queue = deque([src])
    adj = sg.adj
    while queue:
        x = queue.popleft()
        for y, j in adj[x]:
            if j != edge and open_[j] and y not in seen:
                if y == dst:
                    return True
                seen.add(y)
                queue.append(y)
    return False


def heat_bath_step(state: ChainState, g, q: float, rng: np.random.Generator,
                   edge: int | None = None, u: float | None = None) -> ChainState:
    """Resample one uniformly chosen edge from its conditional law.

    Open with probability ``p_e`` if the endpoints are joined in ``w - e``,
    else ``pi_e / (pi_e + q)``. ``edge`` and ``u`` may be supplied to reuse
    pre-drawn randomness. Updates ``state`` in place and returns it.
    """
    sg = _as_sampler_graph(g)
    if sg.m == 0:
        return state
    if edge is None:
        edge = int(rng.integers(sg.m))
    if u is None:
        u = rng.random()
    connected = _connected_without(sg, state.open, edge)
    pi = sg._pil[edge]
    prob = sg._pl[edge] if connected else pi / (pi + q)
    new = u < prob
    old = state.open[edge]
    if new != old and not connected:
        state.k += -1 if new else 1
    state.open[edge] = new
    if state.debug:
        rebuilt = count_clusters(sg, state.open)
        if rebuilt != state.k:
            raise AssertionError(f"cluster cache {state.k} != rebuilt {rebuilt}")
    return state


def heat_bath_sweep(state: ChainState, g, q: float, rng: np.random.Generator) -> ChainState:
    """``|E|`` random-scan heat-bath updates."""
    _check_q(q)
    sg = _as_sampler_graph(g)
    edges = rng.integers(sg.m, size=sg.m).tolist() if sg.m else []
    us = rng.random(sg.m).tolist()
    for edge, u in zip(edges, us):
        heat_bath_step(state, sg, q, rng, edge, u)
    state.sweeps += 1
    return state


def _labels_small(sg: SamplerGraph, open_: list[bool]) -> tuple[int, list[int]]:
    parent = list(range(sg.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, o in enumerate(open_):
        if o:
            a, b = find(sg._ul[i]), find(sg._vl[i])
            if a != b:
                parent[b] = a
    roots: dict[int, int] = {}
    labels = [roots.setdefault(find(x), len(roots)) for x in range(sg.n)]
    return len(roots), labels


SMALL_GRAPH = 256


def sw_sweep(state: ChainState, g, q: int, rng: np.random.Generator) -> ChainState:
    """Swendsen-Wang update: colour clusters uniformly, reopen monochromatic edges w.p. ``p_e``."""
    if q != int(q) or q < 1:
        raise ValueError(f"Swendsen-Wang needs an integer q >= 1, got {q}")
    sg = _as_sampler_graph(g)
    if sg.m <= SMALL_GRAPH:
        ncomp, labels = _labels_small(sg, state.open)
        colours = rng.integers(int(q), size=ncomp).tolist()
        us = rng.random(sg.m).tolist()
        state.open = [colours[labels[a]] == colours[labels[b]] and r < p
                      for a, b, r, p in zip(sg._ul, sg._vl, us, sg._pl)]
        state.k = _labels_small(sg, state.open)[0]
    else:
        ncomp, labels = _components(sg, np.asarray(state.open, dtype=bool))
        colours = rng.integers(int(q), size=ncomp)[labels]
        new = (colours[sg.u] == colours[sg.v]) & (rng.random(sg.m) < sg.p)
        state.open = new.tolist()
        state.k = count_clusters(sg, new)
    state.sweeps += 1
    return state


def _sweep_fn(method: str):
    if method == "heat_bath":
        return heat_bath_sweep
    if method == "sw":
        return sw_sweep
    raise ValueError(f"unknown MCMC method {method!r}")


def sample_after(g, q: float, sweeps: int, burn_in: int, rng: np.random.Generator,
                 method: str = "heat_bath") -> np.ndarray:
    """Configuration after ``burn_in + sweeps`` sweeps from the all-closed start."""
    _check_q(q)
    sg = _as_sampler_graph(g)
    if q == 1:
        # independent edges: one full resampling is already exact
        return rng.random(sg.m) < sg.p
    state = new_chain(sg)
    step = _sweep_fn(method)
    for _ in range(burn_in + sweeps):
        step(state, sg, q, rng)
    return state.to_array()


def run_chain(g, q: float, n_samples: int, rng: np.random.Generator, *, thin: int = 1,
              burn_in: int = 0, method: str = "heat_bath", state: ChainState | None = None):
    """Yield ``n_samples`` configurations (bool arrays), one every ``thin`` sweeps."""
    _check_q(q)
    sg = _as_sampler_graph(g)
    state = state or new_chain(sg)
    step = _sweep_fn(method)
    for _ in range(burn_in):
        step(state, sg, q, rng)
    for _ in range(n_samples):
        for _ in range(thin):
            step(state, sg, q, rng)
        yield state.to_array()


def estimate_marginal(g, q: float, edge_id: int, sweeps: int, rng: np.random.Generator, *,
                      burn_in: int | None = None, method: str = "heat_bath",
                      n_batches: int = N_BATCHES) -> MarginalEstimate:
    """Batch-means estimate of ``P(w(e) = 1)`` from one chain."""
    _check_q(q)
    sg = _as_sampler_graph(g)
    index = sg.graph.edge_index(edge_id)
    if burn_in is None:
        burn_in = max(10, sweeps // 10)
    per_batch = max(1, sweeps // n_batches)
    values = np.fromiter(
        (w[index] for w in run_chain(sg, q, per_batch * n_batches, rng, burn_in=burn_in,
                                     method=method)),
        dtype=float, count=per_batch * n_batches)
    batch_means = values.reshape(n_batches, per_batch).mean(axis=1)
    mean = float(values.mean())
    stderr = float(batch_means.std(ddof=1) / math.sqrt(n_batches))
    var = mean * (1 - mean)
    ess = float(var / stderr ** 2) if stderr > 0 else float(len(values))
    return MarginalEstimate(mean, stderr, ess, batch_means.tolist())
