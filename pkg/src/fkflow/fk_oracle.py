"""Exact random-cluster computations on small graphs.

Everything here enumerates the ``2**|E|`` bond configurations (or runs a
memoised deletion-contraction recursion), so it is only meant for graphs of
a couple of dozen edges at most. Configurations are bitmasks: bit ``i`` is
the state of ``g.edges[i]``.

Two arithmetic modes are supported. If ``q`` and every edge odds ``pi`` are
``int``/``Fraction`` the computation is carried out in exact rationals;
otherwise binary64 with log-space accumulation is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Sequence

import numpy as np

from .graph_core import CapacityError, WeightedMultigraph, contract_edge

__all__ = [
    "BondConfiguration",
    "DecompositionReport",
    "ExactDistribution",
    "OpenCountPolynomial",
    "cluster_counts",
    "deletion_contraction_Z",
    "distribution",
    "edge_marginal",
    "exact_sample",
    "fkg_check",
    "hazard_exact",
    "marginals",
    "partition_function",
    "sample_masks",
    "survival_exact",
    "validate_decomposition",
]

MAX_EDGES = 24
MAX_VERTICES = 14
DC_CACHE_SIZE = 1 << 16


@dataclass(frozen=True)
class BondConfiguration:
    mask: int
    n_edges: int

    @property
    def open_count(self) -> int:
        return bin(self.mask).count("1")

    def is_open(self, index: int) -> bool:
        return bool(self.mask >> index & 1)

    def open_indices(self) -> list[int]:
        return [i for i in range(self.n_edges) if self.mask >> i & 1]


@dataclass
class ExactDistribution:
    """Probabilities of all ``2**n_edges`` masks, indexed by mask."""

    probs: np.ndarray | list
    Z: float | Fraction
    cluster_counts: np.ndarray
    n_edges: int
    exact: bool

    def open_counts(self) -> np.ndarray:
        return _popcounts(self.n_edges)

    def prob(self, mask: int):
        return self.probs[mask]


def check_capacity(g: WeightedMultigraph, max_edges: int = MAX_EDGES,
                   max_vertices: int = MAX_VERTICES) -> None:
    if g.n_edges > max_edges or g.n_vertices > max_vertices:
        raise CapacityError(
            f"graph with {g.n_vertices} vertices / {g.n_edges} edges exceeds the "
            f"enumeration cap ({max_vertices} vertices / {max_edges} edges)")


def _check_q(q) -> None:
    if not q > 0:
        raise ValueError(f"q must be positive, got {q}")


def _is_rational(x) -> bool:
    return isinstance(x, Rational)


def _resolve_pi(g: WeightedMultigraph, pi: Sequence | None) -> list:
    if pi is None:
        return g.pis()
    pi = list(pi)
    if len(pi) != g.n_edges:
        raise ValueError(f"expected {g.n_edges} edge weights, got {len(pi)}")
    if any(x < 0 for x in pi):
        raise ValueError("edge odds must be nonnegative")
    return pi


def _exact_mode(q, pis) -> bool:
    return _is_rational(q) and all(_is_rational(x) for x in pis)


@lru_cache(maxsize=32)
def _popcounts(n_edges: int) -> np.ndarray:
    masks = np.arange(1 << n_edges, dtype=np.int64)
    counts = np.zeros(masks.shape, dtype=np.int64)
    for i in range(n_edges):
        counts += (masks >> i) & 1
    return counts


def _structure(g: WeightedMultigraph) -> tuple:
    index = {v: i for i, v in enumerate(g.vertices)}
    return len(g.vertices), tuple((index[e.u], index[e.v]) for e in g.edges)


@lru_cache(maxsize=256)
def _cluster_counts(structure: tuple) -> np.ndarray:
    n, pairs = structure
    n_masks = 1 << len(pairs)
    out = np.empty(n_masks, dtype=np.int64)
    chunk = 1 << 16
    for start in range(0, n_masks, chunk):
        masks = np.arange(start, min(start + chunk, n_masks), dtype=np.int64)
        labels = np.tile(np.arange(n, dtype=np.int64), (len(masks), 1))
        bits = [((masks >> i) & 1).astype(bool) for i in range(len(pairs))]
        # min-label propagation; converges to the smallest vertex index per cluster
        changed = True
        while changed:
            changed = False
            for (u, v), b in zip(pairs, bits):
                a, c = labels[b, u], labels[b, v]
                m = np.minimum(a, c)
                if np.any(a != c):
                    changed = True
                    labels[b, u] = m
                    labels[b, v] = m
        out[start:start + len(masks)] = (labels == np.arange(n)).sum(axis=1)
    out.setflags(write=False)
    return out


def cluster_counts(g: WeightedMultigraph) -> np.ndarray:
    """Number of clusters ``k(w)`` for every mask ``w`` (read-only array)."""
    check_capacity(g)
    return _cluster_counts(_structure(g))


def distribution(g: WeightedMultigraph, q, pi: Sequence | None = None) -> ExactDistribution:
    _check_q(q)
    check_capacity(g)
    pis = _resolve_pi(g, pi)
    k = cluster_counts(g)
    n = g.n_edges
    if _exact_mode(q, pis):
        q = Fraction(q)
        pis = [Fraction(x) for x in pis]
        weights = []
        for mask in range(1 << n):
            w = q ** int(k[mask])
            for i in range(n):
                if mask >> i & 1:
                    w *= pis[i]
            weights.append(w)
        Z = sum(weights, Fraction(0))
        return ExactDistribution([w / Z for w in weights], Z, k, n, True)

    masks = np.arange(1 << n, dtype=np.int64)
    logw = k * math.log(q)
    forbidden = np.zeros(len(masks), dtype=bool)
    for i, x in enumerate(pis):
        bit = ((masks >> i) & 1).astype(bool)
        if x == 0:
            forbidden |= bit
        else:
            logw = logw + bit * math.log(x)
    logw = np.where(forbidden, -np.inf, logw)
    top = logw.max()
    w = np.exp(logw - top)
    total = w.sum()
    return ExactDistribution(w / total, float(math.exp(top) * total), k, n, False)


def partition_function(g: WeightedMultigraph, q, pi: Sequence | None = None, *,
                       cross_check: bool = True, rtol: float = 1e-10):
    """Partition function by enumeration, cross-checked against deletion-contraction."""
    Z = distribution(g, q, pi).Z
    if cross_check:
        Z_dc = deletion_contraction_Z(g, q, pi)
        if abs(Z - Z_dc) > rtol * abs(Z):
            raise ArithmeticError(f"enumeration Z={Z} disagrees with deletion-contraction Z={Z_dc}")
    return Z


def _normalize_minor(n: int, edges: tuple, q, one):
    """Strip loops and isolated vertices, relabel by first appearance.

    Returns ``(factor, key)`` with ``Z(minor) = factor * Z(key)``.
    """
    factor = one
    kept = []
    for u, v, w in edges:
        if u == v:
            factor *= one + w
        else:
            kept.append((u, v, w))
    relabel: dict[int, int] = {}
    out = []
    for u, v, w in kept:
        a = relabel.setdefault(u, len(relabel))
        b = relabel.setdefault(v, len(relabel))
        out.append((a, b, w))
    isolated = n - len(relabel)
    factor *= q ** isolated
    return factor, (len(relabel), tuple(out))


@lru_cache(maxsize=16)
def _dc_solver(q, one):
    @lru_cache(maxsize=DC_CACHE_SIZE)
    def z(key):
        n, edges = key
        if not edges:
            return q ** n
        (u, v, w), rest = edges[0], edges[1:]
        f_del, k_del = _normalize_minor(n, rest, q, one)
        lo, hi = (u, v) if u < v else (v, u)
        merged = []
        for a, b, x in rest:
            a = lo if a == hi else a
            b = lo if b == hi else b
            merged.append((a, b, x))
        # the merged vertex leaves a gap in the labels; normalisation closes it
        f_con, k_con = _normalize_minor(n - 1, tuple(merged), q, one)
        return f_del * z(k_del) + w * f_con * z(k_con)

    return z


def deletion_contraction_Z(g: WeightedMultigraph, q, pi: Sequence | None = None):
    """``Z_G = Z_{G-e} + pi_e Z_{G/e}`` with memoisation on the normalised minor."""
    _check_q(q)
    check_capacity(g)
    pis = _resolve_pi(g, pi)
    if _exact_mode(q, pis):
        q, one = Fraction(q), Fraction(1)
        pis = [Fraction(x) for x in pis]
    else:
        q, one = float(q), 1.0
        pis = [float(x) for x in pis]
    index = {v: i for i, v in enumerate(g.vertices)}
    edges = tuple((index[e.u], index[e.v], w) for e, w in zip(g.edges, pis))
    # relabelling in _normalize_minor only shifts indices, so the gap-free
    # labelling of contracted minors stays consistent
    factor, key = _normalize_minor(g.n_vertices, edges, q, one)
    return factor * _dc_solver(q, one)(key)


def marginals(g: WeightedMultigraph, q, pi: Sequence | None = None) -> list:
    """``P(w(e) = 1)`` for every edge, in edge order."""
    dist = distribution(g, q, pi)
    masks = np.arange(1 << g.n_edges, dtype=np.int64)
    out = []
    for i in range(g.n_edges):
        sel = ((masks >> i) & 1).astype(bool)
        if dist.exact:
            out.append(sum((p for p, s in zip(dist.probs, sel) if s), Fraction(0)))
        else:
            out.append(float(dist.probs[sel].sum()))
    return out


def edge_marginal(g: WeightedMultigraph, q, edge_id: int, pi: Sequence | None = None):
    index = g.edge_index(edge_id)
    return marginals(g, q, pi)[index]


def fkg_check(g: WeightedMultigraph, q, e: int, f: int, pi: Sequence | None = None):
    """Covariance of the open indicators of edges ``e`` and ``f`` (edge ids)."""
    dist = distribution(g, q, pi)
    i, j = g.edge_index(e), g.edge_index(f)
    masks = np.arange(1 << g.n_edges, dtype=np.int64)
    a = ((masks >> i) & 1).astype(bool)
    b = ((masks >> j) & 1).astype(bool)
    if dist.exact:
        pa = sum((p for p, s in zip(dist.probs, a) if s), Fraction(0))
        pb = sum((p for p, s in zip(dist.probs, b) if s), Fraction(0))
        pab = sum((p for p, s in zip(dist.probs, a & b) if s), Fraction(0))
    else:
        pa, pb, pab = (float(dist.probs[s].sum()) for s in (a, b, a & b))
    return pab - pa * pb


def sample_masks(dist: ExactDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` masks from an enumerated distribution by inverse CDF."""
    probs = np.asarray(dist.probs, dtype=float)
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, len(probs) - 1)


def exact_sample(g: WeightedMultigraph, q, rng: np.random.Generator,
                 pi: Sequence | None = None) -> BondConfiguration:
    """Exact sample by sequential conditioning on the edges in order.

    Edge ``i`` is opened with probability ``pi_i Z(H/e) / Z(H)`` where ``H`` is
    the current minor (earlier open edges contracted, closed ones deleted).
    At ``q = 1`` the edges are independent and no size cap applies.
    """
    _check_q(q)
    pis = [float(x) for x in _resolve_pi(g, pi)]
    if q == 1:
        u = rng.random(g.n_edges)
        mask = 0
        for i, x in enumerate(pis):
            if u[i] < x / (1.0 + x):
                mask |= 1 << i
        return BondConfiguration(mask, g.n_edges)
    check_capacity(g)
    q = float(q)
    z = _dc_solver(q, 1.0)
    index = {v: i for i, v in enumerate(g.vertices)}
    # current minor: vertex labels after contraction; remaining edges carry their index
    label = list(range(g.n_vertices))
    mask = 0
    for i, e in enumerate(g.edges):
        a, b = label[index[e.u]], label[index[e.v]]
        if a == b:
            # loop in the current minor: independent of everything else
            if rng.random() < pis[i] / (1.0 + pis[i]):
                mask |= 1 << i
            continue
        rest = [(label[index[f.u]], label[index[f.v]], pis[j])
                 for j, f in enumerate(g.edges) if j > i]
        f_del, k_del = _normalize_minor(g.n_vertices, tuple(rest), q, 1.0)
        merged = tuple((a if x == b else x, a if y == b else y, w) for x, y, w in rest)
        f_con, k_con = _normalize_minor(g.n_vertices - 1, merged, q, 1.0)
        # isolated-vertex counts differ by one between the two minors; both
        # factors are relative to the same vertex total so the ratio is right
        z_del = f_del * z(k_del)
        z_con = pis[i] * f_con * z(k_con)
        if rng.random() * (z_del + z_con) < z_con:
            mask |= 1 << i
            label = [a if x == b else x for x in label]
    return BondConfiguration(mask, g.n_edges)


class OpenCountPolynomial:
    """Configuration weights grouped by open-edge count.

    Under erosion ``pi -> s * pi`` (``s = exp(-t)``) the weight of ``w``
    picks up ``s**o(w)``, so ``Z(s) = sum_o A[o] s**o`` and the open-edge
    numerators ``B[i, o]`` give every marginal of the eroded measure.
    """

    def __init__(self, g: WeightedMultigraph, q, pi: Sequence | None = None):
        dist = distribution(g, q, pi)
        o = _popcounts(g.n_edges)
        n = g.n_edges
        probs = np.asarray(dist.probs, dtype=float)
        self.A = np.bincount(o, weights=probs, minlength=n + 1)
        masks = np.arange(1 << n, dtype=np.int64)
        self.B = np.empty((n, n + 1))
        for i in range(n):
            sel = ((masks >> i) & 1).astype(bool)
            self.B[i] = np.bincount(o[sel], weights=probs[sel], minlength=n + 1)
        self.n_edges = n

    def _powers(self, t: float) -> np.ndarray:
        return np.exp(-t * np.arange(self.n_edges + 1))

    def survival(self, t: float) -> float:
        """``E[exp(-t o(w))]`` under the initial measure."""
        return float(self.A @ self._powers(t))

    def marginals(self, t: float) -> np.ndarray:
        s = self._powers(t)
        return self.B @ s / (self.A @ s)

    def marginal(self, index: int, t: float) -> float:
        s = self._powers(t)
        return float(self.B[index] @ s / (self.A @ s))


def survival_exact(g: WeightedMultigraph, q, t: float, pi: Sequence | None = None) -> float:
    """``P(T1 > t)`` for the first collapse of the flow started from ``g``.

    Every open edge's first ring is a merge because ``g`` has no self-loops,
    so ``T1`` is the minimum clock over open edges and
    ``P(T1 > t) = E[exp(-t o(w))]``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    _check_q(q)
    dist = distribution(g, q, pi)
    o = _popcounts(g.n_edges)
    return float(np.asarray(dist.probs, dtype=float) @ np.exp(-t * o))


def hazard_exact(g: WeightedMultigraph, q, t: float, pi: Sequence | None = None) -> float:
    """Total opening rate at time ``t``: sum of marginals with odds ``pi * exp(-t)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    pis = _resolve_pi(g, pi)
    decay = math.exp(-t)
    return float(sum(marginals(g, q, [float(x) * decay for x in pis])))


@dataclass
class DecompositionReport:
    max_tv: float | Fraction
    n_conditionings: int
    max_thinning_error: float | Fraction
    exact: bool
    worst_mask: int | None = None


def validate_decomposition(g: WeightedMultigraph, q, alpha, pi: Sequence | None = None
                           ) -> DecompositionReport:
    """Check that ``w - v`` given ``v`` is FK on ``G/v`` with odds ``pi (1 - alpha)``.

    ``v`` keeps each open edge of ``w`` independently with probability
    ``alpha``. The joint law of ``(v, w)`` is enumerated directly; the
    reference law for each ``v`` is computed on the contracted multigraph
    built with :func:`contract_edge`. Edges that become loops in ``G/v``
    are independent with odds ``pi (1 - alpha)`` in the reference.
    """
    _check_q(q)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    pis = _resolve_pi(g, pi)
    exact = _exact_mode(q, pis) and _is_rational(alpha)
    if exact:
        q, alpha = Fraction(q), Fraction(alpha)
        pis = [Fraction(x) for x in pis]
        zero, one = Fraction(0), Fraction(1)
    else:
        q, alpha = float(q), float(alpha)
        pis = [float(x) for x in pis]
        zero, one = 0.0, 1.0
    n = g.n_edges
    dist = distribution(g, q, pis)
    full = (1 << n) - 1
    popc = _popcounts(n)

    # joint[v][w] = P(w) alpha^o(v) (1 - alpha)^(o(w) - o(v))
    joint: dict[int, dict[int, object]] = {}
    thin_marg = [zero] * n
    w_marg = [zero] * n
    for w in range(1 << n):
        pw = dist.probs[w]
        if pw == 0:
            continue
        ow = int(popc[w])
        for i in range(n):
            if w >> i & 1:
                w_marg[i] += pw
        v = w
        while True:
            ov = int(popc[v])
            pj = pw * alpha ** ov * (one - alpha) ** (ow - ov)
            joint.setdefault(v, {})[w] = pj
            for i in range(n):
                if v >> i & 1:
                    thin_marg[i] += pj
            if v == 0:
                break
            v = (v - 1) & w
    thinning_error = max((abs(thin_marg[i] - alpha * w_marg[i]) for i in range(n)), default=zero)

    new_pi = [x * (one - alpha) for x in pis]
    max_tv, worst = zero, None
    for v, row in joint.items():
        pv = sum(row.values(), zero)
        if pv == 0:
            continue
        h, rep = g, {x: x for x in g.vertices}
        for i in range(n):
            if v >> i & 1:
                e = g.edges[i]
                a, b = rep[e.u], rep[e.v]
                if a != b:
                    h = contract_edge(h, (a, b))
                    rep = {x: a if r == b else r for x, r in rep.items()}
        surviving = [g.edge_index(e.id) for e in h.edges]
        loops = [i for i in range(n) if not v >> i & 1 and i not in surviving]
        ref = distribution(h, q, [new_pi[i] for i in surviving])
        tv = zero
        for rest in _submasks(full & ~v):
            w = v | rest
            p_cond = row.get(w, zero) / pv
            sub = 0
            for j, i in enumerate(surviving):
                if rest >> i & 1:
                    sub |= 1 << j
            p_ref = ref.probs[sub]
            for i in loops:
                odds = new_pi[i]
                p_ref = p_ref * (odds if rest >> i & 1 else one) / (one + odds)
            tv += abs(p_cond - p_ref)
        tv = tv / 2
        if worst is None or tv > max_tv:
            max_tv, worst = tv, v
    return DecompositionReport(max_tv, len(joint), thinning_error, exact, worst)


def _submasks(mask: int):
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask

