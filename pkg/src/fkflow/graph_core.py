"""Weighted multigraphs, weight conventions, contraction and erosion.

Edge weights are stored as conductances ``c >= 0``. The two other conventions
are the opening probability ``p = 1 - exp(-c)`` and the odds
``pi = p / (1 - p) = exp(c) - 1``. In the ``c`` convention parallel edges add
and erosion is ``pi -> exp(-t) * pi``.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

__all__ = [
    "CapacityError",
    "ClusterPartition",
    "Edge",
    "FKParameters",
    "SimpleWeightedGraph",
    "WeightedMultigraph",
    "are_equivalent",
    "contract_edge",
    "convert_weight",
    "epsilon_skeleton",
    "erode",
    "generate",
    "graph_hash",
    "load_graph",
    "merge_parallel",
    "save_graph",
]

CONVENTIONS = ("p", "pi", "c")
EQUIVALENCE_MAX_VERTICES = 12


class CapacityError(ValueError):
    """Input exceeds a configured size cap (enumeration, equivalence search)."""


def convert_weight(value: float, from_: str, to: str) -> float:
    """Convert an edge weight between the ``p``, ``pi`` and ``c`` conventions."""
    if from_ not in CONVENTIONS or to not in CONVENTIONS:
        raise ValueError(f"unknown weight convention {from_!r} -> {to!r}")
    value = float(value)
    if math.isnan(value) or value < 0:
        raise ValueError(f"weight must be nonnegative, got {value}")
    if from_ == "p" and value >= 1:
        raise ValueError("p must lie in [0, 1); p = 1 has infinite conductance")
    if from_ == to:
        return value
    # go through c, using log1p/expm1 so small weights keep full precision
    if from_ == "p":
        c = -math.log1p(-value)
    elif from_ == "pi":
        c = math.log1p(value)
    else:
        c = value
    if to == "c":
        return c
    if to == "pi":
        if from_ == "p":
            return value / (1.0 - value)
        return math.expm1(c)
    if from_ == "pi":
        return value / (1.0 + value)
    return -math.expm1(-c)


@dataclass(frozen=True)
class Edge:
    id: int
    u: int
    v: int
    c: float

    @property
    def pi(self) -> float:
        return math.expm1(self.c)

    @property
    def p(self) -> float:
        return -math.expm1(-self.c)


@dataclass(frozen=True)
class WeightedMultigraph:
    """Finite multigraph with conductance weights; parallel edges allowed."""

    vertices: tuple[int, ...]
    edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(int(x) for x in self.vertices))
        object.__setattr__(self, "edges", tuple(self.edges))
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ValueError("duplicate vertex ids")
        ids = set()
        for e in self.edges:
            if e.id in ids:
                raise ValueError(f"duplicate edge id {e.id}")
            ids.add(e.id)
            if e.u == e.v:
                raise ValueError(f"self-loop on vertex {e.u} (edge {e.id})")
            if e.u not in vset or e.v not in vset:
                raise ValueError(f"edge {e.id} has an endpoint outside the vertex set")
            if not (e.c >= 0) or math.isinf(e.c):
                raise ValueError(f"edge {e.id} has invalid conductance {e.c}")

    @classmethod
    def from_edges(cls, vertices: Iterable[int], pairs: Iterable[tuple[int, int]],
                   c: float | Sequence[float] = math.log(2)) -> "WeightedMultigraph":
        pairs = list(pairs)
        cs = [float(c)] * len(pairs) if isinstance(c, (int, float)) else [float(x) for x in c]
        if len(cs) != len(pairs):
            raise ValueError("need one conductance per edge")
        edges = tuple(Edge(i, int(u), int(v), w) for i, ((u, v), w) in enumerate(zip(pairs, cs)))
        return cls(tuple(vertices), edges)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge(self, edge_id: int) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(f"unknown edge id {edge_id}")

    def edge_index(self, edge_id: int) -> int:
        for i, e in enumerate(self.edges):
            if e.id == edge_id:
                return i
        raise KeyError(f"unknown edge id {edge_id}")

    def pis(self) -> list[float]:
        return [e.pi for e in self.edges]

    def ps(self) -> list[float]:
        return [e.p for e in self.edges]

    def with_weights(self, c: Sequence[float]) -> "WeightedMultigraph":
        return WeightedMultigraph(
            self.vertices, tuple(Edge(e.id, e.u, e.v, float(w)) for e, w in zip(self.edges, c)))

    def relabel(self, mapping: Mapping[int, int]) -> "WeightedMultigraph":
        return WeightedMultigraph(
            tuple(mapping[x] for x in self.vertices),
            tuple(Edge(e.id, mapping[e.u], mapping[e.v], e.c) for e in self.edges))

    def to_dict(self) -> dict:
        return {
            "vertices": list(self.vertices),
            "edges": [{"u": e.u, "v": e.v, "c": e.c} for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "WeightedMultigraph":
        try:
            vertices = [int(x) for x in data["vertices"]]
            edges = [Edge(i, int(d["u"]), int(d["v"]), float(d["c"]))
                     for i, d in enumerate(data["edges"])]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed graph description: {exc}") from exc
        return cls(tuple(vertices), tuple(edges))


@dataclass(frozen=True)
class SimpleWeightedGraph:
    """At most one weight per unordered vertex pair; keys are sorted pairs."""

    vertices: tuple[int, ...]
    weights: Mapping[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        vset = set(self.vertices)
        norm: dict[tuple[int, int], float] = {}
        for (a, b), c in self.weights.items():
            if a == b:
                raise ValueError("self-loops are not allowed")
            if a not in vset or b not in vset:
                raise ValueError(f"pair {(a, b)} has an endpoint outside the vertex set")
            key = (a, b) if a < b else (b, a)
            if key in norm:
                raise ValueError(f"pair {key} given twice")
            norm[key] = float(c)
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "weights", norm)

    def weight(self, a: int, b: int) -> float:
        return self.weights.get((a, b) if a < b else (b, a), 0.0)

    def to_multigraph(self) -> WeightedMultigraph:
        pairs = sorted(self.weights)
        return WeightedMultigraph.from_edges(self.vertices, pairs, [self.weights[k] for k in pairs])


@dataclass(frozen=True)
class FKParameters:
    q: float
    convention: str = "c"

    def __post_init__(self):
        if not self.q > 0:
            raise ValueError(f"q must be positive, got {self.q}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown weight convention {self.convention!r}")

    def require_sampler_range(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1 for samplers and flow constructions")


class ClusterPartition:
    """Union-find over vertex ids that tracks the number of classes."""

    def __init__(self, vertices: Iterable[int]):
        self._parent = {v: v for v in vertices}
        self._size = {v: 1 for v in self._parent}
        self.count = len(self._parent)

    def find(self, x: int) -> int:
        parent = self._parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the classes of a and b; return False if already merged."""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self._size[ra] < self._size[rb]:
            ra, rb = rb, ra
        self._parent[rb] = ra
        self._size[ra] += self._size[rb]
        self.count -= 1
        return True

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def blocks(self) -> list[tuple[int, ...]]:
        groups: dict[int, list[int]] = {}
        for v in self._parent:
            groups.setdefault(self.find(v), []).append(v)
        return sorted(tuple(sorted(g)) for g in groups.values())

    def largest(self) -> int:
        return max((self._size[r] for r in self._parent if self._parent[r] == r), default=0)

    def copy(self) -> "ClusterPartition":
        other = ClusterPartition(())
        other._parent = dict(self._parent)
        other._size = dict(self._size)
        other.count = self.count
        return other


def merge_parallel(g: WeightedMultigraph) -> SimpleWeightedGraph:
    """Project onto a simple graph; parallel conductances add."""
    weights: dict[tuple[int, int], float] = {}
    for e in g.edges:
        key = (e.u, e.v) if e.u < e.v else (e.v, e.u)
        weights[key] = weights.get(key, 0.0) + e.c
    return SimpleWeightedGraph(g.vertices, {k: c for k, c in weights.items() if c > 0})


def contract_edge(g: WeightedMultigraph, pair: tuple[int, int]) -> WeightedMultigraph:
    """Identify ``u`` and ``v``; the merged vertex keeps the id ``u``.

    All edges joining u and v disappear. Other edges keep their ids and
    weights, so parallel edges towards a common neighbour stay separate.
    """
    u, v = pair
    if u == v:
        raise ValueError(f"cannot contract vertex {u} with itself")
    vset = set(g.vertices)
    if u not in vset or v not in vset:
        raise ValueError(f"contraction endpoints {pair} not in graph")
    edges = []
    for e in g.edges:
        a = u if e.u == v else e.u
        b = u if e.v == v else e.v
        if a != b:
            edges.append(Edge(e.id, a, b, e.c))
    return WeightedMultigraph(tuple(x for x in g.vertices if x != v), tuple(edges))


def erode(g: WeightedMultigraph, t: float) -> WeightedMultigraph:
    """Apply ``pi -> exp(-t) * pi`` to every edge."""
    if t < 0:
        raise ValueError(f"erosion time must be nonnegative, got {t}")
    decay = math.exp(-t)
    return g.with_weights([math.log1p(decay * math.expm1(e.c)) for e in g.edges])


def epsilon_skeleton(g: SimpleWeightedGraph, eps: float) -> SimpleWeightedGraph:
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    return SimpleWeightedGraph(g.vertices, {k: c for k, c in g.weights.items() if c > eps})


def are_equivalent(g1: SimpleWeightedGraph, g2: SimpleWeightedGraph, tol: float = 1e-9,
                   max_vertices: int = EQUIVALENCE_MAX_VERTICES) -> tuple[bool, dict[int, int] | None]:
    """Search for a vertex bijection phi with c2(phi x, phi y) = c1(x, y) within tol.

    Returns ``(True, phi)`` or ``(False, None)``.
    """
    n = len(g1.vertices)
    if max(n, len(g2.vertices)) > max_vertices:
        raise CapacityError(f"equivalence search capped at {max_vertices} vertices")
    if n != len(g2.vertices) or len(g1.weights) != len(g2.weights):
        return False, None
    w1 = sorted(g1.weights.values())
    w2 = sorted(g2.weights.values())
    if any(abs(a - b) > tol for a, b in zip(w1, w2)):
        return False, None

    def degree_weights(g, v):
        return sorted(c for (a, b), c in g.weights.items() if v in (a, b))

    dw1 = {v: degree_weights(g1, v) for v in g1.vertices}
    dw2 = {v: degree_weights(g2, v) for v in g2.vertices}

    def compatible(x, y):
        a, b = dw1[x], dw2[y]
        return len(a) == len(b) and all(abs(s - r) <= tol for s, r in zip(a, b))

    candidates = {x: [y for y in g2.vertices if compatible(x, y)] for x in g1.vertices}
    if any(not c for c in candidates.values()):
        return False, None
    # most constrained vertices first
    order = sorted(g1.vertices, key=lambda x: (len(candidates[x]), -len(dw1[x])))
    phi: dict[int, int] = {}
    used: set[int] = set()

    def extend(i: int) -> bool:
        if i == len(order):
            return True
        x = order[i]
        for y in candidates[x]:
            if y in used:
                continue
            if all(abs(g1.weight(x, z) - g2.weight(y, phi[z])) <= tol for z in phi):
                phi[x] = y
                used.add(y)
                if extend(i + 1):
                    return True
                del phi[x]
                used.discard(y)
        return False

    if extend(0):
        return True, dict(phi)
    return False, None


def _torus(d: int, L: int) -> tuple[list[int], list[tuple[int, int]]]:
    if d < 1 or L < 2:
        raise ValueError("torus needs d >= 1 and L >= 2")
    coords = list(itertools.product(range(L), repeat=d))
    index = {x: i for i, x in enumerate(coords)}
    pairs = []
    for x in coords:
        for k in range(d):
            y = list(x)
            y[k] = (y[k] + 1) % L
            pairs.append((index[x], index[tuple(y)]))
    return list(range(len(coords))), pairs


def generate(descriptor: str, c: float | Sequence[float] = math.log(2)) -> WeightedMultigraph:
    """Build a graph from ``torus:d,L``, ``complete:n``, ``path:n``, ``cycle:n`` or ``file:PATH``.

    A bare path ending in ``.json`` is read as a graph file, in which case the
    stored conductances are used and ``c`` is ignored.
    """
    descriptor = descriptor.strip()
    if descriptor.startswith("file:") or descriptor.endswith(".json"):
        return load_graph(descriptor.removeprefix("file:"))
    kind, _, args = descriptor.partition(":")
    try:
        nums = [int(a) for a in args.split(",")] if args else []
    except ValueError as exc:
        raise ValueError(f"cannot parse graph descriptor {descriptor!r}") from exc
    if kind == "torus" and len(nums) == 2:
        vertices, pairs = _torus(*nums)
    elif kind == "complete" and len(nums) == 1 and nums[0] >= 1:
        vertices = list(range(nums[0]))
        pairs = list(itertools.combinations(vertices, 2))
    elif kind == "path" and len(nums) == 1 and nums[0] >= 1:
        vertices = list(range(nums[0]))
        pairs = [(i, i + 1) for i in range(nums[0] - 1)]
    elif kind == "cycle" and len(nums) == 1 and nums[0] >= 2:
        n = nums[0]
        vertices = list(range(n))
        pairs = [(i, (i + 1) % n) for i in range(n)]
    else:
        raise ValueError(f"cannot parse graph descriptor {descriptor!r}")
    return WeightedMultigraph.from_edges(vertices, pairs, c)


def load_graph(path: str | Path) -> WeightedMultigraph:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON ({exc})") from exc
    return WeightedMultigraph.from_dict(data)


def save_graph(g: WeightedMultigraph, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(g.to_dict(), fh)
        fh.write("\n")


def graph_hash(g: WeightedMultigraph) -> str:
    """SHA-256 of the canonical JSON form (vertex order and edge order matter)."""
    blob = json.dumps(g.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
