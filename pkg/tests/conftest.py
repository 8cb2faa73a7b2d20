import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from fkflow.graph_core import WeightedMultigraph, generate

LN2 = math.log(2)


def components(n, pairs):
    """Cluster count by depth-first search (independent of the package union-find)."""
    adj = {i: set() for i in range(n)}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    seen, count = set(), 0
    for s in range(n):
        if s in seen:
            continue
        count += 1
        stack = [s]
        seen.add(s)
        while stack:
            x = stack.pop()
            for y in adj[x] - seen:
                seen.add(y)
                stack.append(y)
    return count


def brute_weights(g, q, pis):
    """Unnormalised FK weight of every configuration, as ``{tuple_of_bits: weight}``."""
    index = {v: i for i, v in enumerate(g.vertices)}
    pairs = [(index[e.u], index[e.v]) for e in g.edges]
    out = {}
    for bits in itertools.product((0, 1), repeat=len(pairs)):
        w = q ** components(len(index), [p for p, b in zip(pairs, bits) if b])
        for b, x in zip(bits, pis):
            if b:
                w *= x
        out[bits] = w
    return out


def brute_marginal(g, q, pis, i):
    ws = brute_weights(g, q, pis)
    Z = sum(ws.values())
    return sum(w for bits, w in ws.items() if bits[i]) / Z


def bits_to_mask(bits):
    return sum(1 << i for i, b in enumerate(bits) if b)


@pytest.fixture
def triangle():
    return generate("cycle:3", LN2)


@pytest.fixture
def single_edge():
    return generate("path:2", LN2)


@pytest.fixture
def parallel_pair():
    return WeightedMultigraph.from_edges(range(2), [(0, 1), (0, 1)], LN2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ONE = Fraction(1)
