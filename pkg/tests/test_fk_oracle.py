import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from fkflow import fk_oracle
from fkflow.experiments import connected_graphs
from fkflow.graph_core import CapacityError, WeightedMultigraph, generate

from conftest import LN2, bits_to_mask, brute_marginal, brute_weights

F = Fraction


def random_graph(rnd, max_edges=6):
    n = rnd.randint(1, 5)
    m = rnd.randint(0, max_edges) if n > 1 else 0
    pairs = [tuple(rnd.sample(range(n), 2)) for _ in range(m)]
    return WeightedMultigraph.from_edges(range(n), pairs, [rnd.uniform(0.0, 2.5) for _ in pairs])


# partition function -----------------------------------------------------------------

def test_single_edge_Z():
    g = generate("path:2", LN2)
    assert sum(brute_weights(g, 2, [1]).values()) == 6
    assert fk_oracle.partition_function(g, 2, [F(1)]) == 6
    assert fk_oracle.partition_function(g, 2) == pytest.approx(6.0, rel=1e-14)


def test_triangle_Z():
    g = generate("cycle:3", LN2)
    ws = brute_weights(g, 2, [1, 1, 1])
    by_open = {}
    for bits, w in ws.items():
        by_open[sum(bits)] = by_open.get(sum(bits), 0) + w
    assert by_open == {0: 8, 1: 12, 2: 6, 3: 2}
    assert fk_oracle.partition_function(g, 2, [F(1)] * 3) == 28


def test_q1_product_form():
    rnd = random.Random(4)
    for _ in range(10):
        g = random_graph(rnd)
        assert fk_oracle.partition_function(g, 1.0) == pytest.approx(
            math.prod(1 + x for x in g.pis()), rel=1e-12)


def test_deletion_contraction_examples():
    tri = generate("cycle:3", LN2)
    path = generate("path:3", LN2)
    pair = WeightedMultigraph.from_edges(range(2), [(0, 1), (0, 1)], LN2)
    assert fk_oracle.deletion_contraction_Z(path, 2, [F(1)] * 2) == 18
    assert fk_oracle.deletion_contraction_Z(pair, 2, [F(1)] * 2) == 10
    assert fk_oracle.deletion_contraction_Z(tri, 2, [F(1)] * 3) == 28
    edgeless = WeightedMultigraph(tuple(range(5)))
    assert fk_oracle.deletion_contraction_Z(edgeless, F(3, 2)) == F(3, 2) ** 5
    one = generate("path:2", 0.9)
    pi = math.expm1(0.9)
    assert fk_oracle.deletion_contraction_Z(one, 2.5) == pytest.approx(2.5 ** 2 + pi * 2.5)


@pytest.mark.parametrize("q", [0.5, 1, 1.5, 2, 3])
def test_enumeration_matches_deletion_contraction(q):
    rnd = random.Random(int(q * 10))
    for _ in range(30):
        g = random_graph(rnd)
        Z_enum = fk_oracle.distribution(g, q).Z
        Z_dc = fk_oracle.deletion_contraction_Z(g, q)
        assert Z_dc == pytest.approx(Z_enum, rel=1e-10)
        Z_brute = sum(brute_weights(g, q, g.pis()).values())
        assert Z_enum == pytest.approx(Z_brute, rel=1e-10)


def test_errors():
    g = generate("cycle:3")
    with pytest.raises(ValueError):
        fk_oracle.partition_function(g, 0)
    with pytest.raises(CapacityError):
        fk_oracle.partition_function(generate("torus:2,4"), 2)
    with pytest.raises(KeyError):
        fk_oracle.edge_marginal(g, 2, 99)


# marginals ---------------------------------------------------------------------------------

def test_marginal_examples():
    assert fk_oracle.edge_marginal(generate("path:2"), 2, 0, [F(1)]) == F(1, 3)
    tri = generate("cycle:3")
    assert brute_marginal(tri, 2, [F(1)] * 3, 0) == F(10, 28)
    assert fk_oracle.edge_marginal(tri, 2, 1, [F(1)] * 3) == F(5, 14)
    g = generate("cycle:4", 0.37)
    for e, m in zip(g.edges, fk_oracle.marginals(g, 1.0)):
        assert m == pytest.approx(e.p, rel=1e-12)


def test_distribution_normalised():
    rnd = random.Random(9)
    for _ in range(10):
        g = random_graph(rnd)
        d = fk_oracle.distribution(g, 2.0)
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert (d.probs >= 0).all()
    d = fk_oracle.distribution(generate("cycle:3"), F(3, 2), [F(1, 4)] * 3)
    assert sum(d.probs) == 1


@pytest.mark.parametrize("q", [1, 1.5, 2, 3])
@pytest.mark.parametrize("p", [0.2, 0.5, 0.8])
def test_constant_weight_marginal_bounds(q, p):
    c = -math.log1p(-p)
    for name, g in connected_graphs(4, 6, True, c):
        for m in fk_oracle.marginals(g, q):
            assert p / q - 1e-12 <= m <= p + 1e-12, name


def test_per_edge_weight_upper_bound():
    rnd = random.Random(17)
    for _ in range(40):
        g = random_graph(rnd)
        for q in (1.5, 2, 3):
            for m, p in zip(fk_oracle.marginals(g, q), g.ps()):
                assert m <= p + 1e-12


def test_marginals_monotone_in_weights():
    g = WeightedMultigraph.from_edges(range(4), [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)], 0.5)
    for q in (1.5, 2, 3):
        base = fk_oracle.marginals(g, q)
        for f in range(g.n_edges):
            for bump in (0.1, 0.5, 2.0):
                cs = [e.c for e in g.edges]
                cs[f] += bump
                bumped = fk_oracle.marginals(g.with_weights(cs), q)
                assert all(b >= a - 1e-12 for a, b in zip(base, bumped))


# FKG --------------------------------------------------------------------------------------------

def test_fkg_examples():
    g = generate("cycle:4", 0.4)
    assert fk_oracle.fkg_check(g, 1, 0, 2) == pytest.approx(0.0, abs=1e-14)
    # edges of a tree are independent for every q
    assert fk_oracle.fkg_check(generate("path:3"), 2, 0, 1, [F(1)] * 2) == 0
    # triangle: P(e, f open) = 4/28, P(e open) = 10/28
    cov = fk_oracle.fkg_check(generate("cycle:3"), 2, 0, 1, [F(1)] * 3)
    assert cov == F(4, 28) - F(10, 28) ** 2 == F(3, 196)


def test_fkg_sweep():
    worst = math.inf
    for q in (1, 1.5, 2, 3):
        for _, g in connected_graphs(4, 6, True, 0.8):
            for i, j in itertools.combinations(range(g.n_edges), 2):
                worst = min(worst, fk_oracle.fkg_check(g, q, g.edges[i].id, g.edges[j].id))
    assert worst >= -1e-12


# sampling -----------------------------------------------------------------------------------

def test_exact_sample_single_edge(rng):
    g = generate("path:2", LN2)
    n = 100_000
    hits = sum(fk_oracle.exact_sample(g, 2, rng).mask for _ in range(n))
    se = math.sqrt(1 / 3 * 2 / 3 / n)
    assert abs(hits / n - 1 / 3) < 3 * se


def test_exact_sample_q1_product(rng):
    g = generate("cycle:4", 0.6)
    n = 20_000
    counts = np.bincount([fk_oracle.exact_sample(g, 1, rng).mask for _ in range(n)], minlength=16)
    p = g.edges[0].p
    probs = [p ** bin(m).count("1") * (1 - p) ** (4 - bin(m).count("1")) for m in range(16)]
    assert stats.chisquare(counts, np.array(probs) * n).pvalue > 1e-3


def test_exact_sample_triangle_chi_square(rng):
    g = generate("cycle:3", LN2)
    n = 40_000
    counts = np.bincount([fk_oracle.exact_sample(g, 2, rng).mask for _ in range(n)], minlength=8)
    ws = brute_weights(g, 2, [1, 1, 1])
    expected = np.zeros(8)
    for bits, w in ws.items():
        expected[bits_to_mask(bits)] = w / 28 * n
    assert stats.chisquare(counts, expected).pvalue > 1e-3


def test_exact_sample_multigraph(rng):
    g = WeightedMultigraph.from_edges(range(3), [(0, 1), (0, 1), (1, 2), (0, 2)], [0.4, 0.9, 0.7, 1.2])
    n = 40_000
    counts = np.bincount([fk_oracle.exact_sample(g, 2.5, rng).mask for _ in range(n)], minlength=16)
    probs = fk_oracle.distribution(g, 2.5).probs
    assert stats.chisquare(counts, probs * n).pvalue > 1e-3


# decomposition ---------------------------------------------------------------------------------

def test_decomposition_triangle_rational():
    rep = fk_oracle.validate_decomposition(generate("cycle:3"), 2, F(1, 2), [F(1)] * 3)
    assert rep.exact
    assert rep.max_tv == 0
    assert rep.max_thinning_error == 0


def test_decomposition_float_mode():
    rep = fk_oracle.validate_decomposition(generate("cycle:3", LN2), 2.0, 0.5)
    assert not rep.exact
    assert rep.max_tv < 1e-10


def test_decomposition_q1_is_bernoulli():
    # q = 1: given v the surviving edges are independent with odds pi (1 - alpha)
    g = generate("cycle:4")
    alpha, pi = F(3, 10), F(1, 4)
    rep = fk_oracle.validate_decomposition(g, 1, alpha, [pi] * 4)
    assert rep.max_tv == 0
    new = pi * (1 - alpha)
    target = new / (1 + new)
    # P(edge 0 open in w - v | v = {}) computed by direct enumeration of the joint law
    probs = fk_oracle.distribution(g, 1, [pi] * 4).probs
    num = sum(p * (1 - alpha) ** bin(w).count("1") for w, p in enumerate(probs) if w & 1)
    den = sum(p * (1 - alpha) ** bin(w).count("1") for w, p in enumerate(probs))
    assert num / den == target


def test_decomposition_all_q_rational():
    g = WeightedMultigraph.from_edges(range(3), [(0, 1), (0, 1), (1, 2), (0, 2)])
    for q in (F(1, 2), F(1), F(5, 2)):
        rep = fk_oracle.validate_decomposition(g, q, F(7, 10), [F(1, 3), F(2), F(1), F(4)])
        assert rep.max_tv == 0


def test_decomposition_rejects_bad_alpha():
    with pytest.raises(ValueError):
        fk_oracle.validate_decomposition(generate("cycle:3"), 2, 1.0)


# survival / hazard -----------------------------------------------------------------------------

def test_survival_single_edge():
    g = generate("path:2", LN2)
    for t in (0.0, 0.3, LN2, 2.0):
        assert fk_oracle.survival_exact(g, 2, t) == pytest.approx((2 + math.exp(-t)) / 3, rel=1e-14)
    assert fk_oracle.survival_exact(g, 2, LN2) == pytest.approx(5 / 6, rel=1e-14)


def test_survival_parallel_pair(parallel_pair):
    for t in (0.1, LN2, 1.7):
        expected = (2 + 2 * math.exp(-t) + math.exp(-2 * t)) / 5
        assert fk_oracle.survival_exact(parallel_pair, 2, t) == pytest.approx(expected, rel=1e-14)


def test_survival_at_zero():
    assert fk_oracle.survival_exact(generate("cycle:4"), 3, 0.0) == pytest.approx(1.0, abs=1e-15)


def test_hazard_examples():
    assert fk_oracle.hazard_exact(generate("path:2", LN2), 2, 0.0) == pytest.approx(1 / 3)
    g = generate("cycle:4", 0.8)
    t = 0.7
    expected = sum(x * math.exp(-t) / (1 + x * math.exp(-t)) for x in g.pis())
    assert fk_oracle.hazard_exact(g, 1, t) == pytest.approx(expected, rel=1e-12)
    assert fk_oracle.hazard_exact(generate("cycle:3", LN2), 2, 0.0) == pytest.approx(15 / 14)


@pytest.mark.parametrize("t", [0.0, 0.5, 1.0, 2.0])
def test_hazard_is_log_derivative_of_survival(t):
    h = 1e-5
    for _, g in [("tri", generate("cycle:3", LN2)),
                 ("pp", WeightedMultigraph.from_edges(range(3), [(0, 1), (0, 1), (1, 2)], 0.9))]:
        for q in (1, 2, 3):
            lo = max(t - h, 0.0)
            hi = t + h
            deriv = -(math.log(fk_oracle.survival_exact(g, q, hi))
                      - math.log(fk_oracle.survival_exact(g, q, lo))) / (hi - lo)
            assert deriv == pytest.approx(fk_oracle.hazard_exact(g, q, t), abs=1e-6 if t else 1e-5)
