import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from fkflow import experiments
from fkflow.graph_core import are_equivalent, merge_parallel

from conftest import LN2


def test_pc_estimate_synthetic():
    assert experiments.pc_estimate({0.2: 0.0, 0.8: 1.0}) == pytest.approx(0.5)
    assert experiments.pc_estimate({0.4: 0.1, 0.5: 0.3, 0.6: 0.7}) == pytest.approx(0.55)
    with pytest.raises(ValueError):
        experiments.pc_estimate({0.1: 0.0, 0.2: 0.1})


def test_connected_graphs_distinct():
    graphs = experiments.connected_graphs(4, 6, True)
    assert len(graphs) == 21
    simple = [merge_parallel(g) for _, g in graphs]
    for i in range(len(simple)):
        for j in range(i + 1, len(simple)):
            assert not are_equivalent(simple[i], simple[j])[0]


def test_chi_square_gof_pools_small_cells():
    stat, pvalue, dof = experiments.chi_square_gof([50, 50, 0], [0.5, 0.5, 1e-9])
    assert dof == 1 and pvalue == pytest.approx(1.0)


def test_two_sample_identical():
    a = Counter({"x": 300, "y": 200})
    _, pvalue, _ = experiments.two_sample_chi_square(a, a)
    assert pvalue == pytest.approx(1.0)


def test_decomposition_q1_slice():
    graphs = experiments.connected_graphs(3, 4, True)
    rep = experiments.campaign_decomposition(graphs, qs=(Fraction(1),))
    assert rep.passed and rep.summary["max_tv"] == 0


def test_discrepancy_small_weights():
    rep = experiments.discrepancy_report()
    for row in rep.rows:
        if row["graph"] == "parallel-pair-pi0.01":
            assert abs(row["gap"]) < 1e-4
        if row["graph"] == "path-3":
            assert abs(row["gap"]) < 1e-12
    pair = [r for r in rep.rows if r["graph"] == "parallel-pair" and r["t"] == LN2][0]
    assert pair["exact"] == pytest.approx(0.65) and pair["paper_simple"] == pytest.approx(0.70)


def test_torus_p_zero_has_no_collapses():
    rows = experiments.torus_sweep(2, 4, 2, [0.0], reps=5, master_seed=1)
    assert rows[0].collapses_mean == 0 and rows[0].largest_mean == pytest.approx(1 / 16)


def test_torus_p_one_collapses_fully():
    rows = experiments.torus_sweep(2, 4, 1, [1.0 - 1e-12], reps=5, master_seed=1)
    assert rows[0].prob_largest_gt_half == 1.0 and rows[0].collapses_mean == 15


def test_sweep_csv_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    experiments.write_sweep_csv(experiments.torus_sweep(2, 4, 2, [0.3, 0.6], 10, 5), a)
    experiments.write_sweep_csv(experiments.torus_sweep(2, 4, 2, [0.3, 0.6], 10, 5), b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0].split(",") == experiments.SWEEP_HEADER


def test_percolation_oracle_extremes():
    out = experiments.percolation_oracle(2, 4, [0.0, 1.0], reps=3)
    assert out == {0.0: 0.0, 1.0: 1.0}


def test_small_flow_campaign_passes():
    graphs = experiments.flow_suite()[:1]
    rep = experiments.campaign_flow_equivalence(3, n=4000, qs=(2,), graphs=graphs)
    assert len(rep.rows) == 5
    assert rep.passed, rep.failures()


def test_plots(tmp_path):
    rows = experiments.torus_sweep(2, 4, 1, [0.2, 0.8], 20, 1)
    experiments.plot_sweep(rows, tmp_path / "s.svg")
    experiments.plot_discrepancy(experiments.discrepancy_report(), tmp_path / "d.svg")
    assert (tmp_path / "s.svg").read_text().lstrip().startswith("<?xml")


def test_q_below_one_sweep_rejected():
    with pytest.raises(ValueError):
        experiments.torus_sweep(2, 4, 0.5, [0.5], 1)
