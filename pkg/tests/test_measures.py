import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclab import carriers as C
from mclab.dynamics import Point
from mclab.measures import (EmpiricalMeasure, TestDictionary, birkhoff_moments,
                            block_mixing_fraction, cell_grid, circle_moments,
                            extract_physical_measures, greedy_cluster, holonomy_probe,
                            moment_distance, weak_distance)

DICT = TestDictionary(4)


def direct_moments(theta, t, w, d: TestDictionary):
    """Plain numpy evaluation of every dictionary function."""
    ks, ls = d.pairs
    ph = 2 * np.pi * (np.outer(theta, ks) + np.outer(t, ls) / d.period)
    w = w / w.sum()
    return np.concatenate(([1.0], w @ np.cos(ph), w @ np.sin(ph)))


def test_dictionary_layout():
    d = TestDictionary(8)
    assert d.size == 289
    assert len(d.labels()) == d.size == d.weights.size
    ks, ls = d.pairs
    assert np.all(d.weights[1:ks.size + 1] == 1.0 / (1 + ks**2 + ls**2))


def test_moments_match_direct_evaluation(rng):
    th, t, w = rng.random(300), rng.random(300), rng.random(300)
    mu = EmpiricalMeasure.from_points(th, t, w, DICT)
    np.testing.assert_allclose(mu.moments, direct_moments(th, t, w, DICT), atol=1e-13)


def test_circle_moments(rng):
    d = TestDictionary(5)
    th = (np.arange(4096) + 0.5) / 4096
    for c in (0.0, 0.37, 1.0):
        ref = direct_moments(th, np.full_like(th, c), np.ones_like(th), d)
        np.testing.assert_allclose(circle_moments(d, c), ref, atol=1e-12)


point_clouds = st.integers(0, 2**32 - 1)


@settings(max_examples=50)
@given(point_clouds, point_clouds, point_clouds)
def test_metric_axioms(s1, s2, s3):
    def cloud(s):
        r = np.random.default_rng(s)
        n = int(r.integers(1, 40))
        return EmpiricalMeasure.from_points(r.random(n), r.random(n), r.random(n) + 0.1, DICT)

    a, b, c = cloud(s1), cloud(s2), cloud(s3)
    assert weak_distance(a, a) == 0.0
    assert weak_distance(a, b) == pytest.approx(weak_distance(b, a), abs=1e-15)
    assert weak_distance(a, c) <= weak_distance(a, b) + weak_distance(b, c) + 1e-12


def test_weak_distance_dictionary_mismatch():
    a = EmpiricalMeasure.from_points([0.1], [0.2], dictionary=DICT)
    b = EmpiricalMeasure.from_points([0.1], [0.2], dictionary=TestDictionary(3))
    with pytest.raises(ValueError):
        weak_distance(a, b)


def test_period_two_separates_boundary_circles():
    d = TestDictionary()
    assert moment_distance(circle_moments(d, 0.0), circle_moments(d, 1.0), d) > 0.5


def test_birkhoff_average_at_fixed_point(kan):
    d = TestDictionary(3)
    full, half = birkhoff_moments(kan, Point(0.0, 0.0), 1000, d)
    np.testing.assert_allclose(full, d.evaluate(0.0, 0.0), atol=1e-12)
    np.testing.assert_allclose(half, full, atol=1e-12)


def test_cell_grid_offsets(kan, torus):
    cols, rows = cell_grid(kan, 10)
    assert cols.size == rows.size == 10
    # no column sits on a short dyadic
    assert np.all(np.abs(cols * 1024 - np.round(cols * 1024)) > 1e-6)
    np.testing.assert_allclose(rows, (np.arange(10) + 0.5) / 10)
    np.testing.assert_allclose(cell_grid(torus, 10)[1], 2 * rows)


def test_greedy_cluster():
    v = np.array([[1.0, 0.0], [1.0, 0.05], [1.0, 1.0], [1.0, 0.02]])

    class Flat:
        weights = np.ones(2)

    lab = greedy_cluster(v, np.arange(4), 0.1, Flat)
    assert list(lab) == [0, 0, 1, 0]
    assert list(greedy_cluster(v, np.array([2, 0, 1, 3]), 0.1, Flat)) == [1, 1, 0, 1]


def test_block_mixing_fraction():
    lab = np.zeros((20, 20), dtype=int)
    assert block_mixing_fraction(lab, 10) == 0.0
    lab[::2, ::2] = 1
    assert block_mixing_fraction(lab, 10) == 1.0
    lab[:10, :10] = 0
    assert block_mixing_fraction(lab, 10) == 0.75
    lab[:, :] = -1
    assert block_mixing_fraction(lab, 10) == 0.0


def test_extract_small_grid(kan):
    rep = extract_physical_measures(kan, 8, 20000)
    assert rep.labels.shape == (8, 8)
    assert sum(rep.basin_fractions) + rep.unresolved_fraction == pytest.approx(1.0)
    with pytest.raises(ValueError):
        extract_physical_measures(kan, 8, 1)


def test_holonomy_identity(kan):
    g = C.make_carrier(kan, Point(0.3, 0.02), 0.05, amp=0.01, n_nodes=257)
    res = holonomy_probe(g, g, kan, 100, 500)
    assert res.paired_fraction == 1.0
    assert res.max_jac_defect == pytest.approx(0.0, abs=1e-12)


def test_holonomy_torus_opposite_sides(torus):
    # curves just above t = 0 and just below t = 2 (= 0) share the circle's basin
    g1 = C.make_carrier(torus, Point(0.3, 0.02), 0.05, amp=0.01, n_nodes=257)
    g2 = C.make_carrier(torus, Point(0.3, 1.98), 0.05, amp=0.01, phase=0.5, n_nodes=257)
    res = holonomy_probe(g1, g2, torus, 2000, 1000)
    assert res.paired_fraction > 0.95
    assert res.max_jac_defect < 0.05


def test_holonomy_disjoint(kan):
    g1 = C.make_carrier(kan, Point(0.2, 0.1), 0.03, n_nodes=33)
    g2 = C.make_carrier(kan, Point(0.6, 0.1), 0.03, n_nodes=33)
    with pytest.raises(ValueError):
        holonomy_probe(g1, g2, kan, 10)
