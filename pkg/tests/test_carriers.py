import math

import numpy as np
import pytest
from scipy import integrate

from mclab import carriers as C
from mclab.dynamics import Point, iterate_arrays
from mclab.measures import weak_distance


@pytest.fixture(scope="module")
def consts(kan):
    return C.admissibility_constants(kan)


@pytest.fixture(scope="module")
def carrier(kan, consts):
    return C.make_carrier(kan, Point(0.3, 0.4), 0.05, amp=0.02, n_nodes=1025, consts=consts)


def test_carrier_geometry(carrier):
    assert carrier.n_nodes == 1025
    assert carrier.radius == pytest.approx(0.05, rel=1e-6)
    s = carrier.arclength
    np.testing.assert_allclose(np.diff(s), np.diff(s)[0], rtol=1e-5)
    assert carrier.centre.theta == pytest.approx(0.3, abs=1e-12)
    assert carrier.centre.t == pytest.approx(0.4, abs=1e-12)
    # arclength against a direct quadrature of sqrt(1 + t'^2)
    ref, _ = integrate.quad(lambda x: math.hypot(1.0, carrier.graph_slope(x)),
                            carrier.theta[0], carrier.theta[-1], epsabs=1e-13)
    assert carrier.length == pytest.approx(ref, rel=1e-9)


def test_carrier_rejections(kan, consts):
    with pytest.raises(ValueError):
        C.make_carrier(kan, Point(0.3, 0.4), 0.2, consts=consts)
    with pytest.raises(ValueError):
        C.make_carrier(kan, Point(0.3, 0.4), 0.05, n_nodes=1024, consts=consts)
    with pytest.raises(ValueError):
        C.make_carrier(kan, Point(0.3, 0.4), 0.05, amp=0.5, consts=consts)


def test_simple_measure_normalised(carrier):
    mu = C.SimpleAdmissibleMeasure(carrier, 3.0 + np.cos(carrier.theta))
    assert mu.normalization_defect() < 1e-12
    with pytest.raises(ValueError):
        C.SimpleAdmissibleMeasure(carrier, np.zeros(carrier.n_nodes))


def test_pullback_metric_against_resampling(kan, carrier):
    # oracle: polyline length of f^2 of a densely resampled curve
    n = 2
    tab = C.pullback_metric(carrier, kan, n)
    th = np.linspace(carrier.theta[0], carrier.theta[-1], 400001)
    a, b = iterate_arrays(kan, th % 1.0, carrier.graph(th), n)
    # unwrap the base coordinate of the image
    a = np.unwrap(a * 2 * np.pi) / (2 * np.pi)
    seg = np.hypot(np.diff(a), np.diff(b))
    dense = np.concatenate(([0.0], np.cumsum(seg)))
    ref = np.interp(carrier.theta, th, dense)
    assert np.max(np.abs(tab.S - ref)) <= 1e-6


def test_radius_function_lipschitz(kan, carrier):
    src = C.SimpleAdmissibleMeasure.uniform(carrier)
    for n in (1, 3):
        lift = C.disintegrate(src, kan, n, 0.05)
        assert lift.radius_lipschitz() <= 0.5 + 1e-9
        R = C.radius_function(carrier, kan, n, 0.05)
        np.testing.assert_allclose(R, lift.R)
    with pytest.raises(ValueError):
        C.radius_function(carrier, kan, 1, 0.5)


def test_window_bounds_definition():
    # V_y = {x : |S_x - S_y| < R(x)} with R(x) = min(a, S_x/2, (S1 - S_x)/2)
    S0, S1, a = 0.0, 1.0, 0.1
    xs = np.linspace(S0, S1, 200001)
    R = np.minimum(a, 0.5 * np.minimum(xs - S0, S1 - xs))
    for y in (0.01, 0.05, 0.3, 0.5, 0.93):
        inside = xs[np.abs(xs - y) < R]
        lo, hi = C.window_bounds(y, S0, S1, a)
        assert lo == pytest.approx(inside.min(), abs=1e-5)
        assert hi == pytest.approx(inside.max(), abs=1e-5)


def test_curvature_growth_against_finite_differences(kan, consts):
    g = C.make_closed_curve(C.SineGraph(0.5, 0.03))
    n_list = (1, 2, 3)
    got = C.curvature_growth_check(g, kan, n_list, consts, n_probe=2001)
    th = np.linspace(0.0, 1.0, 200001)
    for n, val in zip(n_list, got):
        a, b = iterate_arrays(kan, th % 1.0, g.graph(th), n)
        x = np.unwrap(a * 2 * np.pi) / (2 * np.pi)
        slope = np.gradient(b, x)
        kap = np.gradient(slope, x)
        # |d slope / d arclength| on the image graph
        ref = np.max(np.abs(kap) / np.sqrt(1 + slope**2))[()]
        assert val == pytest.approx(ref, rel=2e-3)
        assert val <= consts.K0


def test_uncurved_source_reconstruction(kan, carrier):
    src = C.SimpleAdmissibleMeasure(carrier, 1.0 + 0.3 * np.cos(7 * carrier.theta))
    for n in (0, 1, 2):
        lift = C.disintegrate(src, kan, n, 0.05)
        assert lift.rho_defect < 1e-3
        assert lift.sandwich_holds()
        assert weak_distance(lift.evaluate(), C.direct_pushforward(src, kan, n)) <= 1e-3


def test_under_resolution(kan, consts):
    g = C.make_carrier(kan, Point(0.3, 0.4), 0.05, n_nodes=33, consts=consts)
    src = C.SimpleAdmissibleMeasure.uniform(g)
    with pytest.raises(ValueError):
        C.disintegrate(src, kan, 6, 0.05, consts=consts)
    lift = C.disintegrate(src, kan, 6, 0.05, strict=False, consts=consts)
    assert not lift.resolved and not lift.has_children
    assert float(np.dot(lift.omega, lift.rho)) == pytest.approx(1.0, abs=1e-12)


def test_random_admissible_curve(kan, consts):
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = C.random_admissible_curve(kan, rng, consts=consts)
        C.check_admissible(c, consts)
        assert 0.0 < c.t.min() and c.t.max() < 1.0
    open_c = C.random_admissible_curve(kan, rng, closed=False, consts=consts)
    assert open_c.theta[-1] - open_c.theta[0] == pytest.approx(0.1)


def test_toy_model():
    for x in (0.1, 1.0, 3.7, 10.0):
        assert C.toy_rho_numeric(x) == pytest.approx(0.75 * math.log(3), abs=1e-12)
        lo, hi = C.toy_window(x)
        assert abs(x - lo) == pytest.approx(lo / 2) and abs(hi - x) == pytest.approx(hi / 2)
    # spread density is |I_x| / |V_y| with |I_x| = x
    for x, y in ((1.0, 1.2), (4.0, 3.0)):
        lo, hi = C.toy_window(y)
        assert C.toy_spread_density(x, y) == pytest.approx(x / (hi - lo))
    assert C.verify_toy_identity((1.0, 2.0)) < 1e-9
    with pytest.raises(ValueError):
        C.verify_toy_identity((2.0, 1.0))
    with pytest.raises(ValueError):
        C.toy_density(-1.0, 1.0)


def test_cesaro_lift_weights(kan, consts):
    g = C.make_carrier(kan, Point(0.3, 0.4), 0.08, n_nodes=1025, consts=consts)
    cl = C.cesaro_lift(g, kan, 4, 0.05, consts=consts)
    assert cl.n == 4
    for comp in cl.components:
        assert float(np.dot(comp.omega, comp.rho)) == pytest.approx(1.0, abs=1e-12)
