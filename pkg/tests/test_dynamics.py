import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclab.dynamics import (Point, iterate_arrays, make_kan_cylinder, make_map,
                            make_torus_double, orbit, orbit_arrays, step, tangent)

unit = st.floats(0.0, 1.0, exclude_max=True)
inner = st.floats(0.01, 0.99)


def reference_step(theta, t, d=3, alpha=0.5):
    """Textbook formula, evaluated in plain Python."""
    return (d * theta) % 1.0, t + alpha * t * (1 - t) * math.cos(2 * math.pi * theta)


@given(unit, st.floats(0.0, 1.0))
def test_step_matches_formula(kan, theta, t):
    y = step(kan, Point(theta, t))
    th_ref, t_ref = reference_step(theta, t)
    assert math.isclose(y.theta, th_ref, abs_tol=1e-12) or abs(abs(y.theta - th_ref) - 1) < 1e-12
    assert y.t == pytest.approx(t_ref, abs=1e-15)


@given(unit)
def test_boundary_circles_invariant(kan, theta):
    assert step(kan, Point(theta, 0.0)).t == 0.0
    assert step(kan, Point(theta, 1.0)).t == 1.0


@settings(max_examples=200)
@given(unit, inner)
def test_tangent_matches_finite_differences(kan, theta, t):
    h = 1e-6
    blk = tangent(kan, Point(theta, t))
    tp = reference_step(theta, t + h)[1]
    tm = reference_step(theta, t - h)[1]
    assert blk.dc == pytest.approx((tp - tm) / (2 * h), abs=1e-7)
    up = reference_step(theta + h, t)[1]
    um = reference_step(theta - h, t)[1]
    assert blk.dcu == pytest.approx((up - um) / (2 * h), abs=1e-7)
    assert blk.du == 3.0


@given(unit, st.floats(0.0, 1.0))
def test_torus_mirror_symmetry(torus, theta, t):
    lo = step(torus, Point(theta, t))
    hi = step(torus, Point(theta, (2.0 - t) % 2.0))
    assert (lo.t + hi.t) % 2.0 == pytest.approx(0.0, abs=1e-12) or \
        (lo.t + hi.t) % 2.0 == pytest.approx(2.0, abs=1e-12)


def test_torus_glue_is_c1(torus):
    # fiber value and derivative agree from both sides of t = 0 and t = 1
    th = np.linspace(0.0, 1.0, 37, endpoint=False)
    h = 1e-7
    for c in (0.0, 1.0):
        below = torus.tangent_arrays(th, (c - h) % 2.0)[0]
        above = torus.tangent_arrays(th, c + h)[0]
        np.testing.assert_allclose(below, above, atol=1e-6)


def test_torus_agrees_with_cylinder_on_lower_half(kan, torus):
    rng = np.random.default_rng(0)
    th, t = rng.random(1000), rng.random(1000)
    a = kan.step_arrays(th, t)
    b = torus.step_arrays(th, t)
    np.testing.assert_allclose(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1], atol=1e-15)


def test_orbit_forms_agree(kan):
    p = Point(0.123456789, 0.4)
    pts = orbit(kan, p, 50)
    ths, ts = orbit_arrays(kan, p, 50)
    assert len(pts) == 51 and pts[0] == p
    assert [q.theta for q in pts] == list(ths)
    a, b = iterate_arrays(kan, [p.theta], [p.t], 50)
    assert a[0] == pytest.approx(ths[-1], abs=1e-9)
    assert b[0] == pytest.approx(ts[-1], abs=1e-9)


@pytest.mark.parametrize("d,alpha", [(1, 0.2), (3, 1.0), (3, -0.1), (2.5, 0.2)])
def test_invalid_parameters_rejected(d, alpha):
    with pytest.raises(ValueError):
        make_kan_cylinder(d, alpha)


def test_map_lookup_errors(kan):
    with pytest.raises(ValueError):
        make_map("nope")
    with pytest.raises(ValueError):
        make_torus_double(make_torus_double(kan))
    with pytest.raises(ValueError):
        orbit(kan, Point(0.1, 0.1), -1)
