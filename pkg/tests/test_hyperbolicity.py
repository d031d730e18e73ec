import math

import numpy as np
import pytest
from scipy import integrate

from mclab.carriers import make_closed_curve, SineGraph
from mclab.dynamics import Point
from mclab.hyperbolicity import (ConeField, auto_aperture, boundary_exponent, central_lyapunov,
                                 check_cone_invariance, integrated_exponent,
                                 mostly_contracting_test, unstable_exponent)
from mclab.measures import EmpiricalMeasure


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_boundary_exponent_matches_quadrature(alpha):
    val, _ = integrate.quad(lambda x: math.log(1 + alpha * math.cos(2 * math.pi * x)), 0, 1,
                            epsabs=1e-14, limit=200)
    assert boundary_exponent(alpha) == pytest.approx(val, abs=1e-12)


def test_fixed_point_exponent_exact(kan):
    # (0, 0) is fixed and dh/dt = 1 + alpha there
    est = central_lyapunov(kan, Point(0.0, 0.0), 1000)
    assert est.lambda_hat == pytest.approx(math.log(1.5), abs=1e-14)
    assert est.stderr == pytest.approx(0.0, abs=1e-14)


def test_unstable_exponent(kan):
    assert unstable_exponent(kan) == math.log(3)


def test_cone_invariance(kan, torus):
    for f in (kan, torus):
        rep = check_cone_invariance(f, auto_aperture(f), 20000, seed=1)
        assert rep.cone_invariant
        assert rep.tau_hat <= 0.5 + 1e-9


def test_too_wide_cone_detected(kan):
    # slopes far beyond the invariant aperture are mapped inside, but a
    # vanishing aperture cannot be invariant since dh/dtheta != 0
    rep = check_cone_invariance(kan, ConeField(1e-6), 5000, seed=0)
    assert not rep.cone_invariant


def test_integrated_exponent_on_boundary(kan):
    th = (np.arange(20000) + 0.5) / 20000
    mu = EmpiricalMeasure.from_points(th, np.zeros_like(th))
    assert integrated_exponent(kan, mu, 1) == pytest.approx(boundary_exponent(0.5), abs=1e-6)


def test_mostly_contracting_errors(kan):
    g = make_closed_curve(SineGraph(0.5, 0.0))
    with pytest.raises(ValueError):
        mostly_contracting_test(kan, g, 10, 0)
    with pytest.raises(ValueError):
        central_lyapunov(kan, Point(0.1, 0.1), 0)


def test_mostly_contracting_explicit_margin(kan):
    g = make_closed_curve(SineGraph(0.5, 0.02))
    frac = mostly_contracting_test(kan, g, 5000, 20, margin=0.01, seed=3)
    assert frac == 1.0
