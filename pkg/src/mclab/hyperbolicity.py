"""Partial hyperbolicity checks and central Lyapunov exponents."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import Point, SkewProductMap


@dataclass(frozen=True)
class ConeField:
    """Unstable cone {|v_c| <= aperture * |v_u|} in block coordinates.

    ``aperture`` is the largest admissible slope dt/dtheta.
    """

    aperture: float

    def __post_init__(self):
        if not self.aperture > 0:
            raise ValueError("cone aperture must be positive")


@dataclass(frozen=True)
class HyperbolicityReport:
    tau_hat: float
    n0_hat: int
    cone_invariant: bool
    samples: int
    min_margin: float
    aperture: float

    def to_dict(self) -> dict:
        return {
            "tau_hat": self.tau_hat,
            "n0_hat": self.n0_hat,
            "cone_invariant": self.cone_invariant,
            "samples": self.samples,
            "min_margin": self.min_margin,
            "aperture": self.aperture,
        }


@dataclass(frozen=True)
class ExponentEstimate:
    lambda_hat: float
    n: int
    x0: Point
    stderr: float


def auto_aperture(f: SkewProductMap) -> ConeField:
    """Smallest self-consistent aperture 2 sup|dh/dth| / (d - sup|dh/dt|).

    Falls back to 1.0 for decoupled maps, where any aperture is invariant.
    """
    num = 2.0 * f.sup_dcu()
    if num == 0.0:
        return ConeField(1.0)
    return ConeField(num / (f.base_degree - f.sup_dc()))


def check_cone_invariance(f: SkewProductMap, cone: ConeField, n_samples: int,
                          seed=0) -> HyperbolicityReport:
    """Sample points and verify Df maps the cone strictly inside itself.

    The extreme vectors (1, +-aperture) map to slopes (dcu +- dc*aperture)/d;
    the margin is aperture minus the larger absolute image slope.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    theta = rng.random(n_samples)
    t = rng.random(n_samples) * f.fiber_period
    dc, dcu = f.tangent_arrays(theta, t)
    d = float(f.base_degree)
    s = cone.aperture
    img = np.maximum(np.abs(dcu + dc * s), np.abs(dcu - dc * s)) / d
    margin = s - img
    tau = max(float(np.max(np.abs(dc))) / d, 1.0 / d)
    return HyperbolicityReport(
        tau_hat=tau,
        n0_hat=0 if tau < 1.0 else -1,
        cone_invariant=bool(np.all(margin > 0.0)),
        samples=n_samples,
        min_margin=float(margin.min()),
        aperture=s,
    )


def central_lyapunov(f: SkewProductMap, x0: Point, n: int,
                     n_batches: int = 32) -> ExponentEstimate:
    """Birkhoff average of log dh/dt along the orbit of x0.

    ``stderr`` comes from batch means over ``n_batches`` equal blocks.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    nb = min(n_batches, n)
    total, batch = K.log_dc_sum_kernel(float(x0.theta), float(x0.t), int(n),
                                       *f.params, nb)
    return ExponentEstimate(total / n, n, x0, _batch_stderr(batch, n, nb))


def _batch_stderr(batch: np.ndarray, n: int, nb: int) -> float:
    size = n // nb
    if nb < 2 or size == 0:
        return 0.0
    means = batch / size
    return float(np.std(means, ddof=1) / math.sqrt(nb))


def unstable_exponent(f: SkewProductMap) -> float:
    """Exponent of the base direction; du is constant so this is log d."""
    return math.log(f.base_degree)


def mostly_contracting_test(f: SkewProductMap, curve, n: int, m_points: int,
                            margin: float | None = None, margin_factor: float = 10.0,
                            seed=0) -> float:
    """Fraction of Lebesgue-random points on ``curve`` with exponent < -margin.

    ``curve`` is anything with ``sample_uniform(m, rng) -> (theta, t)`` and a
    positive ``length`` (see :mod:`mclab.carriers`). Without an explicit
    ``margin`` each sample uses ``margin_factor`` times its own batch-means
    stderr.
    """
    if m_points < 1:
        raise ValueError("m_points must be >= 1")
    if not curve.length > 0.0:
        raise ValueError("degenerate curve (zero length)")
    rng = np.random.default_rng(seed)
    theta, t = curve.sample_uniform(m_points, rng)
    hits = 0
    for a, b in zip(theta, t):
        est = central_lyapunov(f, Point(float(a), float(b)), n)
        thr = margin if margin is not None else margin_factor * est.stderr
        if est.lambda_hat < -thr:
            hits += 1
    return hits / m_points


def integrated_exponent(f: SkewProductMap, mu, n_block: int) -> float:
    """Average over mu's atoms of (1/N) log |D^c f^N|."""
    if n_block < 1:
        raise ValueError("n_block must be >= 1")
    if mu.theta is None or mu.theta.size == 0:
        raise ValueError("empty measure")
    sums = K.block_log_sums(mu.theta, mu.t, 1, int(n_block), *f.params)[:, 0]
    return float(np.dot(mu.weights, sums) / n_block)


def boundary_exponent(alpha: float) -> float:
    """Closed form of int_0^1 log(1 + alpha cos 2 pi x) dx."""
    return math.log((1.0 + math.sqrt(1.0 - alpha * alpha)) / 2.0)
