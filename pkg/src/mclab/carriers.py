"""Unstable curves, the pullback metric and non-atomic lifts of pushed measures.

Curves are graphs ``t = gamma(theta)`` over an interval of the (unwrapped)
base coordinate, stored as nodes with values and slopes and read back as a
cubic Hermite interpolant. Carriers are short curves, tangent to the
unstable cone, whose slope field is Lipschitz with a global constant K0.

Given a simple admissible measure (carrier plus density) and an iterate n,
``disintegrate`` writes the push-forward ``f^n_*(Gamma, phi)`` as an average
of simple admissible measures on sub-arcs of ``f^n(Gamma)``: the sub-arc of
x is the ball of radius ``R_a(x)`` in the pullback metric, and the densities
follow the three-step recipe (spread, normalise, transport).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from . import _kernels as K
from .dynamics import Point, SkewProductMap
from .hyperbolicity import auto_aperture
from .measures import EmpiricalMeasure, TestDictionary

R0 = 0.1
DEFAULT_NODES = 2**12 + 1
GAUSS_ORDER = 8
LOG3 = math.log(3.0)
# boundary limit of rho / phi: the window geometry near an endpoint is the toy model's
EDGE_RHO = 0.75 * LOG3


def _gauss(q: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(q)
    return x, w


def _invert_monotone(spl, dspl, x_nodes, y_nodes, target, iters: int = 8):
    """Solve spl(x) = target for an increasing Hermite spline."""
    x = np.interp(target, y_nodes, x_nodes)
    for _ in range(iters):
        x = np.clip(x - (spl(x) - target) / dspl(x), x_nodes[0], x_nodes[-1])
    return x


# ---------------------------------------------------------------------------
# curves and carriers
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Curve:
    """Graph t = gamma(theta) over [theta[0], theta[-1]] (theta unwrapped)."""

    theta: np.ndarray
    t: np.ndarray
    slope: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "t", np.asarray(self.t, dtype=float))
        object.__setattr__(self, "slope", np.asarray(self.slope, dtype=float))
        if th.ndim != 1 or th.size < 2:
            raise ValueError("a curve needs at least two nodes")
        if self.t.shape != th.shape or self.slope.shape != th.shape:
            raise ValueError("theta, t and slope must have the same length")
        if not np.all(np.diff(th) > 0):
            raise ValueError("nodes must be strictly increasing in theta")

    @cached_property
    def _spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.t, self.slope)

    @cached_property
    def _dspline(self):
        return self._spline.derivative()

    @cached_property
    def _arc(self) -> tuple[np.ndarray, CubicHermiteSpline]:
        x, w = _gauss(GAUSS_ORDER)
        a, b = self.theta[:-1], self.theta[1:]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        pts = mid[:, None] + half[:, None] * x
        seg = half * np.sum(w * np.sqrt(1.0 + self._dspline(pts) ** 2), axis=1)
        s = np.concatenate(([0.0], np.cumsum(seg)))
        return s, CubicHermiteSpline(self.theta, s, np.sqrt(1.0 + self.slope**2))

    @property
    def n_nodes(self) -> int:
        return self.theta.size

    @property
    def arclength(self) -> np.ndarray:
        """Arclength of each node from the left end."""
        return self._arc[0]

    @property
    def length(self) -> float:
        return float(self._arc[0][-1])

    def graph(self, th):
        return self._spline(th)

    def graph_slope(self, th):
        return self._dspline(th)

    def graph_curvature(self, th):
        """d(slope)/d(theta)."""
        return self._spline.derivative(2)(th)

    def arclength_at(self, th):
        return self._arc[1](th)

    def theta_at_arclength(self, s):
        s_nodes, spl = self._arc
        return _invert_monotone(spl, spl.derivative(), self.theta, s_nodes, np.asarray(s, float))

    @property
    def lip_const(self) -> float:
        """Lipschitz constant of the slope field with respect to arclength.

        The Hermite second derivative is linear on each interval, so its
        extremes sit at the interval ends.
        """
        c = self._spline.c
        h = np.diff(self.theta)
        left = 2.0 * c[1]
        right = 6.0 * c[0] * h + 2.0 * c[1]
        den_l = np.sqrt(1.0 + self.slope[:-1] ** 2)
        den_r = np.sqrt(1.0 + self.slope[1:] ** 2)
        return float(max(np.max(np.abs(left) / den_l), np.max(np.abs(right) / den_r)))

    @property
    def max_slope(self) -> float:
        return float(np.max(np.abs(self.slope)))

    def sample_uniform(self, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
        """m points distributed by arclength; returns (theta mod 1, t)."""
        th = self.theta_at_arclength(rng.random(m) * self.length)
        return np.mod(th, 1.0), self.graph(th)


@dataclass(frozen=True, eq=False)
class Carrier(Curve):
    """A curve of arclength radius < r0 whose middle node is its centre."""

    def __post_init__(self):
        super().__post_init__()
        if self.n_nodes % 2 == 0:
            raise ValueError("a carrier needs an odd number of nodes")
        if not self.radius < R0:
            raise ValueError(f"carrier radius {self.radius:.6g} is not below r0 = {R0}")

    @property
    def centre(self) -> Point:
        i = self.n_nodes // 2
        return Point(float(self.theta[i] % 1.0), float(self.t[i]))

    @property
    def radius(self) -> float:
        s = self.arclength
        i = self.n_nodes // 2
        return float(max(s[i], s[-1] - s[i]))


@dataclass(frozen=True)
class AdmissibilityConstants:
    """Cone aperture, domination ratio and the curvature bound K0."""

    aperture: float
    tau: float
    sup_q: float
    K0: float
    r0: float = R0

    def to_dict(self) -> dict:
        return {"aperture": self.aperture, "tau": self.tau, "sup_q": self.sup_q,
                "K0": self.K0, "r0": self.r0}


def admissibility_constants(f: SkewProductMap, n_grid: int = 256) -> AdmissibilityConstants:
    """K0 = 2 sup|Q| / (d^2 (1 - tau^2)), Q = h_thth + 2 h_tht s + h_tt s^2.

    Under one step a graph's d(slope)/d(theta) becomes (Q + h_t kappa) / d^2,
    so this K0 is invariant with room to spare. Q is quadratic in s and its
    sup over the cone is taken at the ends or the vertex.
    """
    ap = auto_aperture(f).aperture
    tau = f.sup_dc() / f.base_degree
    th = (np.arange(n_grid) + 0.5) / n_grid
    tt = np.linspace(0.0, 1.0, n_grid + 1)
    TH, TT = np.meshgrid(th, tt, indexing="ij")
    a, b, e = f.second_arrays(TH, TT)
    cands = [np.full_like(a, -ap), np.full_like(a, ap)]
    with np.errstate(divide="ignore", invalid="ignore"):
        vert = np.where(e != 0.0, -b / e, 0.0)
    cands.append(np.clip(vert, -ap, ap))
    q = max(float(np.max(np.abs(a + 2.0 * b * s + e * s * s))) for s in cands)
    d2 = float(f.base_degree) ** 2
    k0 = 2.0 * q / (d2 * (1.0 - tau * tau)) if q > 0 else 1.0
    return AdmissibilityConstants(ap, tau, q, k0)


def check_admissible(curve: Curve, consts: AdmissibilityConstants, tol: float = 1e-9):
    """Raise ValueError unless slopes lie in the cone and Lip <= K0."""
    if curve.max_slope > consts.aperture * (1.0 + tol):
        raise ValueError(f"curve leaves the unstable cone: slope {curve.max_slope:.6g} "
                         f"> aperture {consts.aperture:.6g}")
    if curve.lip_const > consts.K0 * (1.0 + tol):
        raise ValueError(f"slope field Lipschitz constant {curve.lip_const:.6g} "
                         f"exceeds K0 = {consts.K0:.6g}")


@dataclass(frozen=True)
class SineGraph:
    """t = level + amp * sin(2 pi k (theta - theta0) + phase)."""

    level: float
    amp: float
    k: int = 1
    phase: float = 0.0
    theta0: float = 0.0

    def value(self, th):
        return self.level + self.amp * np.sin(2 * np.pi * self.k * (th - self.theta0) + self.phase)

    def slope(self, th):
        w = 2 * np.pi * self.k
        return self.amp * w * np.cos(w * (th - self.theta0) + self.phase)


def make_closed_curve(shape: SineGraph, n_nodes: int = 1025) -> Curve:
    """One full turn of the graph over [0, 1]."""
    th = np.linspace(0.0, 1.0, n_nodes)
    return Curve(th, shape.value(th), shape.slope(th))


def make_carrier(f: SkewProductMap, centre: Point, radius: float,
                 amp: float = 0.0, k: int = 1, phase: float = 0.0,
                 n_nodes: int = DEFAULT_NODES, consts: AdmissibilityConstants | None = None
                 ) -> Carrier:
    """Carrier through ``centre`` with nodes equally spaced in arclength.

    The graph is t = centre.t + amp (sin(2 pi k (theta - theta_c) + phase)
    - sin(phase)). Raises ValueError when the result is not admissible.
    """
    if n_nodes < 3 or n_nodes % 2 == 0:
        raise ValueError("n_nodes must be odd and >= 3")
    if not 0.0 < radius < R0:
        raise ValueError(f"radius must lie in (0, {R0})")
    shape = SineGraph(0.0, amp, k, phase, centre.theta)
    off = centre.t - amp * math.sin(phase)
    half = n_nodes // 2
    dense = 64 * half + 1
    sides = []
    for sign in (-1.0, 1.0):
        u = np.linspace(0.0, radius * 1.0000001, dense)  # theta offsets; arc >= offset
        th = centre.theta + sign * u
        g = np.sqrt(1.0 + shape.slope(th) ** 2)
        arc = integrate.cumulative_simpson(g, x=u, initial=0.0)
        targets = np.linspace(0.0, radius, half + 1)
        sides.append(centre.theta + sign * np.interp(targets, arc, u))
    theta = np.concatenate((sides[0][::-1], sides[1][1:]))
    c = Carrier(theta, off + shape.value(theta), shape.slope(theta))
    check_admissible(c, consts or admissibility_constants(f))
    return c


def random_admissible_curve(f: SkewProductMap, rng, closed: bool = True,
                            consts: AdmissibilityConstants | None = None,
                            max_amp: float = 0.08, n_nodes: int = 1025) -> Curve:
    """Random sine graph tangent to the cone with Lip <= K0, inside (0, 1)."""
    consts = consts or admissibility_constants(f)
    k = 1
    w = 2 * np.pi * k
    amp_cap = min(max_amp, 0.9 * consts.aperture / w, 0.9 * consts.K0 / (w * w))
    amp = float(rng.uniform(0.0, amp_cap))
    level = float(rng.uniform(0.1 + amp, 0.9 - amp))
    phase = float(rng.uniform(0.0, 2 * np.pi))
    shape = SineGraph(level, amp, k, phase)
    if closed:
        c = make_closed_curve(shape, n_nodes)
    else:
        th0 = float(rng.random())
        th = th0 + np.linspace(-0.05, 0.05, n_nodes)
        c = Curve(th, shape.value(th), shape.slope(th))
    check_admissible(c, consts)
    return c


# ---------------------------------------------------------------------------
# simple admissible measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SimpleAdmissibleMeasure:
    """Carrier plus per-node density, normalised against normalised arclength.

    The density is read as piecewise linear in theta between nodes.
    """

    carrier: Curve
    density: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.density, dtype=float)
        if phi.shape != self.carrier.theta.shape:
            raise ValueError("density must have one value per node")
        if not np.all(phi > 0) or not np.all(np.isfinite(phi)):
            raise ValueError("density must be positive and finite")
        s = self.carrier.arclength
        mass = np.trapezoid(phi, s) / s[-1]
        object.__setattr__(self, "density", phi / mass)

    @classmethod
    def uniform(cls, carrier: Curve) -> "SimpleAdmissibleMeasure":
        return cls(carrier, np.ones(carrier.n_nodes))

    def phi(self, th):
        return np.interp(th, self.carrier.theta, self.density)

    @property
    def log_bounds(self) -> tuple[float, float]:
        return float(np.log(self.density.min())), float(np.log(self.density.max()))

    def normalization_defect(self) -> float:
        s = self.carrier.arclength
        return abs(float(np.trapezoid(self.density, s) / s[-1]) - 1.0)


def direct_pushforward(src: SimpleAdmissibleMeasure, f: SkewProductMap, n: int,
                       m_points: int = 2**18, dictionary=None) -> EmpiricalMeasure:
    """f^n_*(Gamma, phi) by midpoint sampling of the source in theta."""
    g = src.carrier
    lo, hi = g.theta[0], g.theta[-1]
    th = lo + (hi - lo) * (np.arange(m_points) + 0.5) / m_points
    w = src.phi(th) * np.sqrt(1.0 + g.graph_slope(th) ** 2)
    a, b = np.mod(th, 1.0), g.graph(th)
    a, b = np.ascontiguousarray(a), np.ascontiguousarray(b)
    for _ in range(n):
        a, b = f.step_arrays(a, b)
    return EmpiricalMeasure.from_points(a, b, w, dictionary)


# ---------------------------------------------------------------------------
# pullback metric and radius function
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PullbackTable:
    """d^{Gamma,n}-arclength S at each node and dS/dtheta there."""

    theta: np.ndarray
    S: np.ndarray
    dS: np.ndarray
    n: int

    @cached_property
    def spline(self) -> CubicHermiteSpline:
        return CubicHermiteSpline(self.theta, self.S, self.dS)

    def theta_at(self, S):
        spl = self.spline
        return _invert_monotone(spl, spl.derivative(), self.theta, self.S, np.asarray(S, float))

    @property
    def total(self) -> float:
        return float(self.S[-1])


def _push_graph(g: Curve, f: SkewProductMap, th: np.ndarray, n: int):
    """Image points, slopes and d(slope)/d(theta) of the graph under f^n."""
    th = np.ascontiguousarray(th, dtype=float).ravel()
    return K.curvature_push(np.mod(th, 1.0), np.ascontiguousarray(g.graph(th)),
                            np.ascontiguousarray(g.graph_slope(th)),
                            np.ascontiguousarray(g.graph_curvature(th)), int(n), *f.params)


def pullback_metric(g: Curve, f: SkewProductMap, n: int) -> PullbackTable:
    """Cumulative |Df^n tangent| arclength at each node.

    Along the graph, dS/dtheta = d^n sqrt(1 + s_n^2) with s_n the image
    slope; integrated by Gauss-Legendre on each node interval.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    dn = float(f.base_degree) ** n
    x, w = _gauss(GAUSS_ORDER)
    a, b = g.theta[:-1], g.theta[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = (mid[:, None] + half[:, None] * x).ravel()
    _, _, sl, _ = _push_graph(g, f, pts, n)
    dens = (dn * np.sqrt(1.0 + sl * sl)).reshape(-1, GAUSS_ORDER)
    S = np.concatenate(([0.0], np.cumsum(half * (dens @ w))))
    _, _, sl_nodes, _ = _push_graph(g, f, g.theta, n)
    return PullbackTable(g.theta, S, dn * np.sqrt(1.0 + sl_nodes**2), n)


def radius_from_table(S: np.ndarray, a: float) -> np.ndarray:
    return np.minimum(a, 0.5 * np.minimum(S - S[0], S[-1] - S))


def radius_function(g: Curve, f: SkewProductMap, n: int, a: float) -> np.ndarray:
    """R_a = min(a, d^{Gamma,n}(x, boundary) / 2) at each node."""
    if not 0.0 < a < R0:
        raise ValueError(f"a must lie in (0, {R0})")
    return radius_from_table(pullback_metric(g, f, n).S, a)


def window_bounds(S, S0: float, S1: float, a: float):
    """V_y = {x : |S_x - S_y| < R_a(x)} as an S-interval (closed form)."""
    S = np.asarray(S, dtype=float)
    left = np.maximum.reduce([S - a, (2.0 * S + S0) / 3.0, 2.0 * S - S1])
    right = np.minimum.reduce([S + a, 2.0 * S - S0, (2.0 * S + S1) / 3.0])
    return left, right


# ---------------------------------------------------------------------------
# disintegration
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LiftedMeasure:
    """Lift of f^n_*(Gamma, phi): node x carries (Gamma_x, phi_x) with weight rho(x).

    Children are stored at Gauss nodes in the pullback metric: ``child_*``
    arrays have shape (n_nodes, q); ``child_mass`` rows sum to 1. When the
    source is too coarse for the requested n (``resolved`` false) only the
    weights are computed, using locally constant stretch.
    """

    source: SimpleAdmissibleMeasure
    n: int
    a: float
    S: np.ndarray
    R: np.ndarray
    omega: np.ndarray          # outer quadrature weights, sum 1
    rho: np.ndarray            # renormalised so that sum(omega * rho) = 1
    rho_defect: float          # |sum(omega * rho) - 1| before renormalising
    resolved: bool
    C0: float = math.nan
    C1: float = math.nan
    child_theta: np.ndarray | None = field(default=None, repr=False)
    child_t: np.ndarray | None = field(default=None, repr=False)
    child_slope: np.ndarray | None = field(default=None, repr=False)
    child_phi: np.ndarray | None = field(default=None, repr=False)
    child_mass: np.ndarray | None = field(default=None, repr=False)
    child_lip: np.ndarray | None = field(default=None, repr=False)

    @property
    def has_children(self) -> bool:
        return self.child_theta is not None

    def node_weights(self) -> np.ndarray:
        return self.omega * self.rho

    def full_radius_fraction(self) -> float:
        full = self.R >= self.a * (1.0 - 1e-12)
        return float(np.sum(self.node_weights()[full]))

    def evaluate(self, dictionary=None) -> EmpiricalMeasure:
        """The barycentre as a weighted point cloud."""
        if not self.has_children:
            raise ValueError("lift was built without children")
        w = self.node_weights()[:, None] * self.child_mass
        return EmpiricalMeasure.from_points(self.child_theta, self.child_t, w, dictionary)

    def sandwich_margins(self) -> tuple[float, float]:
        """Worst margins of B_{R/2} in V_x and V_x in B_{3R}, in S units.

        Both are >= 0 when the sandwich holds at every node.
        """
        left, right = window_bounds(self.S, self.S[0], self.S[-1], self.a)
        lo = np.minimum(self.S - left, right - self.S)
        hi = np.maximum(self.S - left, right - self.S)
        return float(np.min(lo - 0.5 * self.R)), float(np.min(3.0 * self.R - hi))

    def sandwich_holds(self, tol: float = 1e-12) -> bool:
        inner, outer = self.sandwich_margins()
        scale = max(self.a, 1.0)
        return inner >= -tol * scale and outer >= -tol * scale

    def radius_lipschitz(self) -> float:
        """max |dR / dS| between adjacent nodes."""
        dS = np.diff(self.S)
        ok = dS > 0
        return float(np.max(np.abs(np.diff(self.R)[ok]) / dS[ok])) if ok.any() else 0.0


def _trapezoid_weights(s: np.ndarray) -> np.ndarray:
    h = np.diff(s)
    w = np.zeros_like(s)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w / (s[-1] - s[0])


def log_stretch_lipschitz(f: SkewProductMap, consts: AdmissibilityConstants,
                     n_samples: int = 20000, seed=0) -> float:
    """Measured Lip(log stretch) along admissible curves, summed as 1/(1 - tau).

    The one-step stretch of the unit tangent (1, s)/|(1, s)| is
    sqrt(d^2 + (h_th + h_t s)^2) / sqrt(1 + s^2); its arclength derivative is
    sampled over the cone and |d slope/d arc| <= K0 by central differences.
    """
    rng = np.random.default_rng(seed)
    th = rng.random(n_samples)
    tt = rng.random(n_samples) * f.fiber_period
    s = rng.uniform(-consts.aperture, consts.aperture, n_samples)
    kap = rng.choice([-1.0, 1.0], n_samples) * consts.K0 * np.sqrt(1.0 + s * s)
    d = float(f.base_degree)

    def logstretch(a, b, c):
        dc, dcu = f.tangent_arrays(a, b)
        return 0.5 * np.log(d * d + (dcu + dc * c) ** 2) - 0.5 * np.log1p(c * c)

    h = 1e-6
    grad = (logstretch(th + h, tt + h * s, s + h * kap)
            - logstretch(th - h, tt - h * s, s - h * kap)) / (2 * h)
    lip = float(np.max(np.abs(grad) / np.sqrt(1.0 + s * s)))
    return lip / (1.0 - consts.tau)


def disintegrate(src: SimpleAdmissibleMeasure, f: SkewProductMap, n: int, a: float,
                 q: int = GAUSS_ORDER, strict: bool = True,
                 consts: AdmissibilityConstants | None = None) -> LiftedMeasure:
    """Lift of f^n_*(Gamma, phi) to carriers of radius R_a(x).

    Step 1 spreads phi over the windows, phi~_x(y) = phi(y) / (Gamma,1)(V_y);
    step 2 sets rho(x) = int_{W_x} phi~_x d(Gamma,1); step 3 transports
    phi~_x / rho(x) to Gamma_x = f^n(W_x) through the Jacobian
    J = (|Gamma| / |Gamma_x|) |Df^n tangent|.

    Raises ValueError when the node spacing in the pullback metric exceeds
    a / 4 (``strict``), or when a child carrier leaves the cone or breaks
    the K0 bound. With ``strict=False`` an under-resolved source yields a
    weights-only lift.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not 0.0 < a < R0:
        raise ValueError(f"a must lie in (0, {R0})")
    consts = consts or admissibility_constants(f)
    g = src.carrier
    table = pullback_metric(g, f, n)
    S, S0, S1 = table.S, 0.0, table.total
    R = radius_from_table(S, a)
    s_nodes = g.arclength
    L = g.length
    omega = _trapezoid_weights(s_nodes)
    phi_nodes = src.density
    resolved = bool(np.max(np.diff(S)) <= a / 4.0)
    if not resolved:
        if strict:
            raise ValueError("curve is too short for the node resolution at this n "
                             f"(max pullback spacing {np.max(np.diff(S)):.3g} > a/4)")
        rho = _rho_local(S, R, S0, S1, a, phi_nodes, q)
        return _finish(src, n, a, S, R, omega, rho, resolved)

    xg, wg = _gauss(q)
    edge = R <= 0.0
    # Gauss nodes in S over each window [S_i - R_i, S_i + R_i]
    Sy = S[:, None] + R[:, None] * xg
    th_y = table.theta_at(Sy.ravel())
    left, right = window_bounds(Sy.ravel(), S0, S1, a)
    s_arc = g.arclength_at
    len_v = s_arc(table.theta_at(right)) - s_arc(table.theta_at(left))
    ti, tt, sl, kap = _push_graph(g, f, th_y, n)
    src_slope = g.graph_slope(th_y)
    stretch = float(f.base_degree) ** n * np.sqrt((1.0 + sl * sl) / (1.0 + src_slope**2))
    phi_y = src.phi(th_y)
    with np.errstate(divide="ignore", invalid="ignore"):
        tilde = np.where(len_v > 0, phi_y * L / len_v, 0.0)           # step 1
        integrand = (tilde / (L * stretch)).reshape(S.size, q)
    rho = R * (integrand @ wg)                                          # step 2
    rho = np.where(edge, EDGE_RHO * phi_nodes, rho)

    with np.errstate(divide="ignore", invalid="ignore"):
        jac = (L / (2.0 * R[:, None])) * stretch.reshape(S.size, q)
        child_phi = tilde.reshape(S.size, q) / (rho[:, None] * jac)    # step 3
    child_phi = np.where(edge[:, None], 1.0, child_phi)
    child_mass = 0.5 * wg[None, :] * child_phi

    sl2 = sl.reshape(S.size, q)
    lip = (np.abs(kap) / np.sqrt(1.0 + sl * sl)).reshape(S.size, q)
    if np.max(np.abs(sl2)) > consts.aperture:
        raise ValueError("a child carrier leaves the unstable cone")
    child_lip = lip.max(axis=1)
    if np.max(child_lip) > consts.K0:
        raise ValueError("a child carrier breaks the K0 curvature bound")

    c0 = log_stretch_lipschitz(f, consts)
    c1 = _volume_distortion(table, S, R)
    lift = _finish(src, n, a, S, R, omega, rho, resolved, c0, c1)
    lift.child_theta = ti.reshape(S.size, q)
    lift.child_t = tt.reshape(S.size, q)
    lift.child_slope = sl2
    lift.child_phi = child_phi
    lift.child_mass = child_mass
    lift.child_lip = child_lip
    return lift


def _finish(src, n, a, S, R, omega, rho, resolved, c0=math.nan, c1=math.nan):
    total = float(np.dot(omega, rho))
    return LiftedMeasure(src, n, a, S, R, omega, rho / total, abs(total - 1.0),
                         resolved, c0, c1)


def _rho_local(S, R, S0, S1, a, phi_nodes, q):
    """rho under locally constant stretch: phi(x) int_{W_x} dS / |V_y|_S."""
    xg, wg = _gauss(q)
    Sy = S[:, None] + R[:, None] * xg
    left, right = window_bounds(Sy, S0, S1, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(right > left, 1.0 / (right - left), 0.0)
    rho = phi_nodes * R * (inv @ wg)
    return np.where(R <= 0.0, EDGE_RHO * phi_nodes, rho)


def _volume_distortion(table: PullbackTable, S, R) -> float:
    """C1 = max over nodes of sqrt(max/min dS/dtheta-stretch over B_{3R})."""
    dS = table.dS
    lo = np.searchsorted(S, S - 3.0 * R, side="left")
    hi = np.searchsorted(S, S + 3.0 * R, side="right")
    worst = 1.0
    # sliding extremes; windows are short so a direct loop over nodes is fine
    for i in range(S.size):
        seg = dS[lo[i]:max(hi[i], lo[i] + 1)]
        worst = max(worst, float(seg.max() / seg.min()))
    return math.sqrt(worst)


def density_envelope(lift: LiftedMeasure, D: float) -> tuple[float, float]:
    """(lower, upper) = ((D^2 C)^-1, D^2 C), C = e^{3 a C0} C1^2 42."""
    c = math.exp(3.0 * lift.a * lift.C0) * lift.C1**2 * 42.0
    return 1.0 / (D * D * c), D * D * c


def density_bounds_check(lift: LiftedMeasure, D: float) -> bool:
    """True iff every child density lies inside the density envelope."""
    if not lift.has_children:
        raise ValueError("lift has no children to check")
    phi = lift.source.density
    if phi.min() < 1.0 / D * (1 - 1e-12) or phi.max() > D * (1 + 1e-12):
        raise ValueError("source density is not within [1/D, D]")
    lo, hi = density_envelope(lift, D)
    cp = lift.child_phi
    return bool(np.all(cp >= lo) and np.all(cp <= hi))


def curvature_growth_check(g: Curve, f: SkewProductMap, n_list,
                           consts: AdmissibilityConstants | None = None,
                           n_probe: int = 4097) -> list[float]:
    """Lipschitz constant of the slope field of f^n(g) for each n in n_list.

    Raises ValueError if g itself is not admissible.
    """
    consts = consts or admissibility_constants(f)
    check_admissible(g, consts)
    th = np.linspace(g.theta[0], g.theta[-1], n_probe)
    out = []
    for n in n_list:
        _, _, sl, kap = _push_graph(g, f, th, int(n))
        out.append(float(np.max(np.abs(kap) / np.sqrt(1.0 + sl * sl))))
    return out


@dataclass(eq=False)
class CesaroLift:
    """Equal-weight union of lifts of f^k_*(Gamma, phi), k = 0..n-1."""

    components: list[LiftedMeasure]

    @property
    def n(self) -> int:
        return len(self.components)

    def full_radius_fraction(self) -> float:
        return float(np.mean([c.full_radius_fraction() for c in self.components]))

    def evaluate(self, dictionary=None) -> EmpiricalMeasure:
        parts = [c.evaluate(dictionary) for c in self.components]
        th = np.concatenate([p.theta for p in parts])
        t = np.concatenate([p.t for p in parts])
        w = np.concatenate([p.weights / len(parts) for p in parts])
        return EmpiricalMeasure.from_points(th, t, w, dictionary)


def cesaro_lift(g, f: SkewProductMap, n: int, a: float, phi=None,
                consts: AdmissibilityConstants | None = None) -> CesaroLift:
    """Lift of (1/n) sum_{k<n} f^k_* mu_0 by disintegrating each term.

    ``g`` is a Carrier (uniform density unless ``phi`` is given) or a
    SimpleAdmissibleMeasure. Terms whose iterate outruns the node
    resolution carry weights only.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    src = g if isinstance(g, SimpleAdmissibleMeasure) else (
        SimpleAdmissibleMeasure(g, phi) if phi is not None else SimpleAdmissibleMeasure.uniform(g))
    consts = consts or admissibility_constants(f)
    return CesaroLift([disintegrate(src, f, k, a, strict=False, consts=consts)
                       for k in range(n)])


# ---------------------------------------------------------------------------
# the toy model on (0, infinity) with R(x) = x / 2
# ---------------------------------------------------------------------------

def _positive(*xs):
    for x in xs:
        if not x > 0:
            raise ValueError("toy model arguments must be positive")


def toy_window(y: float) -> tuple[float, float]:
    """V_y = {x : |y - x| < x / 2} = (2y/3, 2y)."""
    _positive(y)
    return 2.0 * y / 3.0, 2.0 * y


def toy_spread_density(x: float, y: float) -> float:
    """phi~_x(y) = m(I_x) / m(V_y) = 3x / (4y)."""
    _positive(x, y)
    return 3.0 * x / (4.0 * y)


def toy_density(x: float, y: float) -> float:
    """phi_x(y) = x / (y log 3)."""
    _positive(x, y)
    return x / (y * LOG3)


def toy_rho() -> float:
    return 0.75 * LOG3


def toy_rho_numeric(x: float) -> float:
    """rho(x) = int phi~_x dm_x over I_x = (x/2, 3x/2) by adaptive quadrature."""
    _positive(x)
    val, _ = integrate.quad(lambda y: toy_spread_density(x, y), 0.5 * x, 1.5 * x,
                            epsabs=0.0, epsrel=1e-13)
    return val / x


def verify_toy_identity(E: tuple[float, float]) -> float:
    """|int (phi_x m_x)(E) d(rho m)(x) - m(E)| for an interval E.

    The outer integral runs over the x with I_x meeting E, (2 inf E / 3, 2 sup E).
    """
    e0, e1 = float(E[0]), float(E[1])
    _positive(e0, e1)
    if not e1 > e0:
        raise ValueError("E must be a nonempty interval")
    rho = toy_rho()

    def inner(x):
        lo, hi = max(0.5 * x, e0), min(1.5 * x, e1)
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(lambda y: toy_density(x, y) / x, lo, hi,
                                epsabs=0.0, epsrel=1e-13)
        return val

    # kinks where the ends of I_x cross the ends of E
    brk = sorted({2 * e0 / 3, 2 * e1 / 3, 2 * e0, 2 * e1})
    lo, hi = brk[0], brk[-1]
    val, _ = integrate.quad(lambda x: rho * inner(x), lo, hi, points=brk[1:-1],
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return abs(val - (e1 - e0))
