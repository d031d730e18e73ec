"""Skew-product map families on the cylinder and the torus.

A map is ``f(theta, t) = (d theta mod 1, h_theta(t))`` with the Kan-type
fiber ``h_theta(t) = t + alpha t (1 - t) cos(2 pi theta)``. In block
coordinates the derivative is lower triangular::

    Df = [[d,       0      ],
          [dh/dth,  dh/dt  ]]

so the central (fiber) bundle is exactly vertical and ``dh/dt`` is the
central derivative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K

TWO_PI = 2.0 * math.pi


class Space(str, enum.Enum):
    CYLINDER = "cylinder"
    TORUS = "torus"


@dataclass(frozen=True)
class Point:
    theta: float
    t: float


@dataclass(frozen=True)
class TangentBlock:
    du: float
    dc: float
    dcu: float


@dataclass(frozen=True)
class SkewProductMap:
    """Parameters of one member of the family; all methods are pure."""

    base_degree: int
    coupling: float
    space: Space = Space.CYLINDER
    fiber_kind: str = "kan"

    @property
    def d(self) -> int:
        return self.base_degree

    @property
    def alpha(self) -> float:
        return self.coupling

    @property
    def torus(self) -> bool:
        return self.space is Space.TORUS

    @property
    def fiber_period(self) -> float:
        """Length of the fiber coordinate range (1 on the cylinder, 2 on the torus)."""
        return 2.0 if self.torus else 1.0

    @property
    def invariant_circles(self) -> tuple[float, ...]:
        """Fiber values c with h_theta(c) = c for every theta."""
        return (0.0, 1.0)

    @property
    def params(self) -> tuple[int, float, bool]:
        return (self.base_degree, float(self.coupling), self.torus)

    def sup_dc(self) -> float:
        return 1.0 + self.coupling

    def inf_dc(self) -> float:
        return 1.0 - self.coupling

    def sup_dcu(self) -> float:
        # |dh/dtheta| = 2 pi alpha t(1-t)|sin| <= pi alpha / 2
        return 0.5 * math.pi * self.coupling

    def describe(self) -> dict:
        name = "kan_torus" if self.torus else "kan_cylinder"
        return {"map": name, "d": self.base_degree, "alpha": float(self.coupling)}

    # vectorised evaluation -------------------------------------------------

    def step_arrays(self, theta, t):
        theta = np.asarray(theta, dtype=float)
        t = np.asarray(t, dtype=float)
        u, sign = self._fold(t)
        c = np.cos(TWO_PI * theta)
        g = u + self.coupling * u * (1.0 - u) * c
        if self.torus:
            g = np.where(sign < 0, 2.0 - g, g) % 2.0
        y = self.base_degree * theta
        return y - np.floor(y), g

    def tangent_arrays(self, theta, t):
        """Return (dc, dcu) arrays; du is the constant base degree."""
        theta = np.asarray(theta, dtype=float)
        t = np.asarray(t, dtype=float)
        u, sign = self._fold(t)
        a = TWO_PI * theta
        dc = 1.0 + self.coupling * (1.0 - 2.0 * u) * np.cos(a)
        dcu = -TWO_PI * self.coupling * u * (1.0 - u) * np.sin(a)
        return dc, sign * dcu

    def second_arrays(self, theta, t):
        """Return (h_thth, h_tht, h_tt)."""
        theta = np.asarray(theta, dtype=float)
        t = np.asarray(t, dtype=float)
        u, sign = self._fold(t)
        a = TWO_PI * theta
        c, s = np.cos(a), np.sin(a)
        h_thth = -TWO_PI**2 * self.coupling * u * (1.0 - u) * c
        h_tht = -TWO_PI * self.coupling * (1.0 - 2.0 * u) * s
        h_tt = -2.0 * self.coupling * c
        return sign * h_thth, h_tht + 0.0 * u, sign * h_tt

    def _fold(self, t):
        if not self.torus:
            return t, np.ones_like(t)
        t = np.mod(t, 2.0)
        upper = t >= 1.0
        return np.where(upper, 2.0 - t, t), np.where(upper, -1.0, 1.0)

    def normalize(self, p: Point) -> Point:
        theta = p.theta - math.floor(p.theta)
        if self.torus:
            return Point(theta, p.t % 2.0)
        return Point(theta, min(max(p.t, 0.0), 1.0))


def make_kan_cylinder(d: int, alpha: float) -> SkewProductMap:
    """Kan-type map on S^1 x [0, 1] with both boundary circles invariant.

    Raises ``ValueError`` unless ``d >= 2``, ``0 <= alpha < 1`` and
    ``1 + alpha < d``; outside that range either the fibers stop being
    diffeomorphisms or the fiber derivative is no longer dominated.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"base degree must be an integer >= 2, got {d!r}")
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha!r}")
    if not (1.0 + alpha < d):
        raise ValueError(f"domination fails: 1 + alpha = {1 + alpha} >= d = {d}")
    return SkewProductMap(int(d), float(alpha), Space.CYLINDER, "kan")


def make_torus_double(cyl: SkewProductMap) -> SkewProductMap:
    """Glue the cylinder map to its mirror image t -> 2 - t.

    The fiber lives on R/2Z and ``h~(t) = 2 - h(2 - t)`` on [1, 2). Values
    and first derivatives match across t = 0 and t = 1; the second fiber
    derivative changes sign there, so the glued map is C^1 with Lipschitz
    derivative.
    """
    if cyl.space is not Space.CYLINDER:
        raise ValueError("input is already a torus map")
    return SkewProductMap(cyl.base_degree, cyl.coupling, Space.TORUS, cyl.fiber_kind)


def make_map(name: str, d: int = 3, alpha: float = 0.5) -> SkewProductMap:
    """Look up a map family by string id."""
    if name == "kan_cylinder":
        return make_kan_cylinder(d, alpha)
    if name == "kan_torus":
        return make_torus_double(make_kan_cylinder(d, alpha))
    raise ValueError(f"unknown map id {name!r}")


def step(f: SkewProductMap, p: Point) -> Point:
    theta, t = f.step_arrays(p.theta, p.t)
    return Point(float(theta), float(t))


def tangent(f: SkewProductMap, p: Point) -> TangentBlock:
    dc, dcu = f.tangent_arrays(p.theta, p.t)
    return TangentBlock(du=float(f.base_degree), dc=float(dc), dcu=float(dcu))


def orbit(f: SkewProductMap, p: Point, n: int) -> list[Point]:
    if n < 0:
        raise ValueError("n must be >= 0")
    ths, ts = K.orbit_kernel(float(p.theta), float(p.t), int(n), *f.params)
    return [Point(float(a), float(b)) for a, b in zip(ths, ts)]


def orbit_arrays(f: SkewProductMap, p: Point, n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 0:
        raise ValueError("n must be >= 0")
    return K.orbit_kernel(float(p.theta), float(p.t), int(n), *f.params)


def iterate_arrays(f: SkewProductMap, theta, t, n: int):
    """Apply f^n to arrays of points."""
    theta = np.array(theta, dtype=float)
    t = np.array(t, dtype=float)
    for _ in range(n):
        theta, t = f.step_arrays(theta, t)
    return theta, t
