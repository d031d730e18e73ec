"""Pliss times, the uniformly hyperbolic set H(g) and stable-disc radii.

Index selection works in exact rational arithmetic on the (binary) input
values, so the result never depends on summation order or on ties being
broken by rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels as K
from .dynamics import Point, SkewProductMap

# slack subtracted from the analytic lower bound log(1 - alpha)
H_SLACK = 1e-9


@dataclass(frozen=True)
class PlissInput:
    """Sequence a_0..a_{k-1} with a_i >= h and sum a_i <= k A."""

    a: tuple[float, ...]
    h: float
    A: float
    eps: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        if not self.a:
            raise ValueError("empty sequence")
        if not all(math.isfinite(x) for x in self.a):
            raise ValueError("sequence has non-finite entries")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.h < self.A:
            raise ValueError("need h < A")
        lo = min(self.a)
        if lo < self.h:
            raise ValueError(f"min(a) = {lo!r} is below h = {self.h!r}")
        total = sum(Fraction(x) for x in self.a)
        if total > len(self.a) * Fraction(self.A):
            raise ValueError("mean of the sequence exceeds A")

    @property
    def k(self) -> int:
        return len(self.a)


@dataclass(frozen=True)
class PlissSelection:
    indices: tuple[int, ...]
    bound: float

    @property
    def count(self) -> int:
        return len(self.indices)


def pliss_bound(k: int, h: float, A: float, eps: float) -> float:
    """Guaranteed number of Pliss times, k eps / (A + eps - h)."""
    return k * eps / (A + eps - h)


def pliss_select(inp: PlissInput, allow_last: bool = True) -> PlissSelection:
    """All indices i with mean(a[i:n]) <= A + eps for every i < n <= k.

    With S(n) = sum_{j<n} (a_j - A - eps) the predicate reads
    S(i) >= max_{n > i} S(n), so one backward scan with a running maximum
    finds every index. ``allow_last=False`` drops the final index k - 1,
    whose only window is the single term a_{k-1}; the count guarantee is
    proved for the default.
    """
    c = Fraction(inp.A) + Fraction(inp.eps)
    s = [Fraction(0)]
    for x in inp.a:
        s.append(s[-1] + Fraction(x) - c)
    k = inp.k
    picked = []
    best = s[k]
    for i in range(k - 1, -1, -1):
        if s[i] >= best:
            picked.append(i)
        best = max(best, s[i])
    picked.reverse()
    if not allow_last and picked and picked[-1] == k - 1:
        picked.pop()
    return PlissSelection(tuple(picked), pliss_bound(k, inp.h, inp.A, inp.eps))


def pliss_brute_force(inp: PlissInput, allow_last: bool = True) -> tuple[int, ...]:
    """Direct O(k^2) evaluation of the predicate over every window."""
    c = Fraction(inp.A) + Fraction(inp.eps)
    a = [Fraction(x) for x in inp.a]
    k = len(a)
    out = []
    for i in range(k if allow_last else k - 1):
        ok = True
        acc = Fraction(0)
        for n in range(i + 1, k + 1):
            acc += a[n - 1]
            if acc > (n - i) * c:
                ok = False
                break
        if ok:
            out.append(i)
    return tuple(out)


# ---------------------------------------------------------------------------
# the set H(g)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HyperbolicMembership:
    x: Point
    N: int
    lam: float
    eps: float
    m: int
    member: bool
    depth_reached: int  # largest n <= m for which every prefix passes


def contraction_floor(f: SkewProductMap) -> float:
    """Lower bound h for log dc used in the density constant."""
    return math.log(f.inf_dc()) - H_SLACK


def density_constant(f: SkewProductMap, lam: float, eps: float) -> float:
    """delta = eps / (lam + 4 eps - h)."""
    return eps / (lam + 4.0 * eps - contraction_floor(f))


def _check_block_args(N: int, m: int):
    if N < 1:
        raise ValueError("N must be >= 1")
    if m < 1:
        raise ValueError("m must be >= 1")


def _passing_depth(cum: np.ndarray, rate: float) -> np.ndarray:
    """Per row, number of leading blocks n with cum[n-1] <= n * rate."""
    m = cum.shape[1]
    ok = cum <= rate * np.arange(1, m + 1)
    fail = ~ok
    first = np.where(fail.any(axis=1), fail.argmax(axis=1), m)
    return first


def detect_H(f: SkewProductMap, x: Point, N: int, lam: float, eps: float,
             m: int) -> HyperbolicMembership:
    """Membership of x in H_m: prod_{j<n} |D^c g^N(g^j x)| <= e^{n N (lam + 3 eps)}
    for 1 <= n <= m, with g = f^N's blocks taken along the orbit of x."""
    _check_block_args(N, m)
    cum = K.block_log_sums(np.array([float(x.theta)]), np.array([float(x.t)]),
                           int(m), int(N), *f.params)
    depth = int(_passing_depth(cum, N * (lam + 3.0 * eps))[0])
    return HyperbolicMembership(x, N, lam, eps, m, depth == m, depth)


def h_member_fraction(f: SkewProductMap, theta, t, N: int, lam: float, eps: float,
                      m: int) -> tuple[float, float]:
    """Fraction of the given points in H_m and its binomial stderr."""
    _check_block_args(N, m)
    theta = np.ascontiguousarray(theta, dtype=float)
    t = np.ascontiguousarray(t, dtype=float)
    if theta.size == 0:
        raise ValueError("no sample points")
    cum = K.block_log_sums(theta, t, int(m), int(N), *f.params)
    hits = _passing_depth(cum, N * (lam + 3.0 * eps)) == m
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / theta.size)


def stable_disc_radius(f: SkewProductMap, x: Point, N: int, lam: float, eps: float,
                       K_grid, m: int = 50, n_probe: int = 33) -> float:
    """Largest K in ``K_grid`` whose fiber disc around x keeps contracting.

    Probe points y share x's base coordinate with |t_y - t_x| <= K. Each
    probe must satisfy sum_{j<n} log|D^c g^N(g^j y)| <= n log sigma for
    1 <= n <= m, where sigma = e^{N (lam + 4 eps) / 2}. Raises ValueError
    when x is not in H_m; an empty grid returns 0.
    """
    K_grid = [float(k) for k in K_grid]
    if not K_grid:
        return 0.0
    memb = detect_H(f, x, N, lam, eps, m)
    if not memb.member:
        raise ValueError("point is not in H at the requested depth")
    log_sigma = 0.5 * N * (lam + 4.0 * eps)
    lo, hi = (0.0, 1.0) if not f.torus else (-math.inf, math.inf)
    best = 0.0
    for kk in K_grid:
        if kk <= best or kk <= 0.0:
            continue
        offs = np.linspace(-kk, kk, n_probe)
        ty = np.clip(x.t + offs, lo, hi)
        if f.torus:
            ty = np.mod(ty, 2.0)
        th = np.full(ty.size, float(x.theta))
        cum = K.block_log_sums(th, np.ascontiguousarray(ty), int(m), int(N), *f.params)
        if np.all(_passing_depth(cum, log_sigma) == m):
            best = kk
    return best
