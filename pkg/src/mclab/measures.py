"""Empirical measures, a weak-topology proxy metric, and physical-measure extraction.

Measures are compared through their moments against a fixed dictionary of
trigonometric functions ``cos/sin(2 pi (k theta + l t / period))``,
``|k|, |l| <= p``, one function per half-plane pair plus the constant
(``(2p+1)^2`` functions in total). The distance
``sqrt(sum_i w_i (m_i - n_i)^2)`` with ``w = 1 / (1 + k^2 + l^2)`` metrizes
weak convergence on the compact phase space as ``p -> infinity``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .dynamics import Point, SkewProductMap

DEFAULT_DEGREE = 8
DEFAULT_PERIOD = 2.0
ABSORB_TOL = 1e-13


@dataclass(frozen=True)
class TestDictionary:
    """Trig dictionary; ``period`` is the fiber period used in the t-frequency.

    The default period 2 keeps the two boundary circles t = 0 and t = 1 of
    the cylinder distinguishable (with period 1 they would share moments).
    """

    __test__ = False  # not a pytest class

    max_degree: int = DEFAULT_DEGREE
    period: float = DEFAULT_PERIOD

    def __post_init__(self):
        if self.max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        if not self.period > 0:
            raise ValueError("period must be positive")

    @property
    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        p = self.max_degree
        ks, ls = [], []
        for k in range(0, p + 1):
            for l in range(-p, p + 1):
                if k > 0 or l > 0:
                    ks.append(k)
                    ls.append(l)
        return np.array(ks, dtype=np.int64), np.array(ls, dtype=np.int64)

    @property
    def size(self) -> int:
        return (2 * self.max_degree + 1) ** 2

    @property
    def weights(self) -> np.ndarray:
        ks, ls = self.pairs
        w = 1.0 / (1.0 + ks**2 + ls**2)
        return np.concatenate(([1.0], w, w))

    def labels(self) -> list[str]:
        ks, ls = self.pairs
        out = ["1"]
        out += [f"cos({k},{l})" for k, l in zip(ks, ls)]
        out += [f"sin({k},{l})" for k, l in zip(ks, ls)]
        return out

    def describe(self) -> dict:
        return {"max_degree": self.max_degree, "period": self.period, "size": self.size}

    def assemble(self, re: np.ndarray, im: np.ndarray, total) -> np.ndarray:
        """Moment vector [1, cos..., sin...] from summed exponentials."""
        return np.concatenate((np.ones(np.shape(re)[:-1] + (1,)), re / total, im / total),
                              axis=-1)

    def moments(self, theta, t, weights=None) -> np.ndarray:
        theta = np.ascontiguousarray(theta, dtype=float).ravel()
        t = np.ascontiguousarray(t, dtype=float).ravel()
        if weights is None:
            weights = np.full(theta.size, 1.0 / max(theta.size, 1))
        weights = np.ascontiguousarray(weights, dtype=float).ravel()
        ks, ls = self.pairs
        re, im = K.pair_sums_points(theta, t, weights, self.max_degree,
                                    float(self.period), ks, ls)
        total = weights.sum()
        return self.assemble(re, im, total)

    def evaluate(self, theta: float, t: float) -> np.ndarray:
        """All dictionary functions at one point."""
        return self.moments(np.array([theta]), np.array([t]))


@dataclass
class EmpiricalMeasure:
    """Weighted point cloud with cached moments.

    Centroids of clusters and streamed Birkhoff averages carry moments only
    (``theta is None``).
    """

    dictionary: TestDictionary
    moments: np.ndarray
    theta: np.ndarray | None = None
    t: np.ndarray | None = None
    weights: np.ndarray | None = None

    @classmethod
    def from_points(cls, theta, t, weights=None, dictionary=None) -> "EmpiricalMeasure":
        dictionary = dictionary or TestDictionary()
        theta = np.asarray(theta, dtype=float).ravel()
        t = np.asarray(t, dtype=float).ravel()
        if theta.shape != t.shape:
            raise ValueError("theta and t must have the same length")
        if weights is None:
            weights = np.full(theta.size, 1.0 / theta.size)
        else:
            weights = np.asarray(weights, dtype=float).ravel()
            if np.any(weights < 0):
                raise ValueError("weights must be nonnegative")
            weights = weights / weights.sum()
        return cls(dictionary, dictionary.moments(theta, t, weights), theta, t, weights)

    @classmethod
    def from_moments(cls, moments, dictionary=None) -> "EmpiricalMeasure":
        dictionary = dictionary or TestDictionary()
        moments = np.asarray(moments, dtype=float)
        if moments.shape != (dictionary.size,):
            raise ValueError("moment vector does not match the dictionary")
        return cls(dictionary, moments)

    def recompute(self) -> np.ndarray:
        if self.theta is None:
            return self.moments
        return self.dictionary.moments(self.theta, self.t, self.weights)


def moment_distance(a, b, dictionary: TestDictionary):
    """Weighted distance along the last axis; broadcasts over leading axes."""
    diff = np.asarray(a) - np.asarray(b)
    out = np.sqrt(np.sum(dictionary.weights * diff * diff, axis=-1))
    return float(out) if out.ndim == 0 else out


def weak_distance(mu: EmpiricalMeasure, nu: EmpiricalMeasure, dictionary=None) -> float:
    if mu.dictionary != nu.dictionary:
        raise ValueError("measures use different dictionaries")
    if dictionary is not None and dictionary != mu.dictionary:
        raise ValueError("dictionary mismatch")
    return moment_distance(mu.moments, nu.moments, mu.dictionary)


def circle_moments(dictionary: TestDictionary, c: float) -> np.ndarray:
    """Moments of Lebesgue measure on the invariant circle t = c."""
    ks, ls = dictionary.pairs
    ang = 2.0 * math.pi * ls * c / dictionary.period
    on = ks == 0
    re = np.where(on, np.cos(ang), 0.0)
    im = np.where(on, np.sin(ang), 0.0)
    return dictionary.assemble(re, im, 1.0)


# ---------------------------------------------------------------------------
# Birkhoff averages
# ---------------------------------------------------------------------------

def _grid_sums(f: SkewProductMap, theta_cols, t_rows, n, dictionary):
    ks, ls = dictionary.pairs
    circles = np.array(f.invariant_circles, dtype=float)
    return K.birkhoff_grid(np.ascontiguousarray(theta_cols, dtype=float),
                           np.ascontiguousarray(t_rows, dtype=float),
                           int(n), *f.params, dictionary.max_degree,
                           float(dictionary.period), ks, ls, circles, ABSORB_TOL)


def birkhoff_moments(f: SkewProductMap, x0: Point, n: int, dictionary=None):
    """Time averages along orbit(x0, n); returns (moments at n, moments at n // 2)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    dictionary = dictionary or TestDictionary()
    h_re, h_im, f_re, f_im, _ = _grid_sums(f, [x0.theta], [x0.t], n, dictionary)
    full = dictionary.assemble(f_re[0, 0], f_im[0, 0], n)
    half = dictionary.assemble(h_re[0, 0], h_im[0, 0], n // 2)
    return full, half


GRID_THETA_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0


def cell_grid(f: SkewProductMap, g: int) -> tuple[np.ndarray, np.ndarray]:
    """G x G grid over the trapping region, one point per cell.

    Fiber values sit at cell centres. Base values sit at a golden-ratio
    offset inside each cell: cell centres such as 1/16 are dyadic doubles
    whose x d orbits are exactly periodic in floating point.
    """
    if g < 1:
        raise ValueError("grid size must be >= 1")
    cols = (np.arange(g) + GRID_THETA_OFFSET) / g
    rows = (np.arange(g) + 0.5) / g
    return cols, rows * f.fiber_period


@dataclass
class PhysicalMeasureReport:
    measures: list[EmpiricalMeasure]
    basin_fractions: list[float]
    unresolved_fraction: float
    params: dict
    labels: np.ndarray = field(repr=False)        # (G_theta, G_t), -1 unresolved
    lambda_hat: np.ndarray = field(repr=False)
    converged: np.ndarray = field(repr=False)
    point_moments: np.ndarray = field(repr=False)

    @property
    def n_measures(self) -> int:
        return len(self.measures)

    def summary(self) -> dict:
        return {
            "n_measures": self.n_measures,
            "fractions": [float(x) for x in self.basin_fractions],
            "unresolved": float(self.unresolved_fraction),
            "params": self.params,
        }


def greedy_cluster(vectors: np.ndarray, order: np.ndarray, radius: float,
                   dictionary: TestDictionary) -> np.ndarray:
    """First-fit clustering in the given visiting order; returns labels."""
    labels = np.full(vectors.shape[0], -1, dtype=np.int64)
    seeds: list[int] = []
    for idx in order:
        if seeds:
            dist = moment_distance(vectors[seeds], vectors[idx], dictionary)
            j = int(np.argmin(dist))
            if dist[j] <= radius:
                labels[idx] = j
                continue
        labels[idx] = len(seeds)
        seeds.append(idx)
    return labels


def extract_physical_measures(f: SkewProductMap, grid: int, n: int,
                              tol_conv: float = 0.02, delta_cluster: float | None = None,
                              dictionary=None) -> PhysicalMeasureReport:
    """Cluster converged Birkhoff averages over a G x G grid.

    A grid point counts as converged when its moments at horizons n and
    n/2 differ by at most ``tol_conv``; converged moment vectors are
    clustered first-fit at radius ``delta_cluster`` (default 10 * tol_conv),
    visiting points in lexicographic (theta, t) order.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    dictionary = dictionary or TestDictionary()
    if delta_cluster is None:
        delta_cluster = 10.0 * tol_conv
    cols, rows = cell_grid(f, grid)
    h_re, h_im, f_re, f_im, lsum = _grid_sums(f, cols, rows, n, dictionary)
    full = dictionary.assemble(f_re, f_im, n)
    half = dictionary.assemble(h_re, h_im, n // 2)
    gap = moment_distance(full, half, dictionary)
    converged = gap <= tol_conv

    flat = full.reshape(-1, dictionary.size)
    conv_flat = converged.ravel()
    # (col, row) raveling is already lexicographic in (theta, t)
    order = np.flatnonzero(conv_flat)
    sub = greedy_cluster(flat, order, delta_cluster, dictionary)
    labels = np.full(conv_flat.shape, -1, dtype=np.int64)
    labels[order] = sub[order]
    n_clusters = int(labels.max()) + 1 if order.size else 0

    total = conv_flat.size
    measures, fractions = [], []
    for j in range(n_clusters):
        members = labels == j
        measures.append(EmpiricalMeasure.from_moments(flat[members].mean(axis=0), dictionary))
        fractions.append(members.sum() / total)
    unresolved = (total - conv_flat.sum()) / total
    params = {
        "map": f.describe(),
        "grid": grid,
        "n": n,
        "tol_conv": tol_conv,
        "delta_cluster": delta_cluster,
        "dictionary": dictionary.describe(),
    }
    return PhysicalMeasureReport(
        measures=measures,
        basin_fractions=fractions,
        unresolved_fraction=unresolved,
        params=params,
        labels=labels.reshape(converged.shape),
        lambda_hat=lsum / n,
        converged=converged,
        point_moments=full,
    )


def basin_map(f: SkewProductMap, grid: int, report: PhysicalMeasureReport) -> np.ndarray:
    """Label each grid point by its nearest physical measure (-1 unresolved).

    Indexing is ``labels[i_theta, j_t]``. Points farther than the report's
    clustering radius from every centroid are unresolved.
    """
    if report.n_measures < 1:
        raise ValueError("report has no physical measures")
    dictionary = report.measures[0].dictionary
    p = report.params
    if grid == p["grid"]:
        moments, converged = report.point_moments, report.converged
    else:
        n, tol = p["n"], p["tol_conv"]
        cols, rows = cell_grid(f, grid)
        h_re, h_im, f_re, f_im, _ = _grid_sums(f, cols, rows, n, dictionary)
        moments = dictionary.assemble(f_re, f_im, n)
        half = dictionary.assemble(h_re, h_im, n // 2)
        converged = moment_distance(moments, half, dictionary) <= tol
    cents = np.stack([m.moments for m in report.measures])
    dist = moment_distance(moments[..., None, :], cents, dictionary)
    near = np.argmin(dist, axis=-1)
    ok = converged & (np.min(dist, axis=-1) <= p["delta_cluster"])
    return np.where(ok, near, -1)


def block_mixing_fraction(labels: np.ndarray, block: int = 10) -> float:
    """Fraction of block x block sub-blocks that contain at least two labels."""
    g0, g1 = labels.shape
    hits = total = 0
    for i in range(0, g0 - block + 1, block):
        for j in range(0, g1 - block + 1, block):
            sub = labels[i:i + block, j:j + block]
            present = np.unique(sub[sub >= 0])
            total += 1
            hits += present.size >= 2
    return hits / total if total else 0.0


# ---------------------------------------------------------------------------
# Holonomy along fibers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HolonomyResult:
    paired_fraction: float
    jacobian: np.ndarray
    max_jac_defect: float
    curve_distance: float
    fitted_c: float
    n: int

    def to_dict(self) -> dict:
        return {
            "paired_fraction": self.paired_fraction,
            "max_jac_defect": self.max_jac_defect,
            "curve_distance": self.curve_distance,
            "fitted_C": self.fitted_c,
            "n": self.n,
            "jacobian": [float(x) for x in self.jacobian],
        }


def holonomy_probe(g1, g2, f: SkewProductMap, n: int, m_points: int = 2000,
                   n_windows: int = 16, tol: float = 1e-8) -> HolonomyResult:
    """Slide g1 onto g2 along fibers and test the stable-manifold pairing.

    For a skew product over x d the local stable manifolds are fiber
    segments, so the holonomy pairs points with equal base coordinate. A pair
    counts as matched when the forward fiber distance after n steps is at
    most ``tol``. The Jacobian is the ratio of normalised arclength measures
    over ``n_windows`` equal windows of the common base interval, each
    measure normalised on that interval.
    """
    lo = max(g1.theta[0], g2.theta[0])
    hi = min(g1.theta[-1], g2.theta[-1])
    if not hi > lo:
        raise ValueError("carriers have disjoint base projections")
    th = lo + (hi - lo) * (np.arange(m_points) + 0.5) / m_points
    t1 = g1.graph(th)
    t2 = g2.graph(th)
    a1, b1 = th % 1.0, t1
    a2, b2 = th % 1.0, t2
    for _ in range(n):
        a1, b1 = f.step_arrays(a1, b1)
        a2, b2 = f.step_arrays(a2, b2)
    gap = np.abs(b1 - b2)
    if f.torus:
        gap = np.minimum(gap, 2.0 - gap)
    paired = float(np.mean(gap <= tol))

    edges = np.linspace(lo, hi, n_windows + 1)
    len1 = np.diff(g1.arclength_at(edges))
    len2 = np.diff(g2.arclength_at(edges))
    jac = (len2 / len2.sum()) / (len1 / len1.sum())
    defect = float(np.max(np.abs(jac - 1.0)))
    grid = np.linspace(lo, hi, 4 * m_points)
    dist = float(np.max(np.abs(g1.graph(grid) - g2.graph(grid)))
                 + np.max(np.abs(g1.graph_slope(grid) - g2.graph_slope(grid))))
    fitted = defect / dist if dist > 0 else 0.0
    return HolonomyResult(paired, jac, defect, dist, fitted, n)
