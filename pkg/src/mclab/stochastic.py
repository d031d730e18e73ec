"""Small random perturbations, stationary measures and the zero-noise limit.

The noisy step is ``x -> f(x) + eps * U`` with ``U`` uniform on the box
[-1, 1]^2 (fiber coordinate only, or both). On the cylinder the fiber is
reflected at 0 and 1, which keeps the kernel absolutely continuous and the
orbit inside the phase space.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from . import _kernels as K
from .dynamics import Point, SkewProductMap, step
from .measures import GRID_THETA_OFFSET, EmpiricalMeasure, PhysicalMeasureReport, TestDictionary, moment_distance

CHUNK = 4096
MAX_VERTICES = 16


class NoiseKind(str, enum.Enum):
    FIBER_ONLY = "fiber"
    FULL = "full"


@dataclass(frozen=True)
class NoiseScheme:
    eps: float
    kind: NoiseKind = NoiseKind.FIBER_ONLY

    def __post_init__(self):
        if not 0.0 < self.eps <= 0.5:
            raise ValueError("eps must lie in (0, 0.5]")
        object.__setattr__(self, "kind", NoiseKind(self.kind))

    @property
    def full(self) -> bool:
        return self.kind is NoiseKind.FULL


def random_step(f: SkewProductMap, noise: NoiseScheme, x: Point, rng) -> Point:
    """One noisy step from x, drawing two U(-1, 1) variates from ``rng``."""
    y = step(f, x)
    u = rng.uniform(-1.0, 1.0, 2)
    t = K.perturb_fiber(y.t, noise.eps * u[1], f.torus)
    theta = y.theta
    if noise.full:
        theta = (theta + noise.eps * u[0]) % 1.0
    return Point(float(theta), float(t))


def chain_starts(f: SkewProductMap, n_chains: int) -> tuple[np.ndarray, np.ndarray]:
    """Unscrambled Halton points (first point skipped), base shifted by a golden offset.

    Raw Halton base values are short dyadics with exactly periodic x d
    orbits in floating point; fiber-only noise would never move them.
    """
    pts = qmc.Halton(d=2, scramble=False).random(n_chains + 1)[1:]
    theta = np.mod(pts[:, 0] + GRID_THETA_OFFSET, 1.0)
    return theta, pts[:, 1] * f.fiber_period


@dataclass
class StationaryEstimate:
    measure: EmpiricalMeasure
    eps: float
    n_burn: int
    n_samp: int
    n_chains: int
    seed: int
    stderr: float           # weighted-norm standard error of the pooled moments
    chain_moments: np.ndarray

    def to_dict(self) -> dict:
        return {"eps": self.eps, "n_burn": self.n_burn, "n_samp": self.n_samp,
                "n_chains": self.n_chains, "seed": self.seed, "stderr": self.stderr}


def stationary_estimate(f: SkewProductMap, noise: NoiseScheme, n_burn: int, n_samp: int,
                        n_chains: int, seed: int = 0, dictionary=None) -> StationaryEstimate:
    """Pool post-burn-in samples of ``n_chains`` noisy chains.

    Chain i draws from its own generator seeded by the i-th child of
    ``SeedSequence(seed)``, so results depend neither on threading nor on
    the chunk size. The stderr proxy is sqrt(sum_i w_i var_i / n_chains)
    with var_i the between-chain variance of moment i.
    """
    if n_burn < 0 or n_samp < 1 or n_chains < 1:
        raise ValueError("need n_burn >= 0, n_samp >= 1, n_chains >= 1")
    dictionary = dictionary or TestDictionary()
    ks, ls = dictionary.pairs
    theta, t = chain_starts(f, n_chains)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_chains)]
    acc_re = np.zeros((n_chains, ks.size))
    acc_im = np.zeros((n_chains, ks.size))
    total = n_burn + n_samp
    j0 = 0
    while j0 < total:
        c = min(CHUNK, total - j0)
        draws = np.stack([2.0 * r.random((c, 2)) - 1.0 for r in rngs])
        K.noisy_chunk(theta, t, acc_re, acc_im, j0, n_burn, *f.params, float(noise.eps),
                      noise.full, draws, dictionary.max_degree, float(dictionary.period),
                      ks, ls)
        j0 += c
    per_chain = dictionary.assemble(acc_re, acc_im, n_samp)
    pooled = per_chain.mean(axis=0)
    if n_chains > 1:
        var = per_chain.var(axis=0, ddof=1)
        stderr = float(np.sqrt(np.sum(dictionary.weights * var) / n_chains))
    else:
        stderr = 0.0
    mu = EmpiricalMeasure.from_moments(pooled, dictionary)
    if n_samp == 1:
        # each chain contributes one atom: its final state
        mu = EmpiricalMeasure.from_points(theta, t, dictionary=dictionary)
    return StationaryEstimate(mu, noise.eps, n_burn, n_samp, n_chains, seed, stderr, per_chain)


# ---------------------------------------------------------------------------
# simplex projection
# ---------------------------------------------------------------------------

def fit_simplex(target: np.ndarray, vertices: np.ndarray,
                dictionary: TestDictionary) -> tuple[np.ndarray, float]:
    """Closest convex combination of ``vertices`` to ``target``.

    Minimises the weighted moment distance over the simplex by trying every
    active set: on each support the equality-constrained least-squares
    problem is solved exactly, and the best feasible solution wins.
    Returns (alpha, residual).
    """
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    k = V.shape[0]
    if k == 0:
        raise ValueError("no vertices")
    if k > MAX_VERTICES:
        raise ValueError(f"at most {MAX_VERTICES} vertices supported")
    sw = np.sqrt(dictionary.weights)
    y = np.asarray(target, dtype=float) * sw
    Vw = V * sw
    best_a, best_r = None, np.inf
    for size in range(1, k + 1):
        for sup in itertools.combinations(range(k), size):
            a = _support_lstsq(Vw[list(sup)], y)
            if np.any(a < 0.0):
                continue
            r = float(np.linalg.norm(a @ Vw[list(sup)] - y))
            if r < best_r:
                best_r = r
                best_a = np.zeros(k)
                best_a[list(sup)] = a
    return best_a, best_r


def _support_lstsq(Vs: np.ndarray, y: np.ndarray) -> np.ndarray:
    # alpha_last = 1 - sum(others) turns the constraint into plain lstsq
    if Vs.shape[0] == 1:
        return np.ones(1)
    last = Vs[-1]
    A = (Vs[:-1] - last).T
    sol, *_ = np.linalg.lstsq(A, y - last, rcond=None)
    return np.concatenate((sol, [1.0 - sol.sum()]))


@dataclass(frozen=True)
class ZeroNoiseRow:
    eps: float
    residual: float
    alpha: tuple[float, ...]
    n_samp: int
    stderr: float

    def to_dict(self) -> dict:
        return {"eps": self.eps, "residual": self.residual, "alpha": list(self.alpha),
                "n_samp": self.n_samp, "stderr": self.stderr}


def zero_noise_test(f: SkewProductMap, noise_levels, report: PhysicalMeasureReport,
                    n_burn: int = 2000, n_samp: int = 20000, n_chains: int = 32,
                    seed: int = 0, kind: NoiseKind = NoiseKind.FIBER_ONLY) -> list[ZeroNoiseRow]:
    """Distance from each stationary estimate to the hull of the physical measures.

    Level i uses root seed ``SeedSequence(seed).spawn(len(levels))[i]``.
    """
    levels = [float(e) for e in noise_levels]
    if len(levels) < 2:
        raise ValueError("need at least two noise levels")
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ValueError("noise levels must be strictly decreasing")
    if report.n_measures < 1:
        raise ValueError("report has no physical measures")
    dictionary = report.measures[0].dictionary
    verts = np.stack([m.moments for m in report.measures])
    seeds = np.random.SeedSequence(seed).spawn(len(levels))
    rows = []
    for eps, ss in zip(levels, seeds):
        est = stationary_estimate(f, NoiseScheme(eps, kind), n_burn, n_samp, n_chains,
                                  int(ss.generate_state(1)[0]), dictionary)
        alpha, res = fit_simplex(est.measure.moments, verts, dictionary)
        rows.append(ZeroNoiseRow(eps, res, tuple(float(x) for x in alpha), n_samp, est.stderr))
    return rows


def simplex_distance_to_vertices(target, vertices, dictionary) -> np.ndarray:
    return moment_distance(np.atleast_2d(vertices), target, dictionary)
