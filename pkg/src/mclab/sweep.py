"""Parameter sweeps of the physical-measure extraction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .measures import TestDictionary, extract_physical_measures, moment_distance


@dataclass
class SweepRow:
    param: float
    n_measures: int | None
    fractions: list[float]
    unresolved: float | None
    centroids: np.ndarray | None        # (n_measures, dictionary size), matched order
    flags: list[str] = field(default_factory=list)
    error: str | None = None
    adjacent_distance: float | None = None  # max matched distance to the previous row

    def to_dict(self, with_moments: bool = True) -> dict:
        out = {"param": self.param, "n_measures": self.n_measures,
               "fractions": self.fractions, "unresolved": self.unresolved,
               "adjacent_distance": self.adjacent_distance, "flags": self.flags,
               "error": self.error}
        if with_moments:
            out["centroids"] = None if self.centroids is None else self.centroids.tolist()
        return out


@dataclass
class SweepResult:
    param_name: str
    rows: list[SweepRow]
    continuity_tol: float
    eta: float

    @property
    def counts(self) -> list:
        return [r.n_measures for r in self.rows]

    def constant_count(self) -> bool:
        c = self.counts
        return None not in c and len(set(c)) == 1

    def max_adjacent_distance(self) -> float:
        d = [r.adjacent_distance for r in self.rows if r.adjacent_distance is not None]
        return max(d) if d else 0.0

    def to_dict(self) -> dict:
        return {"param": self.param_name, "continuity_tol": self.continuity_tol,
                "eta": self.eta, "counts": self.counts,
                "constant_count": self.constant_count(),
                "max_adjacent_distance": self.max_adjacent_distance(),
                "rows": [r.to_dict() for r in self.rows]}


def match_clusters(prev: np.ndarray, cur: np.ndarray, dictionary: TestDictionary):
    """Reorder ``cur`` to best match ``prev``; returns (order, matched distances)."""
    cost = moment_distance(prev[:, None, :], cur[None, :, :], dictionary)
    r, c = linear_sum_assignment(cost)
    rest = [j for j in range(cur.shape[0]) if j not in set(c)]
    return np.concatenate((c, rest)).astype(int), cost[r, c]


def stability_sweep(make_family, values, grid: int, n: int, tol_conv: float = 0.02,
                    eta: float = 0.01, continuity_tol: float = 0.05,
                    dictionary=None, param_name: str = "alpha",
                    on_row=None) -> SweepResult:
    """Extract physical measures for each parameter value, in increasing order.

    ``make_family(value)`` returns a map. Row failures are recorded and the
    sweep continues. Flags: ``N_drop`` (count falls from the previous row),
    ``N_jump_up`` (count rises; a numerical artifact under upper
    semicontinuity), ``unresolved`` (above ``eta``), ``discontinuity``
    (constant count but a matched centroid moved more than
    ``continuity_tol``), ``error``. ``on_row(index, row)`` is called as each
    row finishes.
    """
    vals = sorted(float(v) for v in values)
    if len(vals) < 2:
        raise ValueError("a sweep needs at least two parameter values")
    dictionary = dictionary or TestDictionary()
    rows: list[SweepRow] = []
    prev = None
    for i, v in enumerate(vals):
        try:
            rep = extract_physical_measures(make_family(v), grid, n, tol_conv=tol_conv,
                                            dictionary=dictionary)
        except Exception as exc:  # recorded per row, sweep continues
            row = SweepRow(v, None, [], None, None, ["error"], f"{type(exc).__name__}: {exc}")
            rows.append(row)
            if on_row:
                on_row(i, row)
            continue
        cents = np.stack([m.moments for m in rep.measures]) if rep.n_measures else \
            np.zeros((0, dictionary.size))
        fr = [float(x) for x in rep.basin_fractions]
        row = SweepRow(v, rep.n_measures, fr, float(rep.unresolved_fraction), cents)
        if row.unresolved > eta:
            row.flags.append("unresolved")
        if prev is not None and prev.n_measures is not None:
            if row.n_measures < prev.n_measures:
                row.flags.append("N_drop")
            elif row.n_measures > prev.n_measures:
                row.flags.append("N_jump_up")
            if prev.n_measures and row.n_measures:
                order, dist = match_clusters(prev.centroids, cents, dictionary)
                row.centroids = cents[order]
                row.fractions = [fr[j] for j in order]
                row.adjacent_distance = float(dist.max())
                if row.n_measures == prev.n_measures and row.adjacent_distance > continuity_tol:
                    row.flags.append("discontinuity")
        rows.append(row)
        prev = row
        if on_row:
            on_row(i, row)
    return SweepResult(param_name, rows, continuity_tol, eta)
