"""Experiment runners: config section in, (payload, CSV tables, summary) out.

Randomness: the root seed feeds ``numpy.random.SeedSequence``; experiments
that need several streams take ``spawn`` children in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import carriers as C
from . import hyperbolicity as H
from . import io
from . import pliss as P
from .dynamics import Point, make_map
from .measures import (TestDictionary, basin_map, block_mixing_fraction, circle_moments,
                       extract_physical_measures, holonomy_probe, moment_distance,
                       weak_distance)
from .stochastic import NoiseKind, zero_noise_test
from .sweep import stability_sweep


@dataclass
class Outcome:
    kind: str
    payload: dict
    tables: dict = field(default_factory=dict)   # suffix -> (header, rows)
    summary: str = ""


def _map(cfg):
    m = cfg.section("map")
    return make_map(str(m["map"]), int(m["d"]), float(m["alpha"]))


def _children(seed: int, k: int):
    return np.random.SeedSequence(seed).spawn(k)


def run_verify_ph(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("verify_ph")
    cone = H.ConeField(float(s["aperture"])) if s["aperture"] is not None else H.auto_aperture(f)
    rep = H.check_cone_invariance(f, cone, int(s["n_samples"]), cfg.seed)
    payload = {"map": f.describe(), "seed": cfg.seed, **rep.to_dict()}
    return Outcome("verify-ph", payload,
                   summary=f"tau_hat={rep.tau_hat:.6g} cone_invariant={rep.cone_invariant}")


def run_lyapunov(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("lyapunov")
    x0 = Point(*map(float, s["x0"]))
    est = H.central_lyapunov(f, x0, int(s["n"]), int(s["n_batches"]))
    payload = {"map": f.describe(), "lambda_hat": est.lambda_hat, "stderr": est.stderr,
               "n": est.n, "x0": [x0.theta, x0.t], "unstable_exponent": H.unstable_exponent(f)}
    return Outcome("lyapunov", payload,
                   summary=f"lambda_hat={est.lambda_hat:.6g} stderr={est.stderr:.3g}")


def run_mostly_contracting(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("mostly_contracting")
    consts = C.admissibility_constants(f)
    rows, fracs = [], []
    for i, ss in enumerate(_children(cfg.seed, int(s["n_curves"]))):
        rng = np.random.default_rng(ss)
        curve = C.random_admissible_curve(f, rng, consts=consts)
        frac = H.mostly_contracting_test(f, curve, int(s["n"]), int(s["m_points"]),
                                         s["margin"], float(s["margin_factor"]), rng)
        fracs.append(frac)
        rows.append({"curve": i, "fraction_negative": frac, "length": curve.length,
                     "mean_t": float(np.mean(curve.t)), "max_slope": curve.max_slope,
                     "lip_const": curve.lip_const})
    cone = H.check_cone_invariance(f, H.auto_aperture(f), 100000, cfg.seed)
    payload = {"map": f.describe(), "n": int(s["n"]), "m_points": int(s["m_points"]),
               "margin": s["margin"], "margin_factor": float(s["margin_factor"]),
               "curves": rows, "min_fraction": min(fracs), "cone": cone.to_dict(),
               "admissibility": consts.to_dict()}
    return Outcome("mostly-contracting", payload,
                   summary=f"min fraction_negative={min(fracs):.4f} tau_hat={cone.tau_hat:.6g}")


def run_pliss(cfg) -> Outcome:
    s = cfg.section("pliss")
    if s["file"] is None:
        raise ValueError("pliss needs an input file (--file)")
    seqs = []
    with open(s["file"]) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                seqs.append([float(x) for x in line.replace(";", ",").split(",") if x.strip()])
    out_rows, summ = [], []
    for j, a in enumerate(seqs):
        inp = P.PlissInput(a, float(s["h"]), float(s["A"]), float(s["eps"]))
        sel = P.pliss_select(inp, bool(s["allow_last"]))
        out_rows += [(j, i) for i in sel.indices]
        summ.append({"sequence": j, "k": inp.k, "count": sel.count, "bound": sel.bound})
    payload = {"h": float(s["h"]), "A": float(s["A"]), "eps": float(s["eps"]),
               "allow_last": bool(s["allow_last"]), "sequences": summ}
    return Outcome("pliss", payload, {"indices": (("sequence", "index"), out_rows)},
                   summary=f"{len(seqs)} sequences, {len(out_rows)} indices selected")


def boundary_sample(f, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Lebesgue on the two invariant circles, equal weights."""
    th = rng.random(m)
    t = np.where(np.arange(m) % 2 == 0, 0.0, 1.0)
    return th, t


def run_hset(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("hset")
    N, eps, depth = int(s["N"]), float(s["eps"]), int(s["depth"])
    lam = s["lam"]
    if lam is None:
        lam = H.central_lyapunov(f, Point(C_GOLDEN, 0.0), 10**6).lambda_hat
    lam = float(lam)
    rng = np.random.default_rng(_children(cfg.seed, 1)[0])
    th, t = boundary_sample(f, int(s["n_points"]), rng)
    frac, se = P.h_member_fraction(f, th, t, N, lam, eps, depth)
    delta = P.density_constant(f, lam, eps)
    bound = delta / N
    radii = []
    for a, b in zip(th[:50], t[:50]):
        x = Point(float(a), float(b))
        if P.detect_H(f, x, N, lam, eps, depth).member:
            radii.append(P.stable_disc_radius(f, x, N, lam, eps, s["k_grid"], depth))
    payload = {"map": f.describe(), "N": N, "lam": lam, "eps": eps, "depth": depth,
               "h": P.contraction_floor(f), "delta": delta, "theta_bound": bound,
               "member_fraction": frac, "stderr": se, "n_points": int(s["n_points"]),
               "pass": frac >= bound - 3 * se, "disc_radii": radii}
    return Outcome("hset", payload,
                   summary=f"member fraction={frac:.4f} bound delta/N={bound:.4g}")


C_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _default_source(f, s):
    ctr = Point(*map(float, s["centre"]))
    g = C.make_carrier(f, ctr, float(s["radius"]), amp=float(s["amp"]), n_nodes=int(s["nodes"]))
    u = (g.arclength / g.length)
    return C.SimpleAdmissibleMeasure(g, 1.0 + 0.5 * np.sin(2 * np.pi * u))


def run_disintegrate(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("disintegrate")
    src = io.read_carrier_csv(s["input"]) if s["input"] else _default_source(f, s)
    n, a, D = int(s["n"]), float(s["a"]), float(s["D"])
    lift = C.disintegrate(src, f, n, a, q=int(s["q"]))
    dist = weak_distance(lift.evaluate(), C.direct_pushforward(src, f, n))
    inner, outer = lift.sandwich_margins()
    payload = io.lift_payload(lift, None)
    payload.update({
        "map": f.describe(), "reconstruction_distance": dist,
        "sandwich_inner_margin": inner, "sandwich_outer_margin": outer,
        "density_bounds_ok": C.density_bounds_check(lift, D), "D": D,
        "envelope": list(C.density_envelope(lift, D)),
    })
    tables = {"children": (io.CHILD_COLUMNS, list(io.children_rows(lift)))}
    return Outcome("lift", payload, tables,
                   summary=f"reconstruction distance={dist:.3g} sandwich={lift.sandwich_holds()}")


def run_toy_check(cfg) -> Outcome:
    s = cfg.section("toy_check")
    xs = np.geomspace(0.1, 10.0, int(s["n_x"]))
    rho_dev = max(abs(C.toy_rho_numeric(x) - C.toy_rho()) for x in xs)
    rng = np.random.default_rng(_children(cfg.seed, 1)[0])
    defects = []
    for _ in range(int(s["n_intervals"])):
        e = np.sort(rng.uniform(0.1, 10.0, 2))
        defects.append(C.verify_toy_identity((float(e[0]), float(e[1]))))
    payload = {"rho": C.toy_rho(), "max_rho_deviation": rho_dev,
               "max_identity_defect": max(defects), "defects": defects}
    return Outcome("toy-check", payload,
                   summary=f"max rho deviation={rho_dev:.3g} max defect={max(defects):.3g}")


def _extract(cfg, f, section: str):
    s = cfg.section(section)
    d = TestDictionary(int(s["max_degree"]))
    return extract_physical_measures(f, int(s["grid"]), int(s["n"]), float(s["tol_conv"]),
                                     s["delta_cluster"], d)


def _circle_distances(f, rep):
    d = rep.measures[0].dictionary if rep.measures else TestDictionary()
    out = []
    for m in rep.measures:
        out.append({str(c): moment_distance(m.moments, circle_moments(d, c), d)
                    for c in f.invariant_circles})
    return out


def _grid_rows(f, rep, labels):
    from .measures import cell_grid
    cols, rows_ = cell_grid(f, labels.shape[0])
    for i, th in enumerate(cols):
        for j, t in enumerate(rows_):
            yield (float(th), float(t), int(labels[i, j]), float(rep.lambda_hat[i, j]),
                   int(bool(rep.converged[i, j])))


GRID_COLUMNS = ("theta", "t", "label", "lambda_hat", "converged")


def run_physical(cfg) -> Outcome:
    f = _map(cfg)
    rep = _extract(cfg, f, "physical")
    eta = float(cfg.section("physical")["eta"])
    payload = {**rep.summary(), "eta": eta, "no_holes": rep.unresolved_fraction <= eta,
               "circle_distances": _circle_distances(f, rep),
               "centroids": [m.moments for m in rep.measures]}
    tables = {"grid": (GRID_COLUMNS, list(_grid_rows(f, rep, rep.labels)))}
    return Outcome("physical", payload, tables,
                   summary=f"n_measures={rep.n_measures} fractions="
                           f"{[round(x, 4) for x in rep.basin_fractions]} "
                           f"unresolved={rep.unresolved_fraction:.4g}")


def band_minority(labels: np.ndarray, block: int) -> list[float]:
    """Per band of ``block`` fiber rows, the share of the rarer label among labelled points."""
    out = []
    for j in range(0, labels.shape[1] - block + 1, block):
        sub = labels[:, j:j + block]
        lab = sub[sub >= 0]
        if lab.size == 0:
            out.append(0.0)
            continue
        counts = np.bincount(lab)
        counts = counts[counts > 0]
        out.append(float(counts.min() / lab.size) if counts.size > 1 else 0.0)
    return out


def run_basins(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("basins")
    rep = _extract(cfg, f, "basins")
    labels = basin_map(f, int(s["grid"]), rep)
    block = int(s["block"])
    mix = block_mixing_fraction(labels, block)
    payload = {**rep.summary(), "mixing_fraction": mix, "block": block,
               "mix_threshold": float(s["mix_threshold"]),
               "pass": mix >= float(s["mix_threshold"]),
               "band_minority_share": band_minority(labels, block)}
    tables = {"basins": (GRID_COLUMNS, list(_grid_rows(f, rep, labels)))}
    return Outcome("basins", payload, tables,
                   summary=f"mixing fraction={mix:.4f} (threshold {float(s['mix_threshold'])})")


def run_holonomy(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("holonomy")
    th, r, amp = float(s["theta"]), float(s["radius"]), float(s["amp"])
    g1 = C.make_carrier(f, Point(th, float(s["t1"])), r, amp=amp, n_nodes=1025)
    g2 = C.make_carrier(f, Point(th, float(s["t2"])), r, amp=amp, phase=0.5, n_nodes=1025)
    res = holonomy_probe(g1, g2, f, int(s["n"]), int(s["m_points"]), int(s["n_windows"]))
    return Outcome("holonomy", {"map": f.describe(), **res.to_dict()},
                   summary=f"paired fraction={res.paired_fraction:.4f} "
                           f"max|Jac-1|={res.max_jac_defect:.3g} C={res.fitted_c:.3g}")


def run_stochastic(cfg) -> Outcome:
    f = _map(cfg)
    s = cfg.section("stochastic")
    rep = extract_physical_measures(f, int(s["grid"]), int(s["n"]))
    seeds = _children(cfg.seed, 1)
    rows = zero_noise_test(f, s["eps_list"], rep, int(s["n_burn"]), int(s["n_samp"]),
                           int(s["chains"]), int(seeds[0].generate_state(1)[0]),
                           NoiseKind(s["kind"]))
    res = [r.residual for r in rows]
    se = [r.stderr for r in rows]
    mono = all(b <= a + 2.0 * max(sa, sb) for a, b, sa, sb in zip(res, res[1:], se, se[1:]))
    payload = {"map": f.describe(), "noise_kind": str(s["kind"]), "chains": int(s["chains"]),
               "n_burn": int(s["n_burn"]), "rows": [r.to_dict() for r in rows],
               "nonincreasing_within_2se": mono, "deterministic": rep.summary()}
    return Outcome("stochastic", payload,
                   summary="residuals " + " ".join(f"{r.eps:g}:{r.residual:.4g}" for r in rows))


def run_sweep(cfg, on_row=None) -> Outcome:
    m = cfg.section("map")
    s = cfg.section("sweep")
    name = str(s["param"])
    if name not in ("alpha", "d"):
        raise ValueError(f"cannot sweep parameter {name!r}")
    vals = np.linspace(float(s["lo"]), float(s["hi"]), int(s["steps"]))

    def family(v):
        kw = {"d": int(m["d"]), "alpha": float(m["alpha"])}
        kw[name] = int(round(v)) if name == "d" else float(v)
        return make_map(str(m["map"]), kw["d"], kw["alpha"])

    res = stability_sweep(family, vals, int(s["grid"]), int(s["n"]), float(s["tol_conv"]),
                          float(s["eta"]), float(s["continuity_tol"]),
                          TestDictionary(int(s["max_degree"])), name, on_row)
    payload = {"map": str(m["map"]), "grid": int(s["grid"]), "n": int(s["n"]), **res.to_dict()}
    return Outcome("sweep", payload,
                   summary=f"counts={res.counts} max adjacent distance="
                           f"{res.max_adjacent_distance():.4g}")


RUNNERS = {
    "verify-ph": run_verify_ph, "lyapunov": run_lyapunov,
    "mostly-contracting": run_mostly_contracting, "pliss": run_pliss, "hset": run_hset,
    "disintegrate": run_disintegrate, "toy-check": run_toy_check, "physical": run_physical,
    "basins": run_basins, "holonomy": run_holonomy, "stochastic": run_stochastic,
    "sweep": run_sweep,
}
