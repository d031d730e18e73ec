"""Serialisation: 17-significant-digit JSON/CSV, atomic writes, carrier files."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "mclab-1"
CARRIER_COLUMNS = ("s", "theta", "t", "slope", "phi")
CHILD_COLUMNS = ("node", "k", "theta", "t", "slope", "phi", "mass")


def fmt_float(x: float) -> str:
    s = "%.17g" % x
    return s if any(c in s for c in ".en") else s + ".0"


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return fmt_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating, bool)) or v is None
               for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(payload: dict) -> str:
    """JSON text with every float at 17 significant digits."""
    return _encode(payload, 2, 0) + "\n"


def with_schema(kind: str, payload: dict) -> dict:
    clash = {"schema_version", "kind"} & set(payload)
    if clash:
        raise ValueError(f"payload uses reserved keys {sorted(clash)}")
    return {"schema_version": SCHEMA_VERSION, "kind": kind, **payload}


def payload_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def atomic_write_text(path, text: str) -> Path:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, kind: str, payload: dict) -> str:
    text = dumps(with_schema(kind, payload))
    atomic_write_text(path, text)
    return text


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def write_csv(path, header, rows) -> Path:
    return atomic_write_text(path, csv_text(header, rows))


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    data = np.array(body, dtype=float).reshape(len(body), len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


# ---------------------------------------------------------------------------
# carriers and lifts
# ---------------------------------------------------------------------------

def write_carrier_csv(path, src) -> Path:
    """SimpleAdmissibleMeasure -> CSV with columns s, theta, t, slope, phi."""
    g = src.carrier
    rows = zip(g.arclength, g.theta, g.t, g.slope, src.density)
    return write_csv(path, CARRIER_COLUMNS, ([float(v) for v in r] for r in rows))


def read_carrier_csv(path):
    """CSV -> SimpleAdmissibleMeasure (Carrier when the node count is odd)."""
    from .carriers import Carrier, Curve, SimpleAdmissibleMeasure

    cols = read_csv_columns(path)
    missing = [c for c in CARRIER_COLUMNS[1:] if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    th, t, sl = cols["theta"], cols["t"], cols["slope"]
    phi = cols.get("phi", np.ones_like(th))
    try:
        g = Carrier(th, t, sl)
    except ValueError:
        g = Curve(th, t, sl)
    return SimpleAdmissibleMeasure(g, phi)


def lift_payload(lift, children_csv: str | None) -> dict:
    entries = []
    q = lift.child_theta.shape[1] if lift.has_children else 0
    for i in range(lift.S.size):
        e = {"node": i, "S": float(lift.S[i]), "R": float(lift.R[i]),
             "omega": float(lift.omega[i]), "rho": float(lift.rho[i])}
        if lift.has_children:
            e["child_rows"] = [i * q, (i + 1) * q]
            e["child_lip"] = float(lift.child_lip[i])
        entries.append(e)
    return {
        "n": lift.n, "a": lift.a, "resolved": lift.resolved,
        "rho_defect": lift.rho_defect, "C0": lift.C0, "C1": lift.C1,
        "full_radius_fraction": lift.full_radius_fraction(),
        "children_csv": children_csv, "entries": entries,
    }


def children_rows(lift):
    q = lift.child_theta.shape[1]
    for i in range(lift.S.size):
        for k in range(q):
            yield (i, k, float(lift.child_theta[i, k]), float(lift.child_t[i, k]),
                   float(lift.child_slope[i, k]), float(lift.child_phi[i, k]),
                   float(lift.child_mass[i, k]))
