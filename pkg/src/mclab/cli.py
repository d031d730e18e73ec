"""Command-line entry point: ``mclab <experiment> [--config FILE] [overrides]``.

Settings resolve as defaults < config file < command-line flags. Results go
to ``--out``: a ``.json`` path names the report (tables sit next to it with
the same stem), anything else is a directory holding
``<experiment>.json`` and ``<experiment>_<table>.csv``.

Exit status: 0 on success, 2 for an invalid configuration or usage, 1 when
an experiment fails.
"""

from __future__ import annotations

import argparse
import ast
import sys
from pathlib import Path

from . import io
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import RUNNERS

SECTION = {
    "verify-ph": "verify_ph", "lyapunov": "lyapunov", "mostly-contracting": "mostly_contracting",
    "pliss": "pliss", "hset": "hset", "disintegrate": "disintegrate", "toy-check": "toy_check",
    "physical": "physical", "basins": "basins", "holonomy": "holonomy",
    "stochastic": "stochastic", "sweep": "sweep",
}

# experiment -> [(flag, key, type)] overriding keys of its own section
FLAGS = {
    "verify-ph": [("--n-samples", "n_samples", int), ("--aperture", "aperture", float)],
    "lyapunov": [("--n", "n", int), ("--x0", "x0", "pair")],
    "mostly-contracting": [("--n", "n", int), ("--m", "m_points", int),
                           ("--curves", "n_curves", int), ("--margin", "margin", float)],
    "pliss": [("--file", "file", str), ("--h", "h", float), ("--A", "A", float),
              ("--eps", "eps", float)],
    "hset": [("--N", "N", int), ("--lam", "lam", float), ("--eps", "eps", float),
             ("--depth", "depth", int), ("--points", "n_points", int)],
    "disintegrate": [("--in", "input", str), ("--n", "n", int), ("--a", "a", float),
                     ("--D", "D", float)],
    "toy-check": [("--n-x", "n_x", int), ("--intervals", "n_intervals", int)],
    "physical": [("--grid", "grid", int), ("--n", "n", int), ("--tol-conv", "tol_conv", float),
                 ("--delta-cluster", "delta_cluster", float), ("--eta", "eta", float)],
    "basins": [("--grid", "grid", int), ("--n", "n", int), ("--tol-conv", "tol_conv", float),
               ("--block", "block", int), ("--mix-threshold", "mix_threshold", float)],
    "holonomy": [("--n", "n", int), ("--t1", "t1", float), ("--t2", "t2", float)],
    "stochastic": [("--eps-list", "eps_list", "list"), ("--chains", "chains", int),
                   ("--n-samp", "n_samp", int), ("--n-burn", "n_burn", int),
                   ("--kind", "kind", str)],
    "sweep": [("--lo", "lo", float), ("--hi", "hi", float), ("--steps", "steps", int),
              ("--grid", "grid", int), ("--n", "n", int),
              ("--continuity-tol", "continuity_tol", float)],
}


def _pair(text: str):
    parts = [float(x) for x in text.replace("(", "").replace(")", "").split(",")]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return tuple(parts)


def _list(text: str):
    try:
        val = ast.literal_eval(text)
    except (ValueError, SyntaxError):
        val = [float(x) for x in text.split(",") if x.strip()]
    return tuple(val) if isinstance(val, (list, tuple)) else (float(val),)


TYPES = {"pair": _pair, "list": _list}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mclab", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in RUNNERS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="sectioned key = value file")
        sp.add_argument("--seed", type=int, help="root seed")
        sp.add_argument("--out", help="output directory or .json path")
        sp.add_argument("--threads", type=int, help="worker threads (0 = all)")
        sp.add_argument("--map", dest="map_id", help="map family id")
        sp.add_argument("--d", type=int, help="base degree")
        sp.add_argument("--alpha", type=float, help="fiber coupling")
        if name == "pliss":
            sp.add_argument("--no-allow-last", action="store_true",
                            help="exclude the final index k-1")
        for flag, key, typ in FLAGS.get(name, []):
            sp.add_argument(flag, dest=f"opt_{key}", type=TYPES.get(typ, typ))
    return p


def resolve_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    cfg.set("run", "experiment", args.experiment)
    for attr, sec, key in (("seed", "run", "seed"), ("out", "run", "out"),
                           ("threads", "run", "threads"), ("map_id", "map", "map"),
                           ("d", "map", "d"), ("alpha", "map", "alpha")):
        val = getattr(args, attr, None)
        if val is not None:
            cfg.set(sec, key, val)
    sec = SECTION[args.experiment]
    for _, key, _ in FLAGS.get(args.experiment, []):
        val = getattr(args, f"opt_{key}", None)
        if val is not None:
            cfg.set(sec, key, val)
    if getattr(args, "no_allow_last", False):
        cfg.set("pliss", "allow_last", False)
    cfg.validate()
    return cfg


def output_paths(out: str, experiment: str) -> tuple[Path, Path, str]:
    p = Path(out)
    if p.suffix == ".json":
        return p, p.parent, p.stem
    return p / f"{experiment}.json", p, experiment


def _set_threads(n: int):
    if n and n > 0:
        import numba
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))


def run(cfg: ExperimentConfig, echo=print) -> int:
    """Execute the configured experiment and write its artifacts."""
    exp = cfg.experiment
    _set_threads(int(cfg.section("run")["threads"]))
    json_path, folder, stem = output_paths(str(cfg.section("run")["out"]), exp)
    on_row = None
    if exp == "sweep":
        rows_dir = folder / f"{stem}_rows"

        def on_row(i, row):
            io.write_json(rows_dir / f"row_{i:03d}.json", "sweep-row", row.to_dict())

        outcome = RUNNERS[exp](cfg, on_row)
    else:
        outcome = RUNNERS[exp](cfg)
    payload = dict(outcome.payload)
    table_names = {}
    for suffix, (header, rows) in outcome.tables.items():
        tp = folder / f"{stem}_{suffix}.csv"
        io.write_csv(tp, header, rows)
        table_names[suffix] = tp.name
    if table_names:
        payload["tables"] = table_names
        if exp == "disintegrate":
            payload["children_csv"] = table_names["children"]
    # output location and thread count do not affect results
    payload["config"] = {k: ({kk: vv for kk, vv in v.items() if kk not in ("out", "threads")}
                             if k == "run" else v) for k, v in cfg.values.items()}
    text = io.write_json(json_path, outcome.kind, payload)
    echo(f"{exp}: {outcome.summary} -> {json_path} [sha256 {io.payload_hash(text)[:12]}]")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"mclab: config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mclab: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"mclab: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"mclab: {args.experiment} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
