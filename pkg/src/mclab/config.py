"""Experiment configuration: sectioned ``key = value`` files with strict keys.

Values are Python literals (numbers, quoted strings, tuples, lists, None,
True/False); a bare word is read as a string. Every key has a default in
``DEFAULTS``; unknown sections or keys raise ``ConfigError`` naming them.

Example::

    [run]
    experiment = "lyapunov"
    seed = 7

    [map]
    alpha = 0.5

    [lyapunov]
    n = 1000000
    x0 = (0.0, 0.0)
"""

from __future__ import annotations

import ast
import configparser
import copy
from dataclasses import dataclass, field

EXPERIMENTS = ("verify-ph", "lyapunov", "mostly-contracting", "pliss", "hset", "disintegrate",
               "toy-check", "physical", "basins", "holonomy", "stochastic", "sweep")

_PHYS = {"grid": 200, "n": 100000, "tol_conv": 0.02, "delta_cluster": None,
         "max_degree": 8, "eta": 0.01}

DEFAULTS: dict[str, dict] = {
    "run": {"experiment": "lyapunov", "seed": 0, "out": "mclab_out", "threads": 0},
    "map": {"map": "kan_cylinder", "d": 3, "alpha": 0.5},
    "verify_ph": {"n_samples": 100000, "aperture": None},
    "lyapunov": {"n": 1000000, "x0": (0.6180339887498949, 0.0), "n_batches": 32},
    "mostly_contracting": {"n": 10000, "m_points": 500, "n_curves": 5, "margin": None,
                           "margin_factor": 10.0},
    "pliss": {"file": None, "h": -1.0, "A": 0.0, "eps": 0.1, "allow_last": True},
    "hset": {"N": 20, "lam": None, "eps": 0.01, "depth": 50, "n_points": 4000,
             "k_grid": (0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.001)},
    "disintegrate": {"input": None, "centre": (0.3, 0.4), "radius": 0.02, "amp": 0.02,
                     "nodes": 4097, "n": 5, "a": 0.05, "D": 2.0, "q": 8},
    "toy_check": {"n_x": 100, "n_intervals": 20},
    "physical": dict(_PHYS),
    "basins": {**_PHYS, "block": 10, "mix_threshold": 0.9},
    "holonomy": {"theta": 0.3, "t1": 0.02, "t2": 0.025, "radius": 0.05, "amp": 0.01,
                 "n": 2000, "m_points": 2000, "n_windows": 16},
    "stochastic": {"eps_list": (0.04, 0.02, 0.01, 0.005), "n_burn": 5000, "n_samp": 20000,
                   "chains": 32, "kind": "fiber", "grid": 64, "n": 100000},
    "sweep": {"param": "alpha", "lo": 0.2, "hi": 0.6, "steps": 9, "grid": 32, "n": 100000,
              "tol_conv": 0.02, "eta": 0.01, "continuity_tol": 0.05, "max_degree": 8},
}


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending entry."""

    def __init__(self, message: str, key: str):
        super().__init__(message)
        self.key = key


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    def section(self, name: str) -> dict:
        return self.values[name]

    @property
    def experiment(self) -> str:
        return self.values["run"]["experiment"]

    @property
    def seed(self) -> int:
        return int(self.values["run"]["seed"])

    def set(self, section: str, key: str, value):
        if section not in self.values:
            raise ConfigError(f"unknown section [{section}]", section)
        if key not in self.values[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", key)
        self.values[section][key] = value

    def validate(self):
        exp = self.experiment
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {exp!r}", "experiment")


def _literal(raw: str):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        return raw.strip()


def parse_config_text(text: str, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = cfg or ExperimentConfig()
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", "config") from exc
    for sec in cp.sections():
        for key, raw in cp.items(sec):
            cfg.set(sec, key, _literal(raw))
    cfg.validate()
    return cfg


def load_config(path, cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), cfg)
