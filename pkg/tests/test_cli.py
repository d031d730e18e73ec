import json
import os

import numpy as np
import pytest

from mclab import cli, io
from mclab.carriers import SimpleAdmissibleMeasure, make_carrier
from mclab.config import ConfigError, ExperimentConfig, parse_config_text
from mclab.dynamics import Point, make_kan_cylinder
from mclab.measures import TestDictionary
from mclab.sweep import stability_sweep


def test_fmt_float_round_trip(rng):
    for x in np.concatenate((rng.normal(size=200) * 10.0 ** rng.integers(-300, 300, 200),
                             [0.0, -0.0, 1.0, 1e-320, 2.5e300])):
        s = io.fmt_float(float(x))
        assert float(s) == float(x)
        assert any(c in s for c in ".en")


def test_dumps_is_valid_json():
    text = io.dumps(io.with_schema("x", {"a": 1, "b": [0.1, 2.0], "c": {"d": None, "e": True},
                                        "f": np.arange(3.0), "g": float("nan")}))
    obj = json.loads(text)
    assert obj["schema_version"] == io.SCHEMA_VERSION
    assert obj["b"] == [0.1, 2.0] and obj["g"] is None
    assert isinstance(obj["f"][0], float)
    with pytest.raises(ValueError):
        io.with_schema("x", {"kind": "y"})


def test_atomic_write_leaves_no_temp(tmp_path):
    p = io.atomic_write_text(tmp_path / "sub" / "a.txt", "hello")
    assert p.read_text() == "hello"
    assert os.listdir(p.parent) == ["a.txt"]


def test_carrier_csv_round_trip(tmp_path, kan):
    g = make_carrier(kan, Point(0.3, 0.4), 0.02, amp=0.01, n_nodes=65)
    src = SimpleAdmissibleMeasure(g, 1.0 + 0.2 * np.cos(g.theta))
    io.write_carrier_csv(tmp_path / "c.csv", src)
    back = io.read_carrier_csv(tmp_path / "c.csv")
    assert np.array_equal(back.carrier.theta, g.theta)
    assert np.array_equal(back.carrier.t, g.t)
    np.testing.assert_allclose(back.density, src.density, rtol=1e-14)


def test_config_parsing():
    cfg = parse_config_text("[run]\nexperiment = lyapunov\nseed = 7\n"
                            "[lyapunov]\nx0 = (0.1, 0.2)\nn = 1000\n")
    assert cfg.seed == 7 and cfg.section("lyapunov")["x0"] == (0.1, 0.2)
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[map]\nalhpa = 0.4\n")
    assert exc.value.key == "alhpa"
    with pytest.raises(ConfigError):
        parse_config_text("[nosuch]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("[run]\nexperiment = nope\n")
    with pytest.raises(ConfigError):
        parse_config_text("not a config")
    # every key has a default
    assert all(v is not None or k in ("aperture", "margin", "file", "lam", "input",
                                      "delta_cluster")
               for sec in ExperimentConfig().values.values() for k, v in sec.items())


def test_cli_bad_key_exits_2(tmp_path, capsys):
    cfgp = tmp_path / "bad.cfg"
    cfgp.write_text("[map]\nalhpa = 0.4\n")
    assert cli.main(["lyapunov", "--config", str(cfgp)]) == 2
    assert "alhpa" in capsys.readouterr().err
    assert cli.main(["lyapunov", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["nosuch"]) == 2


def test_cli_minimal_lyapunov(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert cli.main(["lyapunov", "--n", "10000", "--out", str(out)]) == 0
    obj = json.loads(out.read_text())
    assert {"lambda_hat", "stderr", "n"} <= set(obj)
    assert obj["schema_version"] == io.SCHEMA_VERSION and obj["n"] == 10000
    assert "sha256" in capsys.readouterr().out


def test_cli_failure_exits_1(tmp_path):
    assert cli.main(["pliss", "--out", str(tmp_path)]) == 1


def test_cli_pliss_file(tmp_path):
    seq = tmp_path / "a.csv"
    seq.write_text("# one sequence per line\n0, 0, -1, 1\n")
    assert cli.main(["pliss", "--file", str(seq), "--h", "-1", "--A", "0", "--eps", "1",
                     "--out", str(tmp_path)]) == 0
    idx = io.read_csv_columns(tmp_path / "pliss_indices.csv")
    assert idx["index"].tolist() == [0.0, 1.0, 2.0, 3.0]
    assert cli.main(["pliss", "--file", str(seq), "--h", "-1", "--A", "0", "--eps", "1",
                     "--no-allow-last", "--out", str(tmp_path)]) == 0
    idx = io.read_csv_columns(tmp_path / "pliss_indices.csv")
    assert idx["index"].tolist() == [0.0, 1.0, 2.0]


def test_sweep_rows_and_flags(tmp_path):
    assert cli.main(["sweep", "--lo", "0.3", "--hi", "0.4", "--steps", "2", "--grid", "4",
                     "--n", "200", "--out", str(tmp_path)]) == 0
    obj = json.loads((tmp_path / "sweep.json").read_text())
    assert len(obj["rows"]) == 2
    assert sorted(os.listdir(tmp_path / "sweep_rows")) == ["row_000.json", "row_001.json"]
    # tiny n leaves everything unresolved: flagged, not fatal
    assert all("unresolved" in r["flags"] for r in obj["rows"])


def test_sweep_identical_params_and_errors():
    d = TestDictionary(2)
    res = stability_sweep(lambda a: make_kan_cylinder(3, a), [0.4, 0.4], 6, 50000,
                          dictionary=d)
    a, b = res.rows
    assert a.n_measures > 0
    assert a.n_measures == b.n_measures and np.array_equal(a.centroids, b.centroids)
    assert b.adjacent_distance == pytest.approx(0.0, abs=1e-15)

    def family(v):
        if v > 0.35:
            raise RuntimeError("boom")
        return make_kan_cylinder(3, v)

    res = stability_sweep(family, [0.3, 0.4], 6, 5000, dictionary=d)
    assert res.rows[1].flags == ["error"] and "boom" in res.rows[1].error
    with pytest.raises(ValueError):
        stability_sweep(family, [0.3], 6, 5000, dictionary=d)
