import csv
import json
from importlib import resources

import numpy as np
import pytest

from itscatter.cli import main
from itscatter.config import parse_energies, parse_scenario, set_parameter
from itscatter.errors import ConfigError

SCEN = resources.files("itscatter") / "scenarios"


def scenario(name):
    return str(SCEN / name)


def read_summary(path):
    with open(path / "summary.csv") as fh:
        return list(csv.DictReader(fh))


def read_matrix(f):
    rows = [r for r in csv.reader(l for l in open(f) if not l.startswith("#"))]
    return np.array([[float(v) for v in r[1:]] for r in rows[1:-2]])


def test_flat_channel_all_modes_identity(tmp_path):
    assert main(["run", scenario("flat-channel.json"), "--out-dir", str(tmp_path)]) == 0
    point = tmp_path / "point_000"
    for mode in ("hermite", "legendre", "oracle"):
        W = read_matrix(point / f"W_{mode}.csv")
        assert W.shape == (7, 7)
        assert np.max(np.abs(W - np.eye(7))) < 1e-8
    for name in ("path.csv", "profile.csv", "parameters.csv", "mode_differences.csv"):
        assert (point / name).exists()
    params = dict(csv.reader(open(point / "parameters.csv")))
    assert {"theta", "delta1", "delta2", "nu", "beta", "phi"} <= set(params)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["normalization"]["convention"] == "theta-hermite"
    assert "theta-hermite" in man["normalization"]["arbitration"]["passed"]
    assert set(man["versions"]) >= {"itscatter", "numpy", "scipy", "python"}


def test_empty_sweep(tmp_path, caplog):
    rc = main(["sweep", scenario("tanh-profile.json"), "--energies", "", "--out-dir",
               str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "summary.csv").read_text().splitlines()
    assert lines == ["E_k,theta,W_00,unitarity_defect,max_mode_discrepancy,nu,status,message"]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert any("empty" in w for w in man["warnings"])
    assert any("empty" in r.message for r in caplog.records)


def test_two_channel_sweep_rows(tmp_path):
    rc = main(["sweep", scenario("two-channel.json"), "--energies", "1:3:8", "--modes",
               "legendre,oracle", "--jobs", "4", "--out-dir", str(tmp_path)])
    assert rc == 0
    rows = read_summary(tmp_path)
    assert len(rows) == 8
    assert list(rows[0])[:5] == ["E_k", "theta", "W_00", "unitarity_defect",
                                 "max_mode_discrepancy"]
    e = [float(r["E_k"]) for r in rows]
    assert e == sorted(e)
    assert all(r["status"] == "ok" for r in rows)
    assert max(float(r["max_mode_discrepancy"]) for r in rows) < 1e-3


def test_single_energy_sweep_matches_run(tmp_path):
    a, b = tmp_path / "run", tmp_path / "sweep"
    assert main(["run", scenario("two-channel.json"), "--modes", "legendre",
                 "--out-dir", str(a)]) == 0
    raw = json.loads(open(scenario("two-channel.json")).read())
    e = raw["system"]["E_kin_in"]
    assert main(["sweep", scenario("two-channel.json"), "--modes", "legendre",
                 "--energies", str(e), "--out-dir", str(b)]) == 0
    assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


def test_duplicate_energies_flagged(tmp_path):
    rc = main(["sweep", scenario("flat-channel.json"), "--modes", "legendre",
               "--energies", "1.5,1.5", "--out-dir", str(tmp_path)])
    assert rc == 0
    rows = read_summary(tmp_path)
    assert len(rows) == 2 and rows[0] == rows[1]
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert any("duplicate" in w for w in man["warnings"])


def test_adiabatic_parameter_sweep(tmp_path):
    rc = main(["sweep", scenario("tanh-profile.json"), "--modes", "legendre",
               "--param", "profile.omega2.T", "--values", "0.25,0.5,1,2",
               "--out-dir", str(tmp_path)])
    assert rc == 0
    rows = read_summary(tmp_path)
    assert [float(r["profile.omega2.T"]) for r in rows] == [0.25, 0.5, 1.0, 2.0]
    theta = [float(r["theta"]) for r in rows]
    assert all(b < a for a, b in zip(theta, theta[1:]))


def test_bad_config_is_line_anchored(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "profile": {"source": "analytic-profile",\n'
                   '              "omega2": {"shape": "constant", "omega": 1}},\n'
                   '  "modes": ["legendre", "magic"],\n  "n_max": 3\n}\n')
    assert main(["run", str(bad), "--out-dir", str(tmp_path / "o")]) == 2
    assert "line 4" in capsys.readouterr().err
    bad.write_text('{\n  "n_max": 3,\n  "modes": [\n}')
    assert main(["run", str(bad)]) == 2
    assert "line" in capsys.readouterr().err


def test_negative_energy_rejected(tmp_path):
    assert main(["sweep", scenario("two-channel.json"), "--energies", "1,-2",
                 "--out-dir", str(tmp_path)]) == 2


def test_unknown_mode_rejected(tmp_path):
    assert main(["run", scenario("tanh-profile.json"), "--modes", "legendre,exact",
                 "--out-dir", str(tmp_path)]) == 2


def test_paper_literal_recorded(tmp_path):
    rc = main(["run", scenario("driven-resonant.json"), "--modes", "hermite",
               "--paper-literal", "--out-dir", str(tmp_path)])
    assert rc == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["normalization"]["convention"] == "literal"
    assert "literal" not in man["normalization"]["arbitration"]["passed"]
    assert any("unitarity" in w for w in man["points"][0]["warnings"])


def test_point_failure_recorded(tmp_path):
    # below the barrier the path is classically forbidden
    raw = json.loads(open(scenario("two-channel.json")).read())
    raw["surface"]["params"]["barrier_height"] = 5.0
    f = tmp_path / "s.json"
    f.write_text(json.dumps(raw))
    rc = main(["sweep", str(f), "--energies", "1,2", "--modes", "legendre",
               "--out-dir", str(tmp_path / "o")])
    assert rc == 1
    rows = read_summary(tmp_path / "o")
    assert len(rows) == 2
    assert all(r["status"] == "classically-forbidden" for r in rows)


def test_energy_parsing():
    assert parse_energies("1, 2,3") == [1.0, 2.0, 3.0]
    assert parse_energies("1:2:3") == [1.0, 1.5, 2.0]
    assert parse_energies("range:1:2:3") == [1.0, 1.5, 2.0]
    assert parse_energies("  ") == []
    with pytest.raises(ConfigError):
        parse_energies("1:2")


def test_set_parameter():
    raw = {"profile": {"omega2": {"T": 1.0}}}
    out = set_parameter(raw, "profile.omega2.T", 2.0)
    assert out["profile"]["omega2"]["T"] == 2.0 and raw["profile"]["omega2"]["T"] == 1.0
    with pytest.raises(ConfigError):
        set_parameter(raw, "profile.force.T", 1.0)


def test_all_shipped_scenarios_parse():
    for p in SCEN.iterdir():
        if p.name.endswith(".json"):
            sc = parse_scenario(p.read_text())
            assert sc.modes and sc.n_max >= 0
