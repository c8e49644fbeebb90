import json
import os

import numpy as np
import pytest

from affinegas.cli import main
from affinegas.errors import ConfigError
from affinegas.harness import (ScenarioConfig, dump_json17, format17,
                               run_scenario, sweep)


# -- config validation ----------------------------------------------------------

def test_unknown_kind_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"kind": "warp-drive"})


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"kind": "stability-run", "telemetry": True})


@pytest.mark.parametrize("patch", [
    {"n": -5}, {"n": 10000}, {"gamma": 0.5}, {"stencil_order": 3},
    {"cfl": 0.0}, {"cfl": 2.0}, {"N": 7}, {"tau_final": -1.0},
    {"seed": -1}, {"initial_data": {"eps": 2.0}}, {"gamma": True},
])
def test_bad_numeric_ranges_rejected(patch):
    raw = {"kind": "stability-run"}
    raw.update(patch)
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(raw)


def test_defaults_fill_in():
    cfg = ScenarioConfig.from_dict({"kind": "affine-exactness"})
    assert cfg.n == 256 and cfg.stencil_order == 2 and cfg.gamma == 1.4
    assert cfg.profile == {"kind": "poly", "coeffs": [1.0]}


# -- serialization ----------------------------------------------------------------

def test_format17_digits():
    assert format17(1.0 / 3.0) == "0.33333333333333331"
    assert len(format17(np.pi).replace("-", "").replace(".", "")) >= 16


def test_dump_json17_roundtrip_and_order():
    text = dump_json17({"b": 1.5, "a": [1, 2.25], "c": {"x": None, "y": True},
                        "d": float("nan")})
    parsed = json.loads(text)
    assert parsed["a"] == [1, 2.25]
    assert parsed["c"]["y"] is True
    assert parsed["d"] == "nan"
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')


# -- scenarios ----------------------------------------------------------------------

def test_affine_scenario_outputs(tmp_path):
    out = str(tmp_path / "aff")
    summary = run_scenario({"kind": "affine-exactness", "n": 64, "tau_final": 2.0}, out)
    assert summary["status"] == "pass"
    assert summary["sup_H"] <= 1e-10
    assert os.path.exists(os.path.join(out, "summary.json"))
    lines = open(os.path.join(out, "motion.csv")).read().splitlines()
    assert lines[0] == "t,tau,a,a_t,a_tau"
    assert all(len(row.split(",")) == 5 for row in lines[1:10])


def test_stability_scenario_outputs(tmp_path):
    out = str(tmp_path / "stab")
    summary = run_scenario({"kind": "stability-run", "n": 64, "tau_final": 3.0,
                            "initial_data": {"eps": 1e-4}}, out)
    assert summary["status"] == "pass"
    assert summary["c_star"] < 100.0
    series = open(os.path.join(out, "series.csv")).read().splitlines()
    assert series[0] == "tau,quantity,value"
    svg = open(os.path.join(out, "series.svg")).read()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")


def test_scenario_determinism(tmp_path):
    cfg = {"kind": "stability-run", "n": 64, "tau_final": 2.0, "seed": 5}
    outs = []
    for tag in ("one", "two"):
        out = str(tmp_path / tag)
        run_scenario(dict(cfg), out)
        outs.append({fn: open(os.path.join(out, fn)).read()
                     for fn in sorted(os.listdir(out))})
    assert outs[0] == outs[1]


def test_sweep_empty(tmp_path):
    report = sweep([], str(tmp_path / "empty"))
    assert report["status"] == "pass"
    assert report["n_runs"] == 0


def test_sweep_duplicates_and_parallel(tmp_path):
    cfg = {"kind": "affine-exactness", "n": 64, "tau_final": 1.0}
    rep_serial = sweep([dict(cfg), dict(cfg)], str(tmp_path / "ser"), jobs=1)
    rep_par = sweep([dict(cfg), dict(cfg)], str(tmp_path / "par"), jobs=2)
    assert rep_serial["status"] == "pass" and rep_par["status"] == "pass"
    rows = rep_serial["runs"]
    assert rows[0]["status"] == rows[1]["status"] == "pass"
    s0 = open(str(tmp_path / "ser" / "run000" / "summary.json")).read()
    s1 = open(str(tmp_path / "ser" / "run001" / "summary.json")).read()
    p0 = open(str(tmp_path / "par" / "run000" / "summary.json")).read()
    assert s0 == s1 == p0


def test_sweep_records_partial_failure(tmp_path):
    good = {"kind": "affine-exactness", "n": 64, "tau_final": 1.0}
    bad = {"kind": "affine-exactness", "n": -2}
    report = sweep([good, bad], str(tmp_path / "mix"))
    assert report["status"] == "partial-failure"
    assert report["failed"] == [1]


# -- CLI ------------------------------------------------------------------------------

def test_cli_run_and_exit_codes(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"kind": "affine-exactness", "n": 64,
                                    "tau_final": 1.0}))
    assert main(["run", str(cfg_path), "--out", str(tmp_path / "out")]) == 0

    bad_path = tmp_path / "bad.json"
    bad_path.write_text(json.dumps({"kind": "affine-exactness", "n": -2}))
    assert main(["run", str(bad_path)]) == 2
    assert main(["run", str(tmp_path / "missing.json")]) == 2

    nonjson = tmp_path / "broken.json"
    nonjson.write_text("{not json")
    assert main(["run", str(nonjson)]) == 2


def test_cli_checkops(tmp_path):
    code = main(["check-ops", "--order", "1", "--seed", "3", "--n", "64",
                 "--out", str(tmp_path / "ops")])
    assert code == 0
    summary = json.loads(open(str(tmp_path / "ops" / "summary.json")).read())
    assert summary["status"] == "pass"


def test_cli_sweep(tmp_path):
    cfg_dir = tmp_path / "cfgs"
    cfg_dir.mkdir()
    (cfg_dir / "a.json").write_text(json.dumps(
        {"kind": "affine-exactness", "n": 64, "tau_final": 1.0}))
    assert main(["sweep", str(cfg_dir), "--out", str(tmp_path / "sw")]) == 0
    report = json.loads(open(str(tmp_path / "sw" / "sweep_report.json")).read())
    assert report["n_runs"] == 1
    csv_lines = open(str(tmp_path / "sw" / "sweep_report.csv")).read().splitlines()
    assert csv_lines[0] == "index,kind,status,c_star"
