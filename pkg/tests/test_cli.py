from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from levytv import __version__
from levytv.bounds import epsilon_star
from levytv.cli import main, rows_to_csv, run_experiment, validate_config
from levytv.sampler import IncrementBatch, make_rng

STABLE_HALF = {"b": 0.0, "sigma_sq": 0.0, "measure": {"kind": "stable", "beta": 0.5}}


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestValidate:
    def test_minimal_ok(self, tmp_path, capsys):
        path = _write(tmp_path, {"kind": "moments", "seed": 1, "triplet": STABLE_HALF})
        assert main(["validate", path]) == 0
        assert capsys.readouterr().out.strip() == "ok"

    def test_beta_out_of_range(self, tmp_path, capsys):
        bad = {"kind": "moments", "seed": 1,
               "triplet": {"measure": {"kind": "stable", "beta": 2.5}}}
        assert main(["validate", _write(tmp_path, bad)]) == 1
        err = capsys.readouterr().err
        assert "$.triplet.measure.beta" in err and "2.5" in err

    def test_missing_seed_warns(self):
        errs, warns = validate_config({"kind": "moments", "triplet": STABLE_HALF})
        assert errs == []
        assert any("seed" in w and "0" in w for w in warns)

    def test_unknown_field(self):
        errs, _ = validate_config({"kind": "moments", "seed": 0, "colour": "red"})
        assert errs and "colour" in errs[0]

    def test_run_refuses_invalid(self):
        assert run_experiment({"kind": "nope"}) == 1


class TestMoments:
    def test_sigma2_row(self, tmp_path):
        out = tmp_path / "m.csv"
        cfg = _write(tmp_path, {"kind": "moments", "seed": 0, "triplet": STABLE_HALF, "epsilon": 0.1})
        assert main(["moments", "--config", cfg, "--out", str(out)]) == 0
        row = _rows(out)[0]
        assert float(row["sigma2"]) == pytest.approx(0.0421637, abs=1e-7)
        meta = json.loads((tmp_path / "m.csv.meta.json").read_text())
        assert meta["version"] == __version__ and meta["config"]["epsilon"] == 0.1

    def test_stdout(self, tmp_path, capsys):
        cfg = _write(tmp_path, {"kind": "moments", "seed": 0, "triplet": STABLE_HALF, "epsilon": [0.1, 0.2]})
        assert main(["run", "--config", cfg]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("epsilon,") and len(lines) == 3


class TestSimulate:
    CFG = {"kind": "simulate", "triplet": {"b": 0.1, "sigma_sq": 1.0,
                                          "measure": {"kind": "stable", "beta": 1.3}},
           "epsilon": 0.5, "eta": 0.05, "n": 500}

    @pytest.mark.parametrize("threads", ["1", "3"])
    def test_byte_identical(self, tmp_path, threads):
        cfg = _write(tmp_path, self.CFG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["simulate", "--config", cfg, "--seed", "4", "--out", str(a)]) == 0
        assert main(["simulate", "--config", cfg, "--seed", "4", "--out", str(b), "--threads", threads]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert len(IncrementBatch.read_csv(a)) == 500

    def test_seed_changes_output(self, tmp_path):
        cfg = _write(tmp_path, self.CFG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", cfg, "--seed", "4", "--out", str(a)])
        main(["simulate", "--config", cfg, "--seed", "5", "--out", str(b)])
        assert a.read_bytes() != b.read_bytes()

    def test_binary(self, tmp_path):
        out = tmp_path / "x.bin"
        cfg = _write(tmp_path, dict(self.CFG, format="binary"))
        assert main(["simulate", "--config", cfg, "--out", str(out)]) == 0
        assert out.stat().st_size == 8 * 500

    def test_env_threads(self, tmp_path, monkeypatch):
        cfg = _write(tmp_path, self.CFG)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["simulate", "--config", cfg, "--out", str(a)])
        monkeypatch.setenv("LEVYTV_THREADS", "2")
        main(["simulate", "--config", cfg, "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()


class TestBoundsSweep:
    def test_rows(self, tmp_path):
        out = tmp_path / "b.csv"
        cfg = _write(tmp_path, {"kind": "bounds-sweep", "seed": 0, "triplet": STABLE_HALF,
                                "epsilon": [0.001, 0.1], "n": [100, 1000]})
        assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
        rows = _rows(out)
        assert len(rows) == 4
        assert float(rows[2]["ub_thm2_raw"]) == pytest.approx(1.0264464, abs=1e-6)

    def test_infeasible_rows_flagged_exit_2(self, tmp_path):
        out = tmp_path / "b.csv"
        tr = {"measure": {"kind": "atoms", "locations": [0.1], "masses": [1e-4]}, "sigma_sq": 1.0}
        cfg = _write(tmp_path, {"kind": "bounds-sweep", "seed": 0, "triplet": tr,
                                "epsilon": 0.5, "n": [100, 10**6]})
        assert main(["bounds", "--config", cfg, "--out", str(out)]) == 2
        rows = _rows(out)
        assert len(rows) == 2
        assert rows[0]["ub_thm3_feasible"] == "false" and "log(e v n)" in rows[0]["ub_thm3_note"]
        assert rows[0]["ub_thm2"] != ""


class TestEpsStar:
    def test_matches_function(self, tmp_path):
        out = tmp_path / "e.csv"
        grid = {"n": [100, 10**4], "delta": [0.1, 1.0], "sigma_sq": [0.0, 1.0], "beta": [0.5, 1.0, 1.5]}
        cfg = _write(tmp_path, dict(kind="epsilon-star-table", seed=0, **grid))
        assert main(["eps-star", "--config", cfg, "--out", str(out)]) == 0
        rows = _rows(out)
        assert len(rows) == 2 * 2 * 2 * 3 * 2
        for r in rows:
            e, reg = epsilon_star(int(r["n"]), float(r["delta"]), float(r["sigma_sq"]),
                                  float(r["beta"]), r["symmetric"] == "true")
            assert float(r["epsilon_star"]) == e and r["regime"] == reg


class TestRateStudy:
    def test_slopes(self, tmp_path):
        out = tmp_path / "r.csv"
        cfg = _write(tmp_path, {"kind": "rate-study", "seed": 0, "beta": 0.9,
                                "epsilon": [0.02, 0.04, 0.08]})
        assert main(["rate-study", "--config", cfg, "--out", str(out), "--threads", "2"]) == 0
        slopes = json.loads((tmp_path / "r.csv.meta.json").read_text())["summary"]["slopes"]["beta=0.9"]
        assert abs(slopes["numeric_tv_slope"] - slopes["thm2_rate_slope"]) <= 0.15
        assert len(_rows(out)) == 3


class TestDataTest:
    def test_json_report(self, tmp_path, capsys):
        data = tmp_path / "x.csv"
        IncrementBatch(make_rng(3, "gauss").standard_normal(600), 1.0, 3).to_csv(data)
        assert main(["test", str(data), "--delta", "1.0", "--alpha", "0.1"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert set(rep["decisions"]) == {"phi_max", "phi3", "phi4", "phi6", "combined"}
        assert rep["mode"] == "data_only"

    def test_jump_detected(self, tmp_path, capsys):
        x = make_rng(3, "gauss").standard_normal(600)
        x[17] += 60.0
        data = tmp_path / "x.bin"
        IncrementBatch(x, 1.0, 3).to_binary(data)
        assert main(["test", str(data)]) == 0
        assert json.loads(capsys.readouterr().out)["decisions"]["combined"] is True

    def test_too_short(self, tmp_path):
        data = tmp_path / "x.csv"
        IncrementBatch(np.ones(5), 1.0, 0).to_csv(data)
        assert main(["test", str(data)]) == 1

    def test_missing_file(self, tmp_path):
        assert main(["test", str(tmp_path / "nope.csv")]) == 1


class TestLevelPowerAndCalibrate:
    def test_level_power_csv(self, tmp_path):
        out = tmp_path / "lp.csv"
        cfg = _write(tmp_path, {"kind": "level-power", "seed": 2, "n": 200, "replications": 200,
                                "scenarios": [{"name": "null", "triplet": {"sigma_sq": 1.0}}]})
        assert main(["level-power", "--config", cfg, "--out", str(out)]) == 0
        r = _rows(out)[0]
        assert r["scenario"] == "null"
        assert float(r["ci_lo"]) <= float(r["rejection_rate"]) <= float(r["ci_hi"])

    def test_calibrate_table_roundtrip(self, tmp_path):
        out = tmp_path / "c.json"
        cfg = _write(tmp_path, {"kind": "calibrate", "seed": 1, "n": [50, 100], "alpha": [0.1],
                                "replications": 500})
        assert main(["calibrate", "--config", cfg, "--out", str(out)]) == 0
        table = json.loads(out.read_text())
        assert table["n_grid"] == [50, 100] and table["replications"] == 500
        data = tmp_path / "x.csv"
        IncrementBatch(make_rng(3, "gauss").standard_normal(80), 1.0, 3).to_csv(data)
        assert main(["test", str(data), "--constants", str(out)]) == 0

    def test_calibrate_too_few(self, tmp_path):
        cfg = _write(tmp_path, {"kind": "calibrate", "seed": 1, "n": [50], "replications": 100})
        assert main(["calibrate", "--config", cfg, "--out", str(tmp_path / "c.json")]) == 1


def test_rows_to_csv_precision():
    text = rows_to_csv([{"a": 0.1, "b": 1 / 3}])
    assert text.splitlines()[1] == "0.10000000000000001,0.33333333333333331"


@pytest.mark.skipif(shutil.which("levytv") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["levytv", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout


def test_module_entry():
    res = subprocess.run([sys.executable, "-m", "levytv.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "eps-star" in res.stdout
