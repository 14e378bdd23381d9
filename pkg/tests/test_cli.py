import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from levykernel.cli import main, parse_times
from levykernel.errors import ConfigError


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path), "--jobs", "1"])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_list_models(capsys):
    assert main(["list-models"]) == 0
    assert "stable-1d\t" in capsys.readouterr().out


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "levykernel", "list-models"], capture_output=True, text=True)
    assert out.returncode == 0 and "discretized-stable-2d" in out.stdout


def test_check_a_pass_and_fail(tmp_path, capsys):
    assert run(tmp_path, "check-a", "--model", "stable-2d") == 0
    assert "VERDICT check-a pass" in capsys.readouterr().out
    assert run(tmp_path, "--cmd", "check-a", "--model", "axis-degenerate-2d") == 1
    out = capsys.readouterr().out
    assert "VERDICT check-a fail" in out and "FAILURE " in out
    fails = json.loads((tmp_path / "failures.json").read_text())
    assert fails[0]["check"] == "condition_A"
    assert fails[0]["witness_direction"].split()[0] in ("0", "-0")


def test_rho_table_slope(tmp_path):
    assert run(tmp_path, "rho-table", "--model", "stable-1d", "--t", "geom:1e-4:1e-1:7") == 0
    rows = read_csv(tmp_path / "rho-table.csv")
    assert len(rows) == 7
    assert float(rows[0]["slope"]) == pytest.approx(-1 / 1.5, abs=1e-6)
    for r in rows:
        assert float(r["t_psi_star"]) == pytest.approx(1.0, abs=1e-9)


def test_slope_tolerance_flag(tmp_path):
    # the scale law of a normalised stable measure is exact, so even a tiny tolerance passes
    assert run(tmp_path, "rho-table", "--model", "stable-1d", "--tol-slope", "1e-9") == 0


def test_decompose_rows(tmp_path):
    assert run(tmp_path, "decompose", "--model", "stable-1d", "--n-points", "512") == 0
    rows = read_csv(tmp_path / "decompose.csv")
    assert [float(r["t"]) for r in rows] == [1e-3, 1e-2, 1e-1]
    assert all(r["support_ok"] == "true" and float(r["lambda_mass"]) <= 2 for r in rows)


def test_density_outputs_and_rerun_identical(tmp_path):
    args = ("density", "--model", "stable-1d", "--n-points", "1024", "--t", "0.01,0.1", "--route")
    assert run(tmp_path / "a", *args) == 0
    assert run(tmp_path / "b", *args) == 0
    a = (tmp_path / "a" / "density.csv").read_bytes()
    assert a == (tmp_path / "b" / "density.csv").read_bytes()
    rows = read_csv(tmp_path / "a" / "density.csv")
    assert float(rows[0]["route_error"]) < 1e-4
    assert (tmp_path / "a" / rows[0]["file"]).read_bytes()[:4] == b"LKDG"


def test_density_cache(tmp_path, monkeypatch):
    cache = tmp_path / "cache"
    monkeypatch.setenv("LEVYKERNEL_CACHE_DIR", str(cache))
    args = ("density", "--model", "stable-1d-cauchy", "--n-points", "256", "--t", "0.1")
    assert run(tmp_path / "a", *args) == 0
    files = list(cache.glob("*.lkdg"))
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    assert run(tmp_path / "b", *args) == 0
    assert files[0].stat().st_mtime_ns == stamp
    assert (tmp_path / "a" / "density.csv").read_bytes() == (tmp_path / "b" / "density.csv").read_bytes()


def test_bounds_and_bell(tmp_path):
    common = ("--model", "stable-1d", "--n-points", "512", "--t", "0.01,0.1")
    assert run(tmp_path, "bounds", *common) == 0
    up = read_csv(tmp_path / "bounds.csv")
    assert {"b1", "b2", "worst_ratio"} <= set(up[0])
    assert all(float(r["worst_ratio"]) <= 1 + 1e-6 for r in up)
    assert run(tmp_path, "bounds", "--direction", "lower", *common) == 0
    assert {"b3", "b4", "x_t"} <= set(read_csv(tmp_path / "bounds.csv")[0])
    assert run(tmp_path, "bell", "--b", "1.5", *common) == 0
    bell = read_csv(tmp_path / "bell.csv")
    assert float(bell[0]["c1"]) / float(bell[0]["c2"]) <= 50


def test_subexp_diag(tmp_path):
    assert run(tmp_path, "subexp-diag", "--model", "stable-1d", "--dist", "pareto:1.5",
               "--t", "10,100,1000,10000,100000") == 0
    assert run(tmp_path, "subexp-diag", "--model", "stable-1d", "--dist", "expon:1", "--t", "1,5,10,20") == 1


def test_report_on_degenerate_model(tmp_path, capsys):
    assert run(tmp_path, "report", "--model", "axis-degenerate-2d", "--t", "0.01,0.1", "--n-points", "64") == 1
    rows = read_csv(tmp_path / "report.csv")
    assert {r["command"]: r["verdict"] for r in rows}["check-a"] == "fail"


def test_computation_error_exit_code(tmp_path, capsys):
    assert run(tmp_path, "bounds", "--model", "axis-degenerate-2d", "--n-points", "32") == 3
    assert "ModelRejected" in capsys.readouterr().err


@pytest.mark.parametrize("args", [
    ["check-a", "--model", "nope"],
    ["check-a"],
    ["check-a", "--model", "stable-1d", "--tol-slope", "abc"],
    ["check-a", "--model", "stable-1d", "--tol-slope", "-1"],
    ["rho-table", "--model", "stable-1d", "--t", "0,1"],
    ["subexp-diag", "--model", "stable-1d", "--dist", "gauss:1"],
])
def test_config_errors_exit_2(tmp_path, capsys, args):
    assert run(tmp_path, *args) == 2
    assert "config error:" in capsys.readouterr().err


def test_config_file(tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text("model: stable-1d\nt: [0.001, 0.01]\ntolerances:\n  slope: 0.02\n")
    assert run(tmp_path, "rho-table", "--config", str(cfg)) == 0
    assert len(read_csv(tmp_path / "rho-table.csv")) == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": "stable-1d", "grid": 3}')
    assert run(tmp_path, "rho-table", "--config", str(bad)) == 2
    inline = tmp_path / "inline.json"
    inline.write_text(json.dumps({"model": {"measure": {"variant": "IsotropicStable", "alpha": 1.0, "c": 1.0}}}))
    assert run(tmp_path, "check-a", "--config", str(inline)) == 0


def test_parse_times():
    assert parse_times("0.1,0.01") == [0.01, 0.1]
    assert np.allclose(parse_times("geom:1e-3:1e-1:3"), [1e-3, 1e-2, 1e-1])
    assert np.allclose(parse_times({"start": 1e-2, "stop": 1e-1, "num": 2}), [1e-2, 1e-1])
    with pytest.raises(ConfigError):
        parse_times("geom:1")
