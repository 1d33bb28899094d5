import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

from uclab import __version__
from uclab.cli import DEFAULTS, apply_override, resolve_config, run
from uclab.reporting import config_hash

QUICK_UC = ["--set", "n_schedule=[16,64,256]", "--set", "replications=3",
            "--set", "net_radius=0.25", "--set", "rate_band=null",
            "--set", "max_slope_std_error=null"]


def only_run(out: Path) -> Path:
    runs = sorted(out.iterdir())
    assert len(runs) == 1
    return runs[0]


def test_calc_worked_example(tmp_path, capsys):
    assert run(["calc", "--out", str(tmp_path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_star"] == 38
    assert payload["constants_used"]["kappa"] == 1.0
    assert "ln(4 L (1 + kappa) / eps)" in payload["formula_citation"]
    saved = json.loads((only_run(tmp_path) / "calc.json").read_text())
    assert saved["n_star"] == 38 and saved["provenance"]["library_version"] == __version__


def test_calc_concave_regime(tmp_path, capsys):
    argv = ["calc", "--out", str(tmp_path), "--set", "regime=ncc", "--set", "eps=0.5",
            "--set", "D_X=1", "--set", "D_Y=1"]
    assert run(argv) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n_star"] == 2410456
    assert payload["nu"] == pytest.approx(0.00390625)
    assert payload["constants_used"]["Q"] == 64
    assert isinstance(payload["constants_used"]["D_X"], float)


def test_calc_errors(tmp_path, capsys):
    assert run(["calc", "--out", str(tmp_path), "--set", "eps=100"]) == 1
    assert "too large" in capsys.readouterr().err
    assert run(["calc", "--out", str(tmp_path), "--set", "regime=ncc"]) == 1
    assert "D_X" in capsys.readouterr().err


def test_selftest(tmp_path, capsys):
    assert run(["selftest", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 10
    checks = json.loads((only_run(tmp_path) / "selftest.json").read_text())["checks"]
    assert all(c["passed"] for c in checks)


def test_stability_subcommand(tmp_path, capsys):
    argv = ["stability", "--out", str(tmp_path), "--set", "trials=100"]
    assert run(argv) == 0
    run_dir = only_run(tmp_path)
    rep = json.loads((run_dir / "verify_stability.json").read_text())
    assert [c["details"]["n"] for c in rep["checks"]] == [10, 100, 1000]
    assert all(c["passed"] and c["worst_ratio"] <= c["slack"] for c in rep["checks"])
    assert (run_dir / "stability.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert "PASS" in capsys.readouterr().out


def test_uc_ncsc_artifacts(tmp_path):
    assert run(["uc-ncsc", "--out", str(tmp_path), *QUICK_UC]) == 0
    run_dir = only_run(tmp_path)
    names = {p.name for p in run_dir.iterdir()}
    assert {"config.json", "curve.csv", "ratefit.json", "verify_rate.json",
            "verify_mapping.json", "curve.png", "report.md"} <= names
    lines = (run_dir / "curve.csv").read_text().splitlines()
    assert lines[0] == "n,mean,std_error,correction" and len(lines) == 4
    config = json.loads((run_dir / "config.json").read_text())
    for name in ("ratefit.json", "verify_rate.json", "verify_mapping.json"):
        prov = json.loads((run_dir / name).read_text())["provenance"]
        assert prov == {"library_version": __version__, "config_hash": config_hash(config)}
    assert config_hash(config) in (run_dir / "report.md").read_text()
    assert (run_dir / "curve.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert run_dir.name.startswith("uc-ncsc-")


def test_artifacts_identical_across_runs_and_threads(tmp_path, monkeypatch):
    assert run(["uc-ncsc", "--out", str(tmp_path / "a"), "--seed", "11", *QUICK_UC]) == 0
    assert run(["uc-ncsc", "--out", str(tmp_path / "b"), "--seed", "11", "--threads", "3",
                *QUICK_UC]) == 0
    monkeypatch.setenv("UCLAB_THREADS", "2")
    assert run(["uc-ncsc", "--out", str(tmp_path / "c"), "--seed", "11", *QUICK_UC]) == 0
    dirs = [only_run(tmp_path / k) for k in "abc"]
    for name in ("curve.csv", "ratefit.json", "verify_rate.json", "config.json", "report.md",
                 "curve.png"):
        blobs = {(d / name).read_bytes() for d in dirs}
        assert len(blobs) == 1, name


def test_seed_changes_results(tmp_path):
    assert run(["uc-ncsc", "--out", str(tmp_path / "a"), "--seed", "1", *QUICK_UC]) == 0
    assert run(["uc-ncsc", "--out", str(tmp_path / "b"), "--seed", "2", *QUICK_UC]) == 0
    a, b = (only_run(tmp_path / k) / "curve.csv" for k in "ab")
    assert a.read_text() != b.read_text()


def test_failed_verification_exits_two(tmp_path, capsys):
    argv = ["uc-ncsc", "--out", str(tmp_path), *QUICK_UC, "--set", "rate_band=[-0.1, 0.0]"]
    assert run(argv) == 2
    assert "FAIL  rate" in capsys.readouterr().out


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trials": 7, "family": dict(DEFAULTS["stability"]["family"],
                                                           seed=9)}))
    config = resolve_config("stability", str(cfg), ["n_schedule=[5, 50]"], seed=3, threads=2)
    assert config["trials"] == 7 and config["family"]["seed"] == 9
    assert config["n_schedule"] == [5, 50] and config["base_seed"] == 3
    assert config["threads"] == 2


def test_apply_override_dotted_keys():
    config = {"family": {"mu": 1.0}}
    apply_override(config, "family.mu=2.5")
    apply_override(config, "inner.tolerance=1e-8")
    apply_override(config, "label=plain text")
    assert config == {"family": {"mu": 2.5}, "inner": {"tolerance": 1e-8}, "label": "plain text"}


def test_invalid_json_reports_position(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "trials": 10,\n  "points": \n}\n')
    assert run(["stability", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert f"{cfg}:4:" in err and "invalid JSON" in err


def test_schema_violation_reports_line_and_field(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{\n  "trials": 10,\n  "replications": -3\n}\n')
    assert run(["stability", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert f"{cfg}:3:" in err and "field 'replications'" in err


def test_unknown_field_rejected(tmp_path, capsys):
    assert run(["stability", "--out", str(tmp_path), "--set", "bogus=1"]) == 1
    assert "bogus" in capsys.readouterr().err


def test_capacity_error_surfaced(tmp_path, capsys):
    assert run(["uc-ncsc", "--out", str(tmp_path), "--set", "net_radius=1e-5"]) == 1
    err = capsys.readouterr().err
    assert "grid requires Q=20000182084 points, exceeding the cap of 10000000" in err


@pytest.mark.parametrize("argv", [["nonsense"], ["calc", "--threads", "x"], []])
def test_usage_errors_exit_one(argv, capsys):
    with pytest.raises(SystemExit) as info:
        run(argv)
    assert info.value.code == 1


def test_bad_thread_settings(tmp_path, monkeypatch, capsys):
    assert run(["calc", "--out", str(tmp_path), "--threads", "0"]) == 1
    monkeypatch.setenv("UCLAB_THREADS", "many")
    assert run(["calc", "--out", str(tmp_path)]) == 1
    assert "UCLAB_THREADS" in capsys.readouterr().err


def test_seed_range(tmp_path, capsys):
    assert run(["calc", "--out", str(tmp_path), "--seed", str(2**64)]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "uclab", "calc", "--out", str(tmp_path)],
                          capture_output=True, text=True, env={**os.environ})
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n_star"] == 38
