import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

from noiseradar import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SMALL = ["--set", "grid.batch_count=64", "--set", "grid.batch_len=2048"]


def run(*args):
    return cli.main([str(a) for a in args])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def sinrs(out):
    r = rows(out / "summary.csv")
    col = [k for k in r[0] if k != "algorithm"][0]
    return {row["algorithm"]: float(row[col]) for row in r}


def test_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"threads": 2, "grid": {"batch_count": 10}, "output_dir": "x"}))
    cfg = cli.load_config(str(cfg_file), ["threads=3", "grid.batch_len=64"], {"threads": 5})
    assert cfg["threads"] == 5 and cfg["grid"]["batch_count"] == 10 and cfg["grid"]["batch_len"] == 64
    assert cfg["output_dir"] == "x" and cfg["radar"]["sample_rate_hz"] == 31.25e6


def test_config_errors(tmp_path, capsys):
    assert run("losses", "--set", "nope=1", "-o", tmp_path) == 2
    err = json.loads(capsys.readouterr().err.strip())
    assert err == {"error": "config", "message": "unknown config key 'nope'"}
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  \"threads\": ,\n}")
    assert run("losses", "-c", bad) == 2
    assert "line 2" in json.loads(capsys.readouterr().err)["message"]
    both = ["--set", 'hypotheses.velocities=[1]', "--set", 'hypotheses.auto={"max_loss_db": 3, "span": 10}']
    run("simulate", "-o", tmp_path, *SMALL)
    assert run("process", "-o", tmp_path, *SMALL, *both) == 2
    assert "mutually exclusive" in capsys.readouterr().err


def test_unwritable_output(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run("losses", "-o", blocker / "sub") == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "io" and "file" in err["message"]


def test_losses_span_zero(tmp_path):
    assert run("losses", "-o", tmp_path, "--set", "losses.span_mps=0") == 0
    r = rows(tmp_path / "losses.csv")
    assert len(r) == 1 and all(float(v) == 0 for v in r[0].values())
    meta = json.loads((tmp_path / "losses.meta.json").read_text())
    assert meta["provenance"]["tool"] == "noiseradar"


def test_empty_scene_simulates_zeros(tmp_path):
    assert run("simulate", "-o", tmp_path, *SMALL) == 0
    assert not any((tmp_path / "received.bin").read_bytes())


def test_uav_target_lands_on_ground_truth_bin(tmp_path):
    scene = {"targets": [{"range_m": 165.0, "velocity_mps": 11.5}]}
    args = ["-o", tmp_path, *SMALL, "--set", f"scene={json.dumps(scene)}", "--set", "modes=[\"none\"]"]
    assert run("simulate", *args) == 0 and run("process", *args) == 0
    report = json.loads((tmp_path / "report_none_P64.json").read_text())
    expected = round(165.0 * 2 * 31.25e6 / 299_792_458.0)
    assert report["reports"][0]["peak_location"]["range_bin"] == expected


def test_static_scene_all_modes_agree(tmp_path):
    # on a whole range bin, so no hypothesis can win by reducing straddle loss
    scene = {"targets": [{"range_m": 64 * 299_792_458.0 / (2 * 31.25e6)}], "noise_power": 1.0}
    args = ["-o", tmp_path, *SMALL, "--set", f"scene={json.dumps(scene)}"]
    assert run("simulate", *args) == 0 and run("process", *args) == 0
    s = sinrs(tmp_path)
    assert len(s) == 5 and max(s.values()) - min(s.values()) <= 0.1


def test_dimension_mismatch(tmp_path, capsys):
    run("simulate", "-o", tmp_path, *SMALL)
    assert run("process", "-o", tmp_path, "--set", "grid.batch_count=128", "--set", "grid.batch_len=2048") == 1
    assert "input files hold" in json.loads(capsys.readouterr().err)["message"]
    assert run("process", "-o", tmp_path, *SMALL, "--set", "radar.sample_rate_hz=50e6") == 1
    assert "sample rate" in capsys.readouterr().err


def test_gain_curve_and_start_limit(tmp_path, capsys):
    scene = {"targets": [{"range_m": 300.0, "velocity_mps": 300.0}], "noise_power": 10.0}
    args = ["-o", tmp_path, "--set", f"scene={json.dumps(scene)}", "--set", "simulate.length_samples=600000",
            "--set", "gain_curve.doublings=4"]
    assert run("simulate", *args) == 0 and run("gain-curve", *args) == 0
    r = rows(tmp_path / "gain_curve.csv")
    assert list(r[0]) == ["start_time_s", "T_ms", "gain_db"] and len(r) == 5
    for k, row in enumerate(r):
        assert float(row["gain_db"]) == pytest.approx(3.0103 * k, abs=0.7)
    assert run("gain-curve", *args, "--set", "gain_curve.start_times_s=[0.01]") == 1
    message = json.loads(capsys.readouterr().err)["message"]
    assert "latest possible start is 0.00242278 s" in message


def test_auto_grid_hypotheses(tmp_path):
    cfg = cli.load_config(None, ['hypotheses.auto={"max_loss_db": 3, "span": 20, "spacing_mode": "stretch"}'])
    exp = cli.Experiment(cfg)
    v = exp.velocities()
    assert 0.0 in v and len(v) % 2 == 1
    assert len(exp.hypotheses(cli.Mode.NONE)) == 1


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "noiseradar.cli", "design-grid", "-o", str(tmp_path)],
                         capture_output=True, text=True)
    assert out.returncode == 0 and "spacing" in out.stdout
