import json
import subprocess
import sys

import pytest

from edid import cli
from edid.mobility import CRW, LW


def test_read_config(tmp_path):
    cfg = tmp_path / "swarm.cfg"
    cfg.write_text("# desk run\nN = 12\nc=15.5  # metres\nwalk = lw:1.8\n\nreps = 3\n")
    assert cli.read_config(cfg) == {"N": 12, "C": 15.5, "walk": LW(1.8), "reps": 3}


def test_read_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("speed = 3\n")
    with pytest.raises(ValueError, match="bad.cfg:1"):
        cli.read_config(cfg)


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "swarm.cfg"
    cfg.write_text("n = 12\nseed = 4\n")
    args = cli.build_parser().parse_args(["run", "--config", str(cfg), "--n", "8", "--walk", "crw:0.3"])
    config, extra = cli._settings(args)
    assert (config.N, config.seed, config.walk) == (8, 4, CRW(0.3))
    assert extra == {}


def test_full_scale_profile():
    args = cli.build_parser().parse_args(["sweep", "--full-scale"])
    config, extra = cli._settings(args)
    assert config.duration == 100 * 3600.0 and config.msg_window == 50 * 3600.0
    assert extra["reps"] == 40


def test_run_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["run", "--duration", "7200", "--msg-window", "3600", "--out", str(out), "--trajectory-every", "600",
                     "--seed", "3"])
    assert code == cli.EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "curves.csv", "encounters.csv", "micro.json", "trajectory.csv"]
    report = json.loads((out / "micro.json").read_text())
    assert report["tau_ideal"] == pytest.approx(4210.526315789473)
    assert (out / "encounters.csv").read_bytes().startswith(b"t,a,b,kind\r\n")


def test_sweep_writes_reports(tmp_path):
    out = tmp_path / "sw"
    code = cli.main(["sweep", "--var", "walk", "--values", "crw:0.5; lw:2.0", "--reps", "1",
                     "--duration", "7200", "--msg-window", "3600", "--out", str(out)])
    assert code == cli.EXIT_OK
    micro_csv = (out / "micro.csv").read_text().splitlines()
    assert [row.split(",")[0] for row in micro_csv[1:]] == ["crw:0.5", "lw:2"]


def test_runtime_error_exit_code(tmp_path):
    assert cli.main(["run", "--n", "1", "--out", str(tmp_path / "x")]) == cli.EXIT_RUNTIME
    assert not (tmp_path / "x").exists()


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "edid.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "validate" in res.stdout


def test_full_scale_alias():
    args = cli.build_parser().parse_args(["run", "--paper-scale"])
    assert args.full_scale
