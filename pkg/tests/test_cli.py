import csv
import os

import pytest

from magin.cli import METRIC_COLUMNS, main


@pytest.fixture
def small_cfg(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text("n_iotds = 6\nn_uavs = 1\nn_hotspots = 2\nepisode_length = 5\nppo_epochs = 2\n")
    return str(path)


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def train_run(tmp_path, cfg, name="run", *extra):
    out = tmp_path / name
    assert main(["train", "--config", cfg, "--out", str(out), "--episodes", "2", *extra]) == 0
    return out


def test_train_writes_run_directory(tmp_path, small_cfg):
    out = train_run(tmp_path, small_cfg, "run", "--variant", "po-mappo-bd", "--seed", "3")
    rows = read(out / "metrics.csv")
    assert len(rows) == 2 * (5 + 1)
    assert tuple(rows[0]) == METRIC_COLUMNS
    assert [r["episode"] for r in rows if r["slot"] == "-1"] == ["1", "2"]
    manifest = dict(line.split(" = ", 1) for line in (out / "manifest.txt").read_text().splitlines())
    assert manifest["variant"] == "po-mappo-bd" and manifest["seed"] == "3" and manifest["episodes"] == "2"
    assert (out / "checkpoints" / "ep002.ckpt").exists()
    assert "n_iotds = 6" in (out / "config.snapshot").read_text()


def test_train_is_reproducible(tmp_path, small_cfg):
    a = train_run(tmp_path, small_cfg, "a")
    b = train_run(tmp_path, small_cfg, "b")
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()


def test_eval_stdout_and_file(tmp_path, small_cfg, capsys):
    out = train_run(tmp_path, small_cfg)
    ckpt = str(out / "checkpoints" / "ep002.ckpt")
    capsys.readouterr()
    assert main(["eval", "--checkpoint", ckpt, "--episodes", "2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and lines[0].startswith("variant,episodes,seed")
    assert main(["eval", "--checkpoint", ckpt, "--episodes", "2", "--out", str(tmp_path / "e.csv")]) == 0
    row = read(tmp_path / "e.csv")[0]
    assert lines[1] == ",".join(row.values())


def test_sweep_grid_rows_and_monotone_workload(tmp_path, small_cfg):
    out = tmp_path / "sw"
    assert main(["sweep", "--axis", "task-size", "--values", "0.1,0.3,0.5", "--config", small_cfg,
                 "--eval-episodes", "2", "--out", str(out)]) == 0
    rows = read(out / "summary.csv")
    assert [float(r["value"]) for r in rows] == [0.1, 0.3, 0.5]
    e = [float(r["e_all"]) for r in rows]
    assert e[0] < e[1] < e[2]


def test_single_point_sweep_equals_eval(tmp_path, small_cfg, capsys):
    out = train_run(tmp_path, small_cfg)
    ckpt = str(out / "checkpoints" / "ep002.ckpt")
    snap = str(out / "config.snapshot")
    assert main(["sweep", "--axis", "n-iotds", "--values", "6", "--checkpoint", ckpt, "--config", snap,
                 "--eval-episodes", "2", "--out", str(tmp_path / "sw")]) == 0
    assert main(["eval", "--checkpoint", ckpt, "--episodes", "2", "--out", str(tmp_path / "e.csv")]) == 0
    s, e = read(tmp_path / "sw" / "summary.csv")[0], read(tmp_path / "e.csv")[0]
    for col in ("e_all", "mean_alpha", "reward_uav", "fairness"):
        assert float(s[col]) == pytest.approx(float(e[col]), rel=1e-12)


def test_sweep_over_uav_count_trains_per_point(tmp_path, small_cfg):
    out = tmp_path / "sw"
    assert main(["sweep", "--axis", "n-uavs", "--values", "1,2", "--config", small_cfg, "--train",
                 "--episodes", "1", "--eval-episodes", "1", "--out", str(out)]) == 0
    assert len(read(out / "summary.csv")) == 2
    assert (out / "point01" / "checkpoints" / "ep001.ckpt").exists()


def test_sweep_checkpoint_shape_mismatch_names_point(tmp_path, small_cfg, capsys):
    out = train_run(tmp_path, small_cfg)
    rc = main(["sweep", "--axis", "n-iotds", "--values", "9", "--checkpoint",
               str(out / "checkpoints" / "ep002.ckpt"), "--config", small_cfg, "--out", str(tmp_path / "sw")])
    assert rc == 2 and "n-iotds=9" in capsys.readouterr().err


def test_plotdata_schema(tmp_path, small_cfg):
    a = train_run(tmp_path, small_cfg, "a", "--variant", "mappo-bd")
    b = train_run(tmp_path, small_cfg, "b", "--variant", "mappo-nd")
    out = tmp_path / "tidy.csv"
    assert main(["plotdata", str(a / "metrics.csv"), f"custom={b / 'metrics.csv'}", "--out", str(out)]) == 0
    rows = read(out)
    assert tuple(rows[0]) == ("series", "episode", "metric", "value")
    assert {r["series"] for r in rows} == {"mappo-bd", "custom"}
    assert len(rows) == 2 * 2 * len(METRIC_COLUMNS[2:])


@pytest.mark.parametrize("argv, needle", [
    (["plotdata", "missing.csv", "--out", "x.csv"], "not found"),
    (["sweep", "--axis", "weather", "--values", "1", "--out", "o"], "unknown sweep axis"),
    (["sweep", "--axis", "task-size", "--values", "", "--out", "o"], "at least one"),
    (["eval", "--checkpoint", "nope.ckpt"], "cannot load checkpoint"),
])
def test_errors_exit_with_code_two(tmp_path, monkeypatch, capsys, argv, needle):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    assert needle in capsys.readouterr().err


def test_plotdata_rejects_empty_metrics(tmp_path, capsys):
    (tmp_path / "m.csv").write_text(",".join(METRIC_COLUMNS) + "\n")
    assert main(["plotdata", str(tmp_path / "m.csv"), "--out", str(tmp_path / "o.csv")]) == 2
    assert "no episode rows" in capsys.readouterr().err


def test_config_errors_name_the_key(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("n_iotds = 0\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path / "r")]) == 2
    assert "n_iotds" in capsys.readouterr().err


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_output_dir(tmp_path, small_cfg, capsys):
    locked = tmp_path / "locked"
    locked.mkdir()
    locked.chmod(0o500)
    assert main(["train", "--config", small_cfg, "--out", str(locked / "run"), "--episodes", "1"]) == 2
    assert "not writable" in capsys.readouterr().err


def test_output_path_that_is_a_file(tmp_path, small_cfg, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["train", "--config", small_cfg, "--out", str(blocker / "run"), "--episodes", "1"]) == 2
    assert "not writable" in capsys.readouterr().err
