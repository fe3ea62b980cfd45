"""End-to-end command-line workflows on small generated datasets."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from deeplfm.cli import main
from deeplfm.data import load_dataset, load_inputs_csv
from deeplfm.model import DLFMNetwork

TINY_MODEL = (
    "model.width = 2\n"
    "model.n_rf = 5\n"
    "model.n_mc = 4\n"
    "train.max_iterations = 3\n"
    "train.batch_size = 32\n"
    "train.log_every = 2\n"
)


def make_dataset(tmp_path, seed=0):
    out = tmp_path / "data"
    code = main([
        "generate", "toy", "--seed", str(seed), "--points", "60",
        "--out", str(out),
    ])
    assert code == 0
    return out


def make_config(tmp_path, data_dir, extra=""):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        f"data.csv = {data_dir / 'data.csv'}\n"
        f"data.splits = {data_dir / 'splits.csv'}\n"
        + TINY_MODEL + extra
    )
    return cfg


def test_generate_writes_loadable_dataset(tmp_path, capsys):
    out = make_dataset(tmp_path)
    assert (out / "data.csv").exists()
    assert (out / "splits.csv").exists()
    assert (out / "params.txt").exists()
    ds = load_dataset(out / "data.csv", out / "splits.csv")
    assert set(ds.splits) == {"train", "interpolation", "extrapolation"}
    assert ds.truth is not None
    message = capsys.readouterr().out
    assert "wrote" in message and "extrapolation" in message


def test_generate_systems(tmp_path):
    assert main(["generate", "fitzhugh-nagumo", "--scenario", "b",
                 "--points", "80", "--out", str(tmp_path / "fhn")]) == 0
    ds = load_dataset(tmp_path / "fhn" / "data.csv", tmp_path / "fhn" / "splits.csv")
    assert ds.targets.shape[1] == 2
    assert main(["generate", "lorenz", "--points", "50",
                 "--out", str(tmp_path / "lor")]) == 0
    ds = load_dataset(tmp_path / "lor" / "data.csv", tmp_path / "lor" / "splits.csv")
    assert ds.targets.shape[1] == 3
    assert set(ds.splits) == {"train", "test"}


def test_generate_bad_system_exits_usage(capsys):
    assert main(["generate", "pendulum"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_train_produces_artifacts(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0

    trace = (run / "trace.csv").read_text().splitlines()
    assert trace[0] == "iteration,elbo,val_nmse,val_mnll"
    assert [row.split(",")[0] for row in trace[1:]] == ["0", "2"]

    net = DLFMNetwork.load(run / "checkpoint.npz")
    assert net.config.hidden[0].width == 2
    assert net.normalization is not None

    summary = json.loads((run / "summary.json").read_text())
    assert summary["command"] == "train"
    assert summary["n_iterations"] == 3
    assert set(summary["metrics"]) == {"train", "interpolation", "extrapolation"}
    assert "metrics_vs_truth" in summary
    out = capsys.readouterr().out
    assert "iteration 0" in out
    assert "split extrapolation" in out


def test_train_summary_deterministic(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    runs = []
    for name in ("a", "b"):
        run = tmp_path / name
        assert main(["train", "--config", str(cfg), "--seed", "3",
                     "--out", str(run)]) == 0
        runs.append(run)
    capsys.readouterr()

    def stable_lines(path):
        return [
            line for line in (path / "summary.json").read_text().splitlines()
            if "timestamp" not in line and "wall_time_s" not in line
        ]

    assert stable_lines(runs[0]) == stable_lines(runs[1])
    assert (runs[0] / "trace.csv").read_bytes() == (runs[1] / "trace.csv").read_bytes()


def test_train_seed_changes_results(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    elbos = []
    for seed in ("3", "4"):
        run = tmp_path / f"s{seed}"
        assert main(["train", "--config", str(cfg), "--seed", seed,
                     "--out", str(run)]) == 0
        elbos.append(json.loads((run / "summary.json").read_text())["final_elbo"])
    capsys.readouterr()
    assert elbos[0] != elbos[1]


def test_train_missing_data_exits_data(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("data.csv = /nonexistent/nope.csv\n" + TINY_MODEL)
    assert main(["train", "--config", str(cfg)]) == 2
    assert "data error" in capsys.readouterr().err


def test_train_bad_config_exits_usage(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("data.csv = d.csv\nmodel.color = blue\n")
    assert main(["train", "--config", str(cfg)]) == 1
    assert "usage error" in capsys.readouterr().err


def test_train_divergence_exits_numerical(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data, "train.learning_rate = 1e200\n")
    with np.errstate(all="ignore"):
        code = main(["train", "--config", str(cfg),
                     "--out", str(tmp_path / "boom")])
    assert code == 3
    assert "numerical failure" in capsys.readouterr().err


def test_evaluate_checkpoint(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0
    capsys.readouterr()

    report = tmp_path / "eval.json"
    code = main([
        "evaluate", "--checkpoint", str(run / "checkpoint.npz"),
        "--data", str(data / "data.csv"), "--splits", str(data / "splits.csv"),
        "--split", "extrapolation", "--use-truth", "--out", str(report),
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "mean_nmse" in out and "mean_mnll" in out
    payload = json.loads(report.read_text())
    assert payload["split"] == "extrapolation"
    assert payload["vs_truth"] is True
    assert payload["n_points"] == 150 * 60 // 600 or payload["n_points"] > 0


def test_evaluate_missing_split_exits_data(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0
    capsys.readouterr()
    code = main([
        "evaluate", "--checkpoint", str(run / "checkpoint.npz"),
        "--data", str(data / "data.csv"), "--splits", str(data / "splits.csv"),
        "--split", "test",
    ])
    assert code == 2
    assert "data error" in capsys.readouterr().err


def test_evaluate_missing_checkpoint_exits_data(tmp_path, capsys):
    data = make_dataset(tmp_path)
    code = main([
        "evaluate", "--checkpoint", str(tmp_path / "none.npz"),
        "--data", str(data / "data.csv"),
    ])
    assert code == 2
    capsys.readouterr()


def test_predict_round_trip(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0

    grid = tmp_path / "grid.csv"
    times = np.linspace(0.0, 1.25, 7)
    grid.write_text("t\n" + "\n".join(repr(float(v)) for v in times) + "\n")
    pred = tmp_path / "pred.csv"
    code = main([
        "predict", "--checkpoint", str(run / "checkpoint.npz"),
        "--inputs", str(grid), "--out", str(pred),
    ])
    assert code == 0
    capsys.readouterr()
    table, cols = load_inputs_csv(pred)
    assert cols == ["t", "mean_y1", "var_y1"]
    assert table.shape[0] == 7
    assert np.array_equal(table[:, 0], times)
    # variances are positive
    assert np.all(table[:, -1] > 0)


def test_predict_deterministic(tmp_path, capsys):
    data = make_dataset(tmp_path)
    cfg = make_config(tmp_path, data)
    run = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(run)]) == 0
    grid = tmp_path / "grid.csv"
    grid.write_text("t\n0.1\n0.9\n1.2\n")
    outs = []
    for name in ("p1.csv", "p2.csv"):
        path = tmp_path / name
        assert main(["predict", "--checkpoint", str(run / "checkpoint.npz"),
                     "--inputs", str(grid), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    capsys.readouterr()
    assert outs[0] == outs[1]


def test_output_root_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DEEPLFM_OUTPUT_ROOT", str(tmp_path / "root"))
    os.makedirs(tmp_path / "root", exist_ok=True)
    assert main(["generate", "toy", "--points", "60"]) == 0
    capsys.readouterr()
    assert (tmp_path / "root" / "toy-data" / "data.csv").exists()


def test_console_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "deeplfm.cli", "generate", "--help"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "--seed" in result.stdout


def test_no_command_exits_usage(capsys):
    assert main([]) == 1
    capsys.readouterr()
