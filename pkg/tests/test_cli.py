import re

import numpy as np
import pytest
from PIL import Image

from fusionloc.cli import main
from fusionloc.data import dataset_hash
from fusionloc.metrics import COLUMNS, write_eval_dump

CONFIG = """
[world]
seed = 5
extent = 6, 5
obstacle_count = 2
image_size = 84, 48
trajectory_step = 0.25

[dataset]
layout = uniform
n_train = 1
n_eval = 1
length = 6

[model]
d_i = 32
d_p = 32
strict_dims = false
crop_size = 32
backbone_layers = 1, 1
backbone_widths = 8, 16
n_points = 128
sa1 = 32 0.3 8 16,32
sa2 = 16 0.6 8 32
n_layers = 1

[train]
max_steps = 2
batch_size = 3
eval_every = 1
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "cfg.ini").write_text(CONFIG)
    assert main(["generate", "--config", str(root / "cfg.ini"), "--out", str(root / "data")]) == 0
    return root


def _manifests(d):
    return list(d.rglob("manifest.txt"))


def test_generate_layout_and_manifest(workspace, capsys):
    data = workspace / "data"
    assert (data / "norm.txt").exists()
    assert (data / "set-01" / "world.json").exists()
    assert sorted(p.name for p in (data / "set-01").iterdir() if p.is_dir()) == ["seq-01", "seq-02"]
    assert _manifests(data) == [data / "manifest.txt"]
    assert "dataset_hash = " + dataset_hash(data) in (data / "manifest.txt").read_text()


def test_generate_rerun_same_hash(workspace, tmp_path):
    assert main(["generate", "--config", str(workspace / "cfg.ini"), "--out", str(tmp_path / "again")]) == 0
    assert dataset_hash(tmp_path / "again") == dataset_hash(workspace / "data")


def test_generate_summary_table(tmp_path, capsys):
    (tmp_path / "c.ini").write_text(CONFIG)
    main(["generate", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "d")])
    out = capsys.readouterr().out
    assert re.search(r"seq-01\s+6\s+train", out) and re.search(r"seq-02\s+6\s+eval", out)


def test_generate_bad_extent(tmp_path, capsys):
    (tmp_path / "bad.ini").write_text("[world]\nextent = -1, 5\n")
    assert main(["generate", "--config", str(tmp_path / "bad.ini"), "--out", str(tmp_path / "x")]) == 2
    assert "extent" in capsys.readouterr().err


def test_train_eval_plot(workspace, capsys):
    cfg, data = str(workspace / "cfg.ini"), str(workspace / "data")
    run = workspace / "run"
    assert main(["train", "--config", cfg, "--data", data, "--out", str(run)]) == 0
    assert (run / "checkpoint.npz").exists() and (run / "loss_curve.csv").exists()
    text = (run / "manifest.txt").read_text()
    assert "config_hash = " in text and "model_config_hash = " in text

    ev = workspace / "eval"
    assert main(["eval", "--ckpt", str(run), "--data", data, "--out", str(ev)]) == 0
    table = capsys.readouterr().out
    assert all(c in table for c in COLUMNS) and "avg" in table
    first = (ev / "report.txt").read_text()
    assert first.splitlines()[0].split()[1:] == list(COLUMNS)
    assert main(["eval", "--ckpt", str(run), "--data", data, "--out", str(ev)]) == 0
    assert (ev / "report.txt").read_text() == first

    plots = workspace / "plots"
    plots.mkdir()
    argv = ["plot", "--dump", str(ev / "eval_dump.csv"), "--out", str(plots), "--size", "300x200"]
    assert main(argv + ["--map", str(workspace / "data" / "set-01" / "world.json")]) == 0
    for name in ("error_map_position.png", "error_map_orientation.png"):
        assert Image.open(plots / name).size == (300, 200)
    assert _manifests(plots) == [plots / "manifest.txt"]


def test_resume(workspace):
    cfg, data = str(workspace / "cfg.ini"), str(workspace / "data")
    run = workspace / "run2"
    assert main(["train", "--config", cfg, "--data", data, "--out", str(run)]) == 0
    (workspace / "cfg4.ini").write_text(CONFIG.replace("max_steps = 2", "max_steps = 4"))
    assert main(["train", "--config", str(workspace / "cfg4.ini"), "--data", data, "--out", str(run), "--resume", str(run)]) == 0
    assert len((run / "loss_curve.csv").read_text().splitlines()) == 5


def test_train_missing_data(workspace, tmp_path):
    assert main(["train", "--config", str(workspace / "cfg.ini"), "--data", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == 3


def test_train_divergence(workspace, tmp_path):
    bad = CONFIG.replace("[train]", "[train]\nlearning_rate = 1e30")
    (tmp_path / "div.ini").write_text(bad.replace("max_steps = 2", "max_steps = 50"))
    code = main(["train", "--config", str(tmp_path / "div.ini"), "--data", str(workspace / "data"), "--out", str(tmp_path / "o")])
    assert code == 4


def test_plot_missing_dump(tmp_path):
    assert main(["plot", "--dump", str(tmp_path / "none.csv"), "--out", str(tmp_path)]) == 3


def test_plot_bad_size(tmp_path):
    write_eval_dump(tmp_path / "d.csv", ["s"], [0], np.zeros((1, 3)), np.zeros((1, 3)))
    assert main(["plot", "--dump", str(tmp_path / "d.csv"), "--out", str(tmp_path), "--size", "big"]) == 2


def test_plot_next_to_eval_keeps_one_manifest(workspace):
    ev = workspace / "eval"  # written by test_train_eval_plot
    if not (ev / "eval_dump.csv").exists():
        pytest.skip("needs the eval outputs")
    for _ in range(2):
        assert main(["plot", "--dump", str(ev / "eval_dump.csv"), "--out", str(ev)]) == 0
    text = (ev / "manifest.txt").read_text()
    assert _manifests(ev) == [ev / "manifest.txt"]
    assert "command = eval" in text and text.count("[plot]") == 1
