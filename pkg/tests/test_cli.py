import json

import numpy as np
import pytest

from conftest import CHAIN, DATA
from hace.cli import main
from hace.data import FeatureDataset, save_features
from hace.metrics import PredictionDump, save_dump


@pytest.fixture
def toy(tmp_path):
    """Two separable leaves under the root, as files."""
    (tmp_path / "h.tsv").write_text("root\ta\nroot\tb\n")
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(-2, 0.3, (20, 3)), rng.normal(2, 0.3, (20, 3))])
    save_features(FeatureDataset(x, np.repeat([0, 1], 20)), tmp_path / "f.csv")
    (tmp_path / "c.json").write_text(json.dumps({"loss": "sce", "epochs": 40, "batch_size": 8}))
    return tmp_path


def test_validate_cifar(capsys):
    assert main(["validate", "--hierarchy", str(DATA / "cifar100.tsv")]) == 0
    out = capsys.readouterr().out
    assert "n=100 N=120 depth≤2" in out and "root=" in out


def test_validate_dag_file(capsys):
    assert main(["validate", "--hierarchy", str(DATA / "fgvc_shaped_dag.tsv"), "--dag"]) == 0
    assert "mode=dag" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["root\tA\nA\tB\nB\tA\n", ""])
def test_validate_rejects(tmp_path, capsys, text):
    (tmp_path / "h.tsv").write_text(text)
    assert main(["validate", "--hierarchy", str(tmp_path / "h.tsv")]) == 2
    assert "error" in capsys.readouterr().err


def test_validate_lists_offenders(tmp_path, capsys):
    (tmp_path / "h.tsv").write_text("root\tA\nA\tB\nB\tA\n")
    main(["validate", "--hierarchy", str(tmp_path / "h.tsv")])
    err = capsys.readouterr().err
    assert "A" in err and "B" in err


def test_missing_file_is_input_error(tmp_path):
    assert main(["validate", "--hierarchy", str(tmp_path / "nope.tsv")]) == 2


def test_targets_chain(tmp_path):
    (tmp_path / "h.tsv").write_text(CHAIN)
    out = tmp_path / "t.csv"
    assert main(["targets", "--hierarchy", str(tmp_path / "h.tsv"), "--scheme", "ancestral", "--dilution", "0.6", "--out", str(out)]) == 0
    header, row = out.read_text().splitlines()
    assert header == "leaf,parent,__root__"
    assert [float(v) for v in row.split(",")] == pytest.approx([0.6, 0.24, 0.16], abs=1e-15)


def test_targets_one_hot_and_bad_dilution(tmp_path):
    h = str(DATA / "cifar100.tsv")
    out = tmp_path / "t.csv"
    assert main(["targets", "--hierarchy", h, "--scheme", "one_hot", "--out", str(out)]) == 0
    m = np.loadtxt(out, delimiter=",", skiprows=1)
    assert np.array_equal(m[:, :100], np.eye(100)) and not m[:, 100:].any()
    assert main(["targets", "--hierarchy", h, "--scheme", "ancestral", "--dilution", "0", "--out", str(out)]) == 2


def test_train_separable_toy(toy):
    out = toy / "run"
    args = ["train", "--config", str(toy / "c.json"), "--features", str(toy / "f.csv"), "--hierarchy", str(toy / "h.tsv")]
    assert main(args + ["--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["top1"] == 100.0 and report["seed"] == 0
    assert main(args + ["--out", str(toy / "run2")]) == 0
    assert (out / "trace.csv").read_bytes() == (toy / "run2" / "trace.csv").read_bytes()
    assert (out / "report.json").read_bytes() == (toy / "run2" / "report.json").read_bytes()


def test_train_seed_flag_overrides_config(toy):
    base = ["train", "--config", str(toy / "c.json"), "--features", str(toy / "f.csv"), "--hierarchy", str(toy / "h.tsv")]
    assert main(base + ["--seed", "9", "--out", str(toy / "r")]) == 0
    assert json.loads((toy / "r" / "config.json").read_text())["seed"] == 9


@pytest.mark.parametrize(
    "config",
    [
        {"loss": "sce", "pairing": "hace_anchored"},
        {"loss": "hace", "scheme": "ancestral"},
        {"loss": "sce", "learning_rate": 0.1},
    ],
)
def test_train_bad_config(toy, config):
    (toy / "bad.json").write_text(json.dumps(config))
    args = ["train", "--config", str(toy / "bad.json"), "--features", str(toy / "f.csv"), "--hierarchy", str(toy / "h.tsv"), "--out", str(toy / "r")]
    assert main(args) == 2


def test_train_label_out_of_range(toy):
    (toy / "h1.tsv").write_text("root\ta\n")
    args = ["train", "--config", str(toy / "c.json"), "--features", str(toy / "f.csv"), "--hierarchy", str(toy / "h1.tsv"), "--out", str(toy / "r")]
    assert main(args) == 2


def test_train_diverging_run_exits_1(toy):
    # labels drawn independently of the features, so a huge step overshoots
    rng = np.random.default_rng(1)
    save_features(FeatureDataset(rng.normal(size=(40, 3)), rng.integers(0, 2, 40)), toy / "noise.csv")
    (toy / "hot.json").write_text(json.dumps({"loss": "sce", "base_lr": 1e4, "epochs": 5}))
    args = ["train", "--config", str(toy / "hot.json"), "--features", str(toy / "noise.csv"), "--hierarchy", str(toy / "h.tsv"), "--out", str(toy / "r")]
    assert main(args) == 1


def test_synth_then_train(tmp_path):
    d = tmp_path / "syn"
    assert main(["synth", "--branching", "3,2", "--dim", "4", "--samples-per-leaf", "5", "--out", str(d)]) == 0
    assert main(["validate", "--hierarchy", str(d / "hierarchy.tsv")]) == 0
    (tmp_path / "c.json").write_text(json.dumps({"loss": "hace", "scheme": "ancestral", "dilution": 0.5, "epochs": 3}))
    args = [
        "train", "--config", str(tmp_path / "c.json"), "--features", str(d / "train.bin"),
        "--test-features", str(d / "test.bin"), "--hierarchy", str(d / "hierarchy.tsv"),
        "--levels", "1,2", "--out", str(tmp_path / "run"),
    ]
    assert main(args) == 0
    assert (tmp_path / "run" / "report_per_class.csv").exists()


def _grid_config(tmp_path, dilutions):
    cfg = {
        "synthetic": {"branching": [2, 2], "dim": 4, "samples_per_leaf": 5},
        "dilutions": dilutions,
        "levels": [1],
        "base": {"epochs": 2, "batch_size": 8},
    }
    path = tmp_path / "grid.json"
    path.write_text(json.dumps(cfg))
    return path


@pytest.mark.parametrize("dilutions, runs", [([0.2, 0.5, 0.7], 10), ([0.5], 4)])
def test_grid_run_count(tmp_path, dilutions, runs):
    out = tmp_path / "g"
    assert main(["grid", "--config", str(_grid_config(tmp_path, dilutions)), "--out", str(out), "--jobs", "2"]) == 0
    dirs = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(dirs) == runs == 3 * len(dilutions) + 1
    summary = json.loads((out / "summary.json").read_text())
    assert sorted(r["name"] for r in summary["runs"]) == dirs
    assert len(summary["runs"]) == runs


def test_grid_is_reproducible(tmp_path):
    cfg = _grid_config(tmp_path, [0.5])
    assert main(["grid", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["grid", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "4"]) == 0
    assert (tmp_path / "a" / "summary.json").read_bytes() == (tmp_path / "b" / "summary.json").read_bytes()


def test_grid_with_feature_files(tmp_path):
    d = tmp_path / "syn"
    main(["synth", "--branching", "2,2", "--dim", "4", "--samples-per-leaf", "4", "--format", "csv", "--out", str(d)])
    cfg = {"hierarchy": "syn/hierarchy.tsv", "features": "syn/train.csv", "test_features": "syn/test.csv", "dilutions": [0.5], "base": {"epochs": 1}}
    (tmp_path / "grid.json").write_text(json.dumps(cfg))
    assert main(["grid", "--config", str(tmp_path / "grid.json"), "--out", str(tmp_path / "g")]) == 0


@pytest.mark.parametrize("patch", [{"dilutions": []}, {"dilutions": [0.5, 0.5]}, {"bogus": 1}, {"levels": [3]}])
def test_grid_usage_errors(tmp_path, patch):
    path = _grid_config(tmp_path, [0.5])
    cfg = {**json.loads(path.read_text()), **patch}
    path.write_text(json.dumps(cfg))
    assert main(["grid", "--config", str(path), "--out", str(tmp_path / "g")]) == 2


def test_eval_perfect_dump(tmp_path):
    h = str(DATA / "cifar100.tsv")
    save_dump(PredictionDump(np.eye(100), np.arange(100)), tmp_path / "d.csv")
    out = tmp_path / "r.json"
    assert main(["eval", "--dump", str(tmp_path / "d.csv"), "--hierarchy", h, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["top1"] == report["top5"] == 100.0


def test_eval_family_level_table(tmp_path):
    h = str(DATA / "fgvc_shaped.tsv")
    rng = np.random.default_rng(0)
    save_dump(PredictionDump(rng.dirichlet(np.ones(102), 50), rng.integers(0, 102, 50)), tmp_path / "d.csv")
    out = tmp_path / "r.json"
    assert main(["eval", "--dump", str(tmp_path / "d.csv"), "--hierarchy", h, "--levels", "2", "--seed", "1", "--out", str(out)]) == 0
    rows = (tmp_path / "r_per_class.csv").read_text().splitlines()
    assert rows[0] == "node_id,level,accuracy,support" and len(rows) == 71
    assert main(["eval", "--dump", str(tmp_path / "d.csv"), "--hierarchy", h, "--levels", "7", "--out", str(out)]) == 2


def test_eval_is_idempotent(tmp_path):
    h = str(DATA / "cifar100.tsv")
    rng = np.random.default_rng(1)
    save_dump(PredictionDump(rng.dirichlet(np.ones(100), 20), rng.integers(0, 100, 20)), tmp_path / "d.csv")
    for name in ("a.json", "b.json"):
        main(["eval", "--dump", str(tmp_path / "d.csv"), "--hierarchy", h, "--levels", "1", "--out", str(tmp_path / name)])
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_bad_flag_value_exits_2():
    with pytest.raises(SystemExit) as err:
        main(["synth", "--branching", "x,y", "--out", "nowhere"])
    assert err.value.code == 2
