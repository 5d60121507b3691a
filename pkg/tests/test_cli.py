"""Command-line interface: artifacts, record hashing, error handling."""

import json
from pathlib import Path

import numpy as np
import pytest

from m2hgcl.cli import _parse_grid, derive_seeds, main
from m2hgcl.data import load_embeddings


@pytest.fixture
def dataset_dir(tmp_path):
    code = main(["synth", "--out", str(tmp_path / "ds"), "--name", "toy",
                 "--n-target", "24", "--classes", "2", "--aux-sizes", "8,6",
                 "--p-in", "0.4", "--p-out", "0.05", "--seed", "3"])
    assert code == 0
    return tmp_path / "ds" / "manifest.json"


@pytest.fixture
def quick_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"hidden_dim": 4, "attn_dim": 3, "epochs": 3,
                                "patience": 50, "lr": 5e-3}))
    return path


def test_grid_parsing():
    assert _parse_grid("0.1:0.9:0.1") == pytest.approx(
        [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    assert _parse_grid("0.5:0.5:0.1") == [0.5]
    with pytest.raises(ValueError):
        _parse_grid("0.9:0.1:0.1")


def test_derive_seeds_fixed_scheme():
    assert derive_seeds(0, 3) == derive_seeds(0, 3)
    assert derive_seeds(0, 3) != derive_seeds(1, 3)
    assert len(set(derive_seeds(5, 8))) == 8


def test_synth_writes_loadable_dataset(dataset_dir):
    from m2hgcl.data import load_dataset
    graph, labels, paths = load_dataset(dataset_dir)
    assert graph.n_target == 24
    assert [p.name for p in paths] == ["TAT", "TBT"]


def test_train_writes_artifacts_and_deterministic_hash(dataset_dir, quick_config, tmp_path, capsys):
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    for out in (out1, out2):
        code = main(["train", "--manifest", str(dataset_dir), "--config",
                     str(quick_config), "--out", str(out), "--seed", "7"])
        assert code == 0
    for name in ("embeddings.bin", "params.npz", "run_record.json"):
        assert (out1 / name).exists()

    r1 = json.loads((out1 / "run_record.json").read_text())
    r2 = json.loads((out2 / "run_record.json").read_text())
    assert r1["record_hash"] == r2["record_hash"]
    assert r1["config"]["seed"] == 7
    assert len(r1["loss_curve"]) == 3
    z = load_embeddings(out1 / "embeddings.bin")
    assert z.shape == (24, 8)

    params = np.load(out1 / "params.npz")
    assert "disc_w" in params


def test_variant_flag_is_recorded(dataset_dir, quick_config, tmp_path):
    out = tmp_path / "runv"
    code = main(["train", "--manifest", str(dataset_dir), "--config", str(quick_config),
                 "--out", str(out), "--variant", "wo_expanded"])
    assert code == 0
    record = json.loads((out / "run_record.json").read_text())
    assert record["config"]["variant"] == "wo_expanded"
    z = load_embeddings(out / "embeddings.bin")
    assert z.shape == (24, 8)


def test_missing_manifest_fails_without_partial_outputs(tmp_path, capsys):
    out = tmp_path / "never"
    code = main(["train", "--manifest", str(tmp_path / "missing.json"),
                 "--out", str(out)])
    assert code == 1
    assert "manifest not found" in capsys.readouterr().err
    assert not out.exists()


def test_eval_classify_and_cluster(dataset_dir, quick_config, tmp_path, capsys):
    out = tmp_path / "run"
    main(["train", "--manifest", str(dataset_dir), "--config", str(quick_config),
          "--out", str(out)])
    labels = dataset_dir.parent / "labels.tsv"

    code = main(["eval", "classify", "--embeddings", str(out / "embeddings.bin"),
                 "--labels", str(labels), "--split", "0.4", "--seeds", "2",
                 "--out", str(tmp_path / "report.json")])
    assert code == 0
    printed = capsys.readouterr().out
    assert "macro_f1" in printed and "one-vs-rest" in printed
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report) == {"macro_f1", "micro_f1", "auc"}
    assert report["macro_f1"]["runs"] == 2

    code = main(["eval", "cluster", "--embeddings", str(out / "embeddings.bin"),
                 "--labels", str(labels), "--seeds", "2"])
    assert code == 0
    assert "nmi" in capsys.readouterr().out


def test_eval_single_class_labels_fails(dataset_dir, quick_config, tmp_path, capsys):
    out = tmp_path / "run"
    main(["train", "--manifest", str(dataset_dir), "--config", str(quick_config),
          "--out", str(out)])
    single = tmp_path / "single.tsv"
    single.write_text("".join(f"{i}\t0\n" for i in range(24)))
    code = main(["eval", "classify", "--embeddings", str(out / "embeddings.bin"),
                 "--labels", str(single), "--seeds", "1"])
    assert code == 1
    assert "at least 2 classes" in capsys.readouterr().err


def test_expand_prints_expansion_and_edge_counts(dataset_dir, capsys):
    code = main(["expand", "--manifest", str(dataset_dir), "--metapath", "TAT"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "TAT expands to TATAT" in printed

    from m2hgcl.data import load_dataset
    from m2hgcl.metapath import expanded_adjacency, metapath_adjacency
    graph, _, paths = load_dataset(dataset_dir)
    path = [p for p in paths if p.name == "TAT"][0]
    assert f"initial subgraph edges:  {metapath_adjacency(graph, path).edge_count}" in printed
    assert f"expanded subgraph edges: {expanded_adjacency(graph, path).edge_count}" in printed

    code = main(["expand", "--manifest", str(dataset_dir), "--metapath", "nope"])
    assert code == 1


def test_sweep_emits_sorted_summary(dataset_dir, quick_config, tmp_path, monkeypatch):
    monkeypatch.setenv("M2HGCL_THREADS", "1")
    out = tmp_path / "sweep"
    code = main(["sweep", "--param", "tau", "--grid", "0.3:0.5:0.2",
                 "--manifest", str(dataset_dir), "--config", str(quick_config),
                 "--out", str(out), "--seeds", "1", "--split", "0.4"])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [row["tau"] for row in summary] == [0.3, 0.5]
    assert all("macro_f1_mean" in row for row in summary)
    assert len(list(out.glob("run_tau_*.json"))) == 2


def test_sweep_parallel_workers_match_serial(dataset_dir, quick_config, tmp_path, monkeypatch):
    out_serial = tmp_path / "serial"
    out_parallel = tmp_path / "parallel"
    monkeypatch.setenv("M2HGCL_THREADS", "1")
    main(["sweep", "--param", "alpha", "--grid", "0.2:0.4:0.2", "--manifest",
          str(dataset_dir), "--config", str(quick_config), "--out", str(out_serial),
          "--seeds", "1"])
    monkeypatch.setenv("M2HGCL_THREADS", "2")
    main(["sweep", "--param", "alpha", "--grid", "0.2:0.4:0.2", "--manifest",
          str(dataset_dir), "--config", str(quick_config), "--out", str(out_parallel),
          "--seeds", "1"])
    s1 = json.loads((out_serial / "summary.json").read_text())
    s2 = json.loads((out_parallel / "summary.json").read_text())
    assert s1 == s2


def test_ablate_emits_six_variant_rows(dataset_dir, quick_config, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("M2HGCL_THREADS", "1")
    out = tmp_path / "ablate"
    code = main(["ablate", "--manifest", str(dataset_dir), "--config",
                 str(quick_config), "--out", str(out), "--seeds", "1"])
    assert code == 0
    summary = json.loads((out / "summary.json").read_text())
    assert [row["variant"] for row in summary] == [
        "full", "wo_expanded", "wo_direct", "wo_global", "wo_local", "wo_psamp"]
    printed = capsys.readouterr().out
    assert printed.count("macro_f1=") == 6
