"""On-disk formats, manifest loading, the synthetic generator, persistence."""

import json
from pathlib import Path

import numpy as np
import pytest

from m2hgcl.data import (DatasetManifest, SyntheticSpec, generate_synthetic,
                         load_dataset, load_embeddings, read_feature_file,
                         save_embeddings, write_dataset, write_feature_bin,
                         write_feature_txt)
from m2hgcl.hin import validate
from m2hgcl.metapath import metapath_adjacency


# ---------------------------------------------------------------------------
# synthetic generator

def test_generator_is_deterministic():
    spec = SyntheticSpec(n_target=40, classes=3, aux_sizes=(15, 10), seed=9)
    g1, l1, p1 = generate_synthetic(spec)
    g2, l2, p2 = generate_synthetic(spec)
    np.testing.assert_array_equal(l1, l2)
    for a, b in zip(g1.features, g2.features):
        np.testing.assert_array_equal(a, b)
    for ra, rb in zip(g1.relations, g2.relations):
        assert (ra.adj != rb.adj).nnz == 0
    assert [p.name for p in p1] == [p.name for p in p2]


def test_generator_output_always_validates():
    for seed in range(5):
        graph, labels, paths = generate_synthetic(
            SyntheticSpec(n_target=30, classes=2, aux_sizes=(8,), seed=seed))
        assert validate(graph) == []
        assert len(paths) == 1
        assert labels.shape == (30,)


def test_two_aux_types_yield_two_metapaths():
    _, _, paths = generate_synthetic(SyntheticSpec(n_target=20, aux_sizes=(6, 6)))
    assert [p.name for p in paths] == ["TAT", "TBT"]


def test_pure_blocks_give_class_cliques():
    spec = SyntheticSpec(n_target=30, classes=3, aux_sizes=(9, 9),
                         p_in=0.9, p_out=0.0, feature_noise=0.0, seed=4)
    graph, labels, paths = generate_synthetic(spec)
    for path in paths:
        adj = np.asarray(metapath_adjacency(graph, path).adjacency.todense())
        rows, cols = np.nonzero(adj)
        assert (labels[rows] == labels[cols]).all()
        # any two targets sharing an aux neighbor must be connected
        first = np.asarray(graph.relations[path.steps[0][0]].adj.todense())
        shared = (first @ first.T) > 0
        np.fill_diagonal(shared, False)
        np.testing.assert_array_equal(adj > 0, shared)


def test_class_signal_monotone_in_probability_gap():
    def within_class_fraction(p_in, seed):
        spec = SyntheticSpec(n_target=60, classes=3, aux_sizes=(20, 20),
                             p_in=p_in, p_out=0.01, feature_noise=0.1, seed=seed)
        graph, labels, paths = generate_synthetic(spec)
        fractions = []
        for path in paths:
            adj = np.asarray(metapath_adjacency(graph, path).adjacency.todense())
            rows, cols = np.nonzero(adj)
            if rows.size:
                fractions.append((labels[rows] == labels[cols]).mean())
        return np.mean(fractions)

    means = []
    for p_in in (0.03, 0.08, 0.2):
        means.append(np.mean([within_class_fraction(p_in, seed) for seed in range(5)]))
    assert means[0] <= means[1] <= means[2]


def test_spec_validation():
    with pytest.raises(ValueError, match="p_in > p_out"):
        SyntheticSpec(p_in=0.01, p_out=0.01)
    with pytest.raises(ValueError, match="2 classes"):
        SyntheticSpec(classes=1)


# ---------------------------------------------------------------------------
# feature and embedding files

def test_feature_txt_round_trip_is_exact(tmp_path):
    values = np.random.default_rng(0).normal(size=(7, 3))
    write_feature_txt(tmp_path / "f.txt", values)
    np.testing.assert_array_equal(read_feature_file(tmp_path / "f.txt"), values)


def test_feature_bin_round_trip(tmp_path):
    values = np.random.default_rng(1).normal(size=(5, 4)).astype(np.float32)
    write_feature_bin(tmp_path / "f.bin", values)
    got = read_feature_file(tmp_path / "f.bin")
    np.testing.assert_array_equal(got.astype(np.float32), values)


def test_feature_header_mismatch_is_rejected(tmp_path):
    path = tmp_path / "f.txt"
    path.write_text("3 2\n1 2\n3 4\n")  # header claims 3 rows, body has 2
    with pytest.raises(ValueError, match="header says"):
        read_feature_file(path)


def test_bin_size_mismatch_is_rejected(tmp_path):
    path = tmp_path / "f.bin"
    good = np.ones((2, 2), dtype=np.float32)
    write_feature_bin(path, good)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(ValueError, match="expected"):
        read_feature_file(path)


def test_embeddings_round_trip_identity(tmp_path):
    z = np.random.default_rng(2).normal(size=(11, 6)).astype(np.float32)
    save_embeddings(z, tmp_path / "z.bin")
    np.testing.assert_array_equal(load_embeddings(tmp_path / "z.bin"), z)


def test_large_embedding_round_trip_checksum(tmp_path):
    import hashlib
    z = np.random.default_rng(3).normal(size=(4019, 256)).astype(np.float32)
    save_embeddings(z, tmp_path / "z.bin")
    reloaded = load_embeddings(tmp_path / "z.bin")
    save_embeddings(reloaded, tmp_path / "z2.bin")
    h1 = hashlib.sha256((tmp_path / "z.bin").read_bytes()).hexdigest()
    h2 = hashlib.sha256((tmp_path / "z2.bin").read_bytes()).hexdigest()
    assert h1 == h2
    np.testing.assert_array_equal(reloaded, z)


# ---------------------------------------------------------------------------
# datasets on disk

@pytest.fixture
def disk_dataset(tmp_path):
    spec = SyntheticSpec(n_target=25, classes=2, aux_sizes=(8, 6),
                         p_in=0.4, p_out=0.05, seed=6)
    graph, labels, paths = generate_synthetic(spec)
    manifest = write_dataset(tmp_path / "ds", "toy", graph, labels, paths)
    return manifest, graph, labels, paths


def test_dataset_round_trip(disk_dataset):
    manifest, graph, labels, paths = disk_dataset
    loaded_graph, loaded_labels, loaded_paths = load_dataset(manifest)
    assert loaded_graph.type_names == graph.type_names
    assert loaded_graph.target_type == graph.target_type
    np.testing.assert_array_equal(loaded_labels, labels)
    for a, b in zip(loaded_graph.features, graph.features):
        np.testing.assert_array_equal(a, b)
    for ra, rb in zip(loaded_graph.relations, graph.relations):
        assert (ra.adj != rb.adj).nnz == 0
    assert [p.name for p in loaded_paths] == [p.name for p in paths]
    assert [p.steps for p in loaded_paths] == [p.steps for p in paths]
    assert validate(loaded_graph) == []


def test_missing_manifest_is_reported():
    with pytest.raises(FileNotFoundError, match="manifest not found"):
        load_dataset("/nonexistent/manifest.json")


def test_missing_referenced_file_is_reported(disk_dataset, tmp_path):
    manifest, *_ = disk_dataset
    (manifest.parent / "T_features.txt").unlink()
    with pytest.raises(FileNotFoundError, match="missing file"):
        load_dataset(manifest)


def test_corrupt_edge_index_names_file_and_line(disk_dataset):
    manifest, graph, *_ = disk_dataset
    edge_file = manifest.parent / "TA_edges.tsv"
    lines = edge_file.read_text().splitlines()
    lines[2] = "0\t9999"
    edge_file.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match=r"TA_edges\.tsv:3"):
        load_dataset(manifest)


def test_malformed_edge_line_names_file_and_line(disk_dataset):
    manifest, *_ = disk_dataset
    edge_file = manifest.parent / "TB_edges.tsv"
    lines = edge_file.read_text().splitlines()
    lines[0] = "not numbers"
    edge_file.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match=r"TB_edges\.tsv:1"):
        load_dataset(manifest)


def test_label_range_mismatch_is_rejected(disk_dataset):
    manifest, *_ = disk_dataset
    raw = json.loads(Path(manifest).read_text())
    raw["num_classes"] = 5
    Path(manifest).write_text(json.dumps(raw))
    with pytest.raises(ValueError, match="manifest declares"):
        load_dataset(manifest)


def test_manifest_missing_keys_rejected(tmp_path):
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"name": "x"}))
    with pytest.raises(ValueError, match="missing keys"):
        DatasetManifest.load(path)


def test_feature_dim_mismatch_is_rejected(disk_dataset):
    manifest, *_ = disk_dataset
    raw = json.loads(Path(manifest).read_text())
    raw["node_types"][0]["feature_dim"] = 99
    Path(manifest).write_text(json.dumps(raw))
    with pytest.raises(ValueError, match="manifest declares"):
        load_dataset(manifest)
