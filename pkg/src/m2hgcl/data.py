"""Dataset loading, the on-disk formats, embedding persistence, and the
synthetic planted-partition generator.

On-disk layout (all paths relative to the manifest's directory):
  manifest      JSON: name, node_types [{name, count, feature_file,
                feature_dim}], relations [{name, src, dst, edge_file}],
                target_type, labels_file, metapaths (relation-name
                sequences; prefix "~" forces the reverse orientation),
                num_classes.
  edge files    TSV, two 0-based integer columns "src<TAB>dst", no header.
  features      .txt: "rows cols" header then space-separated decimals, or
                .bin: two little-endian uint32 (rows, cols) then row-major
                little-endian float32.
  labels        TSV "node_index<TAB>class_id".
  embeddings    same .bin float32 format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hin import HeteroGraph, Relation, relation_from_edges, require_valid
from .metapath import MetaPath, build_metapath

_AUX_LETTERS = "ABCDEFGHIJKLMNOPQRSUVWXYZ"  # no T, reserved for the target type


# ---------------------------------------------------------------------------
# low-level file formats

def read_edge_file(path: Path) -> np.ndarray:
    edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'src<TAB>dst', got {line!r}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer edge endpoint {line!r}") from None
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def write_edge_file(path: Path, adj) -> None:
    coo = adj.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in order:
            fh.write(f"{coo.row[i]}\t{coo.col[i]}\n")


def read_feature_file(path: Path) -> np.ndarray:
    if path.suffix == ".txt":
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().split()
            if len(header) != 2:
                raise ValueError(f"{path}:1: expected 'rows cols' header")
            rows, cols = int(header[0]), int(header[1])
            data = np.loadtxt(fh, dtype=np.float64, ndmin=2)
        if data.size == 0:
            data = data.reshape(0, cols)
        if data.shape != (rows, cols):
            raise ValueError(f"{path}: header says {(rows, cols)}, body is {data.shape}")
        return data
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) < 8:
            raise ValueError(f"{path}: truncated binary header")
        rows, cols = np.frombuffer(raw[:8], dtype="<u4")
        expected = 8 + 4 * int(rows) * int(cols)
        if len(raw) != expected:
            raise ValueError(f"{path}: expected {expected} bytes for {rows}x{cols}, got {len(raw)}")
        values = np.frombuffer(raw[8:], dtype="<f4").reshape(int(rows), int(cols))
        return values.astype(np.float64)
    raise ValueError(f"{path}: unknown feature extension (use .txt or .bin)")


def write_feature_txt(path: Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{values.shape[0]} {values.shape[1]}\n")
        for row in values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def write_feature_bin(path: Path, values: np.ndarray) -> None:
    values = np.asarray(values)
    header = np.asarray(values.shape, dtype="<u4").tobytes()
    path.write_bytes(header + values.astype("<f4").tobytes())


def save_embeddings(values: np.ndarray, path) -> None:
    """Persist an embedding matrix as the float32 binary format."""
    write_feature_bin(Path(path), values)


def load_embeddings(path) -> np.ndarray:
    """Load a float32 binary embedding matrix (returned as float32)."""
    path = Path(path)
    if path.suffix != ".bin":
        raise ValueError(f"{path}: embeddings use the .bin format")
    return read_feature_file(path).astype(np.float32)


def read_labels_file(path: Path, n_nodes: int) -> np.ndarray:
    labels = np.full(n_nodes, -1, dtype=np.int64)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'node<TAB>class', got {line!r}")
            try:
                node, cls = int(parts[0]), int(parts[1])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer label entry {line!r}") from None
            if not (0 <= node < n_nodes):
                raise ValueError(f"{path}:{lineno}: node index {node} out of range (n={n_nodes})")
            if cls < 0:
                raise ValueError(f"{path}:{lineno}: negative class id {cls}")
            labels[node] = cls
    return labels


def write_labels_file(path: Path, labels: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for node, cls in enumerate(labels):
            if cls >= 0:
                fh.write(f"{node}\t{cls}\n")


# ---------------------------------------------------------------------------
# manifests

@dataclass
class DatasetManifest:
    name: str
    node_types: list[dict]
    relations: list[dict]
    target_type: str
    labels_file: str
    metapaths: list[list[str]]
    num_classes: int
    base_dir: Path = field(default_factory=Path)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"manifest not found: {path}")
        raw = json.loads(path.read_text(encoding="utf-8"))
        required = ["name", "node_types", "relations", "target_type",
                    "labels_file", "metapaths", "num_classes"]
        missing = [k for k in required if k not in raw]
        if missing:
            raise ValueError(f"{path}: manifest missing keys {missing}")
        return cls(base_dir=path.parent, **{k: raw[k] for k in required})

    def resolve(self, rel_path: str) -> Path:
        out = self.base_dir / rel_path
        if not out.exists():
            raise FileNotFoundError(f"manifest references missing file: {out}")
        return out


def _metapath_name(type_names: list[str], seq: list[int]) -> str:
    initials = [type_names[t][:1].upper() for t in seq]
    if len(set(n[:1].upper() for n in type_names)) < len(type_names):
        return "-".join(type_names[t] for t in seq)
    return "".join(initials)


def _resolve_metapath(graph: HeteroGraph, rel_names: list[str]) -> MetaPath:
    """Turn a relation-name sequence into typed steps, inferring orientation."""
    steps: list[tuple[int, bool]] = []
    current = graph.target_type
    for token in rel_names:
        forced_reverse = token.startswith("~")
        rel_name = token[1:] if forced_reverse else token
        rid = graph.relation_by_name(rel_name)
        rel = graph.relations[rid]
        if forced_reverse:
            forward = False
        elif rel.src_type == current and rel.dst_type == current:
            raise ValueError(
                f"relation {rel_name!r} is ambiguous (self-typed); prefix '~' to reverse it")
        elif rel.src_type == current:
            forward = True
        elif rel.dst_type == current:
            forward = False
        else:
            raise ValueError(
                f"relation {rel_name!r} does not touch type "
                f"{graph.type_names[current]!r} in meta-path {rel_names}")
        steps.append((rid, forward))
        current = rel.dst_type if forward else rel.src_type
    seq = [graph.target_type] + [
        (graph.relations[r].dst_type if f else graph.relations[r].src_type)
        for r, f in steps]
    return build_metapath(graph, _metapath_name(graph.type_names, seq), steps)


def load_dataset(manifest_path) -> tuple[HeteroGraph, np.ndarray, list[MetaPath]]:
    """Load and validate a dataset; labels are aligned to target-type indices."""
    manifest = DatasetManifest.load(manifest_path)
    type_ids = {nt["name"]: i for i, nt in enumerate(manifest.node_types)}
    type_names = [nt["name"] for nt in manifest.node_types]

    features = []
    for nt in manifest.node_types:
        values = read_feature_file(manifest.resolve(nt["feature_file"]))
        if values.shape != (nt["count"], nt["feature_dim"]):
            raise ValueError(
                f"node type {nt['name']!r}: feature file is {values.shape}, "
                f"manifest declares {(nt['count'], nt['feature_dim'])}")
        features.append(values)

    relations = []
    for spec in manifest.relations:
        src, dst = type_ids[spec["src"]], type_ids[spec["dst"]]
        edge_path = manifest.resolve(spec["edge_file"])
        edges = read_edge_file(edge_path)
        shape = (features[src].shape[0], features[dst].shape[0])
        if edges.size:
            bad = (edges[:, 0] < 0) | (edges[:, 0] >= shape[0]) | \
                  (edges[:, 1] < 0) | (edges[:, 1] >= shape[1])
            if bad.any():
                lineno = int(np.flatnonzero(bad)[0]) + 1
                raise ValueError(
                    f"{edge_path}:{lineno}: edge {tuple(edges[np.flatnonzero(bad)[0]])} "
                    f"out of range for shape {shape}")
        relations.append(relation_from_edges(spec["name"], src, dst, edges, shape))

    if manifest.target_type not in type_ids:
        raise ValueError(f"unknown target type {manifest.target_type!r}")
    graph = HeteroGraph(type_names, features, relations, type_ids[manifest.target_type])
    require_valid(graph)

    labels = read_labels_file(manifest.resolve(manifest.labels_file), graph.n_target)
    observed = labels[labels >= 0]
    if observed.size and observed.max() + 1 != manifest.num_classes:
        raise ValueError(
            f"labels span {observed.max() + 1} classes, manifest declares "
            f"{manifest.num_classes}")
    paths = [_resolve_metapath(graph, seq) for seq in manifest.metapaths]
    return graph, labels, paths


# ---------------------------------------------------------------------------
# synthetic planted-partition generator

@dataclass
class SyntheticSpec:
    """Planted-partition HIN: class-aligned target-aux edge blocks.

    Default auxiliary types are deliberately small (a tenth of the target
    count, at least ten nodes per class) so direct neighborhoods stay sparse
    and the benchmark is not solvable by feature geometry alone.
    """

    n_target: int = 300
    classes: int = 3
    aux_sizes: tuple[int, ...] | None = None
    p_in: float = 0.05
    p_out: float = 0.002
    feature_noise: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if self.classes < 2:
            raise ValueError("need at least 2 classes")
        if not (self.p_in > self.p_out >= 0):
            raise ValueError("planted partition requires p_in > p_out >= 0")
        if self.n_target < self.classes:
            raise ValueError("need at least one target node per class")
        if self.aux_sizes is None:
            size = max(10 * self.classes, self.n_target // 10)
            self.aux_sizes = (size, size)
        if not self.aux_sizes:
            raise ValueError("need at least one auxiliary node type")


def _noisy_one_hot(blocks: np.ndarray, classes: int, sigma: float,
                   rng: np.random.Generator) -> np.ndarray:
    feats = np.eye(classes)[blocks]
    if sigma > 0:
        feats = feats + rng.normal(0.0, sigma, size=feats.shape)
    return feats


def generate_synthetic(spec: SyntheticSpec) -> tuple[HeteroGraph, np.ndarray, list[MetaPath]]:
    """Deterministic planted-partition HIN with one relation per auxiliary type."""
    rng = np.random.default_rng(spec.seed)
    labels = np.arange(spec.n_target) % spec.classes

    type_names = ["T"] + [_AUX_LETTERS[i] for i in range(len(spec.aux_sizes))]
    features = [_noisy_one_hot(labels, spec.classes, spec.feature_noise, rng)]
    relations: list[Relation] = []
    for aux_idx, size in enumerate(spec.aux_sizes):
        blocks = np.arange(size) % spec.classes
        features.append(_noisy_one_hot(blocks, spec.classes, spec.feature_noise, rng))
        probs = np.where(labels[:, None] == blocks[None, :], spec.p_in, spec.p_out)
        dense = rng.random((spec.n_target, size)) < probs
        edges = np.argwhere(dense)
        relations.append(relation_from_edges(
            f"T{type_names[aux_idx + 1]}", 0, aux_idx + 1, edges, (spec.n_target, size)))

    graph = HeteroGraph(type_names, features, relations, target_type=0)
    require_valid(graph)
    paths = [build_metapath(graph, f"T{type_names[i + 1]}T", [(i, True), (i, False)])
             for i in range(len(spec.aux_sizes))]
    return graph, labels, paths


def write_dataset(out_dir, name: str, graph: HeteroGraph, labels: np.ndarray,
                  paths: list[MetaPath]) -> Path:
    """Materialize a graph in the on-disk format; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    node_types = []
    for tid, tname in enumerate(graph.type_names):
        feature_file = f"{tname}_features.txt"
        write_feature_txt(out_dir / feature_file, graph.features[tid])
        node_types.append({"name": tname, "count": graph.node_count(tid),
                           "feature_file": feature_file,
                           "feature_dim": graph.features[tid].shape[1]})
    relations = []
    for rel in graph.relations:
        edge_file = f"{rel.name}_edges.tsv"
        write_edge_file(out_dir / edge_file, rel.adj)
        relations.append({"name": rel.name, "src": graph.type_names[rel.src_type],
                          "dst": graph.type_names[rel.dst_type], "edge_file": edge_file})
    write_labels_file(out_dir / "labels.tsv", labels)
    observed = labels[labels >= 0]
    manifest = {
        "name": name,
        "node_types": node_types,
        "relations": relations,
        "target_type": graph.type_names[graph.target_type],
        "labels_file": "labels.tsv",
        "metapaths": [[graph.relations[r].name if f else "~" + graph.relations[r].name
                       for r, f in path.steps] for path in paths],
        "num_classes": int(observed.max() + 1) if observed.size else 0,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest_path
