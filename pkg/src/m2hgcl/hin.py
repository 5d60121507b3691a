"""In-memory heterogeneous graph: typed node sets, typed relations, validation.

Node ids are per-type 0-based indices, so type membership is structural and
feature matrices / relation adjacencies index directly. Relations are stored
directed (sparse binary CSR) and exposed with a transpose view; undirected
data loads both directions. Graphs are immutable after construction by
convention and safe for concurrent reads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass
class Relation:
    """One typed edge set as a binary src-by-dst adjacency."""

    name: str
    src_type: int
    dst_type: int
    adj: sp.csr_matrix


@dataclass
class HeteroGraph:
    """Typed node sets with per-type features and typed relations.

    type_names: display names, index = node type id.
    features: per-type dense matrices, row i = features of node i.
    relations: index = relation id.
    target_type: the node type evaluated downstream.
    """

    type_names: list[str]
    features: list[np.ndarray]
    relations: list[Relation]
    target_type: int

    @property
    def num_types(self) -> int:
        return len(self.type_names)

    @property
    def num_relations(self) -> int:
        return len(self.relations)

    def node_count(self, node_type: int) -> int:
        return self.features[node_type].shape[0]

    @property
    def n_target(self) -> int:
        return self.node_count(self.target_type)

    def relation_by_name(self, name: str) -> int:
        for rid, rel in enumerate(self.relations):
            if rel.name == name:
                return rid
        raise KeyError(f"unknown relation {name!r}")


def relation_from_edges(name: str, src_type: int, dst_type: int,
                        edges: np.ndarray, shape: tuple[int, int]) -> Relation:
    """Build a binary relation from an (m, 2) edge array; multi-edges collapse."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        bad = (edges[:, 0] < 0) | (edges[:, 0] >= shape[0]) | \
              (edges[:, 1] < 0) | (edges[:, 1] >= shape[1])
        if bad.any():
            first = edges[np.flatnonzero(bad)[0]]
            raise ValueError(f"relation {name!r}: edge {tuple(first)} outside shape {shape}")
    data = np.ones(len(edges), dtype=np.int8)
    adj = sp.csr_matrix((data, (edges[:, 0], edges[:, 1])), shape=shape)
    adj.data[:] = 1  # duplicate edges summed by the constructor; collapse to binary
    adj.sort_indices()
    return Relation(name, src_type, dst_type, adj)


def validate(graph: HeteroGraph) -> list[str]:
    """Return the list of violated invariants; empty means valid."""
    problems: list[str] = []
    if graph.num_types + graph.num_relations <= 2:
        problems.append(
            f"heterogeneity requires |node types| + |relations| > 2, "
            f"got {graph.num_types} + {graph.num_relations}")
    if len(graph.features) != graph.num_types:
        problems.append(f"{len(graph.features)} feature matrices for {graph.num_types} node types")
    if not (0 <= graph.target_type < graph.num_types):
        problems.append(f"target type {graph.target_type} out of range")

    for tid, feats in enumerate(graph.features):
        if feats.ndim != 2:
            problems.append(f"type {graph.type_names[tid]!r}: features must be 2-D")
            continue
        if not np.isfinite(feats).all():
            problems.append(f"type {graph.type_names[tid]!r}: non-finite feature values")

    for rid, rel in enumerate(graph.relations):
        if not (0 <= rel.src_type < graph.num_types) or not (0 <= rel.dst_type < graph.num_types):
            problems.append(f"relation {rel.name!r}: endpoint type out of range")
            continue
        expected = (graph.node_count(rel.src_type), graph.node_count(rel.dst_type))
        if rel.adj.shape != expected:
            problems.append(
                f"relation {rel.name!r}: adjacency shape {rel.adj.shape} != {expected}")
            continue
        if rel.adj.nnz:
            if rel.adj.indices.size and (rel.adj.indices.min() < 0
                                         or rel.adj.indices.max() >= expected[1]):
                problems.append(f"relation {rel.name!r}: edge column index out of range")
            stripped = rel.adj.copy()
            stripped.eliminate_zeros()
            if stripped.nnz and not np.all(stripped.data == 1):
                problems.append(f"relation {rel.name!r}: adjacency is not binary")
    return problems


def require_valid(graph: HeteroGraph) -> None:
    problems = validate(graph)
    if problems:
        raise ValueError("invalid heterogeneous graph:\n  " + "\n  ".join(problems))


def neighbors(graph: HeteroGraph, relation: int, node: int) -> list[int]:
    """Sorted, duplicate-free destination indices of ``node`` under ``relation``."""
    if not (0 <= relation < graph.num_relations):
        raise ValueError(f"unknown relation id {relation}")
    rel = graph.relations[relation]
    if not (0 <= node < graph.node_count(rel.src_type)):
        raise ValueError(
            f"node {node} out of range for type {graph.type_names[rel.src_type]!r}")
    row = rel.adj.getrow(node)
    return sorted(set(row.indices.tolist()))
