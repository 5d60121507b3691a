"""Meta-path machinery: subgraph adjacencies, 4-hop expansion, neighbor sets.

A meta-path is a type-compatible chain of directed relation steps that starts
and ends at the graph's target type. Its subgraph is the homogeneous graph
over target nodes whose (binary) edges mark the existence of at least one
path instance; self-connections are removed on both scales because any
symmetric meta-path trivially reaches its own anchor. Composition runs in the
boolean semiring over sparse matrices, so adjacencies are connectivity-only,
never path-count weighted.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .hin import HeteroGraph


class Scale(enum.Enum):
    INITIAL = "initial"
    EXPANDED = "expanded"


@dataclass(frozen=True)
class MetaPath:
    """A named chain of (relation id, forward?) steps between target nodes."""

    name: str
    steps: tuple[tuple[int, bool], ...]
    node_type_seq: tuple[int, ...]

    @property
    def n_hops(self) -> int:
        return len(self.steps)

    @property
    def is_initial(self) -> bool:
        return self.n_hops == 2


@dataclass
class MetaPathSubgraph:
    """Binary target-by-target adjacency materialized from one meta-path."""

    metapath: MetaPath
    adjacency: sp.csr_matrix
    scale: Scale

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz)


def build_metapath(graph: HeteroGraph, name: str,
                   steps: list[tuple[int, bool]]) -> MetaPath:
    """Resolve and type-check a step chain against ``graph``."""
    if not steps:
        raise ValueError(f"meta-path {name!r} has no steps")
    seq = [graph.target_type]
    for rel_id, forward in steps:
        if not (0 <= rel_id < graph.num_relations):
            raise ValueError(f"meta-path {name!r}: unknown relation id {rel_id}")
        rel = graph.relations[rel_id]
        src, dst = (rel.src_type, rel.dst_type) if forward else (rel.dst_type, rel.src_type)
        if seq[-1] != src:
            raise ValueError(
                f"meta-path {name!r}: step {rel.name!r} expects source type "
                f"{graph.type_names[src]!r} but chain is at {graph.type_names[seq[-1]]!r}")
        seq.append(dst)
    if seq[0] != graph.target_type or seq[-1] != graph.target_type:
        raise ValueError(f"meta-path {name!r} must start and end at the target type")
    return MetaPath(name, tuple((int(r), bool(f)) for r, f in steps), tuple(seq))


def _check_on_graph(graph: HeteroGraph, path: MetaPath) -> None:
    rebuilt = build_metapath(graph, path.name, list(path.steps))
    if rebuilt.node_type_seq != path.node_type_seq:
        raise ValueError(f"meta-path {path.name!r} is not valid on this graph")


def step_matrix(graph: HeteroGraph, rel_id: int, forward: bool) -> sp.csr_matrix:
    rel = graph.relations[rel_id]
    return rel.adj if forward else rel.adj.T.tocsr()


def _binarize(mat: sp.spmatrix) -> sp.csr_matrix:
    out = (mat > 0).astype(np.int8).tocsr()
    out.sort_indices()
    return out


def _zero_diagonal(mat: sp.csr_matrix) -> sp.csr_matrix:
    mat = mat.tolil()
    mat.setdiag(0)
    out = mat.tocsr()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def metapath_adjacency(graph: HeteroGraph, path: MetaPath) -> MetaPathSubgraph:
    """Boolean product of the step matrices, diagonal zeroed."""
    _check_on_graph(graph, path)
    product = step_matrix(graph, *path.steps[0]).astype(np.int64)
    for step in path.steps[1:]:
        product = product @ step_matrix(graph, *step).astype(np.int64)
    adj = _zero_diagonal(_binarize(product))
    return MetaPathSubgraph(path, adj, Scale.INITIAL)


def expand_metapath(path: MetaPath) -> MetaPath:
    """Self-compose a 2-hop meta-path into its 4-hop form (MAM -> MAMAM)."""
    if not path.is_initial:
        raise ValueError(f"only 2-hop meta-paths expand, got {path.n_hops}-hop {path.name!r}")
    return MetaPath(
        name=path.name + path.name[1:],
        steps=path.steps + path.steps,
        node_type_seq=path.node_type_seq + path.node_type_seq[1:],
    )


def expanded_adjacency(graph: HeteroGraph, path: MetaPath) -> MetaPathSubgraph:
    """4-hop adjacency of an initial meta-path.

    Composes (initial + identity) with itself before re-zeroing the diagonal:
    a genuine 4-hop instance may revisit the anchor mid-path, which the
    identity term keeps, while pure self-loops are dropped at the end. The
    result equals exhaustive 4-hop instance enumeration.
    """
    if not path.is_initial:
        raise ValueError(f"expanded adjacency needs a 2-hop meta-path, got {path.name!r}")
    initial = metapath_adjacency(graph, path).adjacency.astype(np.int64)
    hop = initial + sp.identity(initial.shape[0], dtype=np.int64, format="csr")
    adj = _zero_diagonal(_binarize(hop @ hop))
    return MetaPathSubgraph(expand_metapath(path), adj, Scale.EXPANDED)


def direct_neighbors(graph: HeteroGraph, path: MetaPath, target_node: int) -> list[int]:
    """One-hop neighbors along the path's first relation (non-target type)."""
    _check_on_graph(graph, path)
    if not (0 <= target_node < graph.n_target):
        raise ValueError(f"target node {target_node} out of range")
    first = step_matrix(graph, *path.steps[0])
    return sorted(set(first.getrow(target_node).indices.tolist()))


def metapath_neighbors(graph: HeteroGraph, path: MetaPath, target_node: int) -> list[int]:
    """Target nodes connected to ``target_node`` by at least one path instance."""
    if not (0 <= target_node < graph.n_target):
        raise ValueError(f"target node {target_node} out of range")
    adj = metapath_adjacency(graph, path).adjacency
    return sorted(set(adj.getrow(target_node).indices.tolist()))
