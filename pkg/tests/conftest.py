"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from m2hgcl.autodiff import Tensor
from m2hgcl.hin import HeteroGraph, relation_from_edges
from m2hgcl.metapath import MetaPath, build_metapath, step_matrix


# ---------------------------------------------------------------------------
# finite-difference oracle

def numeric_grad(f, tensors: list[Tensor], h: float = 1e-5) -> list[np.ndarray]:
    """Central-difference gradients of the scalar f() wrt each tensor."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.values)
        flat_vals = t.values.ravel()
        flat_grad = g.ravel()
        for i in range(flat_vals.size):
            orig = flat_vals[i]
            flat_vals[i] = orig + h
            hi = float(f().values[0, 0])
            flat_vals[i] = orig - h
            lo = float(f().values[0, 0])
            flat_vals[i] = orig
            flat_grad[i] = (hi - lo) / (2 * h)
        grads.append(g)
    return grads


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """|a - n| / max(1, |a|, |n|), elementwise maximum."""
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    return float((np.abs(analytic - numeric) / scale).max())


def assert_grads_match(f, tensors: list[Tensor], tol: float = 1e-4):
    """Backward pass through f() must agree with finite differences."""
    for t in tensors:
        t.zero_grad()
    f().backward()
    numeric = numeric_grad(f, tensors)
    for t, n in zip(tensors, numeric):
        assert t.grad is not None, "parameter missing a gradient"
        err = max_rel_error(t.grad, n)
        assert err < tol, f"gradient mismatch: rel error {err:.3e}"


# ---------------------------------------------------------------------------
# graph builders

def fig_style_movie_graph() -> tuple[HeteroGraph, dict[str, MetaPath]]:
    """Toy movie HIN: 3 movies, 3 actors, 1 director, 1 writer.

    All movies share the one director, so MDM connects every movie pair;
    movie 2 has actor edges to actors 0 and 2.
    """
    rng = np.random.default_rng(7)
    features = [rng.normal(size=(3, 4)), rng.normal(size=(3, 3)),
                rng.normal(size=(1, 2)), rng.normal(size=(1, 2))]
    ma = relation_from_edges("MA", 0, 1, [(0, 0), (1, 1), (2, 0), (2, 2)], (3, 3))
    md = relation_from_edges("MD", 0, 2, [(0, 0), (1, 0), (2, 0)], (3, 1))
    mw = relation_from_edges("MW", 0, 3, [(0, 0), (2, 0)], (3, 1))
    graph = HeteroGraph(["movie", "actor", "director", "writer"],
                        features, [ma, md, mw], target_type=0)
    paths = {
        "MAM": build_metapath(graph, "MAM", [(0, True), (0, False)]),
        "MDM": build_metapath(graph, "MDM", [(1, True), (1, False)]),
        "MWM": build_metapath(graph, "MWM", [(2, True), (2, False)]),
    }
    return graph, paths


def random_hin(rng: np.random.Generator, n_target: int = 20, n_aux_types: int = 2,
               max_aux: int = 15, edge_prob: float = 0.15,
               feature_dim: int = 3) -> tuple[HeteroGraph, list[MetaPath]]:
    """Random target-aux bipartite HIN with one 2-hop meta-path per aux type."""
    type_names = ["target"] + [f"aux{k}" for k in range(n_aux_types)]
    features = [rng.normal(size=(n_target, feature_dim))]
    relations = []
    for k in range(n_aux_types):
        size = int(rng.integers(2, max_aux + 1))
        features.append(rng.normal(size=(size, feature_dim)))
        dense = rng.random((n_target, size)) < edge_prob
        relations.append(relation_from_edges(
            f"r{k}", 0, k + 1, np.argwhere(dense), (n_target, size)))
    graph = HeteroGraph(type_names, features, relations, target_type=0)
    paths = [build_metapath(graph, f"P{k}", [(k, True), (k, False)])
             for k in range(n_aux_types)]
    return graph, paths


def tiny_synthetic(seed: int = 0, n_target: int = 12):
    """Small planted-partition HIN used by the gradient and wiring tests."""
    from m2hgcl.data import SyntheticSpec, generate_synthetic
    spec = SyntheticSpec(n_target=n_target, classes=2, aux_sizes=(6, 5),
                         p_in=0.5, p_out=0.1, feature_noise=0.2, seed=seed)
    return generate_synthetic(spec)


# ---------------------------------------------------------------------------
# path-enumeration oracle

def enumerate_path_adjacency(graph: HeteroGraph, path: MetaPath) -> np.ndarray:
    """Exhaustive instance enumeration: walk every concrete node sequence."""
    mats = [np.asarray(step_matrix(graph, r, f).todense()) for r, f in path.steps]
    n = graph.n_target
    adj = np.zeros((n, n), dtype=np.int8)
    for start in range(n):
        frontiers = [[start]]
        for mat in mats:
            frontiers = [seq + [int(j)] for seq in frontiers
                         for j in np.flatnonzero(mat[seq[-1]])]
        for seq in frontiers:
            if seq[-1] != start:
                adj[start, seq[-1]] = 1
    return adj


@pytest.fixture
def movie_graph():
    return fig_style_movie_graph()
