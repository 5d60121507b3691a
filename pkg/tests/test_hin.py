"""Graph data model: validation cases and neighbor lookups."""

import numpy as np
import pytest

from m2hgcl.data import SyntheticSpec, generate_synthetic
from m2hgcl.hin import HeteroGraph, neighbors, relation_from_edges, validate

from conftest import fig_style_movie_graph, random_hin


def test_movie_toy_graph_is_valid():
    graph, _ = fig_style_movie_graph()
    assert validate(graph) == []


def test_single_type_single_relation_violates_heterogeneity():
    rel = relation_from_edges("self", 0, 0, [(0, 1)], (3, 3))
    graph = HeteroGraph(["only"], [np.zeros((3, 2))], [rel], target_type=0)
    problems = validate(graph)
    assert len(problems) == 1 and "heterogeneity" in problems[0]


def test_out_of_range_edge_is_rejected_at_construction():
    with pytest.raises(ValueError, match="outside shape"):
        relation_from_edges("r", 0, 1, [(5, 0)], (3, 4))


def test_validate_flags_shape_mismatch_and_nan_and_nonbinary():
    graph, _ = fig_style_movie_graph()

    bad_shape = HeteroGraph(graph.type_names, graph.features,
                            [graph.relations[0],
                             relation_from_edges("MD", 0, 2, [(0, 0)], (4, 1)),
                             graph.relations[2]], 0)
    assert any("shape" in p for p in validate(bad_shape))

    nan_feats = [f.copy() for f in graph.features]
    nan_feats[1][0, 0] = np.nan
    assert any("non-finite" in p for p in validate(
        HeteroGraph(graph.type_names, nan_feats, graph.relations, 0)))

    heavy = graph.relations[0].adj.copy().astype(np.int8)
    heavy.data[0] = 3
    from m2hgcl.hin import Relation
    nonbinary = HeteroGraph(graph.type_names, graph.features,
                            [Relation("MA", 0, 1, heavy)] + graph.relations[1:], 0)
    assert any("binary" in p for p in validate(nonbinary))


def test_multi_edges_collapse_to_binary():
    rel = relation_from_edges("r", 0, 1, [(0, 1), (0, 1), (0, 1)], (2, 3))
    assert rel.adj[0, 1] == 1
    assert rel.adj.nnz == 1


def test_generated_graphs_validate_and_mutations_fail():
    for seed in range(5):
        graph, _, _ = generate_synthetic(SyntheticSpec(
            n_target=40, classes=2, aux_sizes=(10, 8), seed=seed))
        assert validate(graph) == []


def test_neighbors_sorted_unique_and_stable(movie_graph):
    graph, _ = movie_graph
    first = neighbors(graph, 0, 2)
    assert first == [0, 2]                  # movie 2 -> actors 0 and 2
    assert neighbors(graph, 0, 2) == first  # stable across calls
    assert neighbors(graph, 1, 2) == [0]    # movie 2 -> the single director


def test_neighbors_isolated_and_full():
    rng = np.random.default_rng(3)
    graph, _ = random_hin(rng, n_target=10, n_aux_types=1, max_aux=6, edge_prob=0.0)
    assert neighbors(graph, 0, 4) == []

    n_aux = graph.node_count(1)
    full = relation_from_edges("r0", 0, 1,
                               [(0, j) for j in range(n_aux)], (10, n_aux))
    dense_graph = HeteroGraph(graph.type_names, graph.features, [full], 0)
    assert neighbors(dense_graph, 0, 0) == list(range(n_aux))


def test_neighbors_rejects_unknown_relation_or_node(movie_graph):
    graph, _ = movie_graph
    with pytest.raises(ValueError, match="unknown relation"):
        neighbors(graph, 9, 0)
    with pytest.raises(ValueError, match="out of range"):
        neighbors(graph, 0, 99)
