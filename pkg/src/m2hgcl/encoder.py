"""Forward pass: feature transform, direct-neighbor attention, GCN over both
meta-path scales, multi-scale fusion, concatenation, and semantic fusion.

Per meta-path view, a target node's representation concatenates (a) an
attention-weighted aggregate of its direct one-hop neighbors and (b) a learned
convex combination of 1-layer GCN encodings of the initial and expanded
meta-path subgraphs. A final semantic-level attention fuses all views into the
downstream embedding. Activations default to ELU; the attention logits use
LeakyReLU (slope 0.2). Both are configurable at the call sites that matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat_cols, glorot_init
from .hin import HeteroGraph
from .metapath import (MetaPath, MetaPathSubgraph, Scale, expanded_adjacency,
                       metapath_adjacency, step_matrix)


@dataclass
class ModelParams:
    """Every learnable tensor, with a deterministic registry for the optimizer.

    Row-vector convention throughout: features are rows, weights are stored
    (in_dim, out_dim), so a transform reads ``X @ W + b``.
    """

    feature_w: dict[int, Tensor]
    feature_b: dict[int, Tensor]
    attn_direct: dict[str, Tensor]                     # per path, (2d, 1)
    gcn_w: dict[tuple[str, Scale], Tensor]             # per (path, scale), (d, d)
    scale_w: Tensor | None                             # (d, d_a), shared across paths
    scale_b: Tensor | None                             # (1, d_a)
    scale_attn: Tensor | None                          # (d_a, 1)
    sem_w: Tensor                                      # (width, d_a)
    sem_b: Tensor                                      # (1, d_a)
    sem_attn: Tensor                                   # (d_a, 1)
    disc_w: Tensor                                     # (width, width)
    hidden_dim: int
    embed_width: int

    def registry(self) -> dict[str, Tensor]:
        """Name -> tensor, each learnable exactly once, stable order."""
        reg: dict[str, Tensor] = {}
        for tid in sorted(self.feature_w):
            reg[f"feature_w[{tid}]"] = self.feature_w[tid]
            reg[f"feature_b[{tid}]"] = self.feature_b[tid]
        for name in self.attn_direct:
            reg[f"attn_direct[{name}]"] = self.attn_direct[name]
        for (name, scale) in self.gcn_w:
            reg[f"gcn_w[{name},{scale.value}]"] = self.gcn_w[(name, scale)]
        if self.scale_w is not None:
            reg["scale_w"] = self.scale_w
            reg["scale_b"] = self.scale_b
            reg["scale_attn"] = self.scale_attn
        reg["sem_w"] = self.sem_w
        reg["sem_b"] = self.sem_b
        reg["sem_attn"] = self.sem_attn
        reg["disc_w"] = self.disc_w
        return reg

    def tensors(self) -> list[Tensor]:
        return list(self.registry().values())

    def zero_grads(self) -> None:
        for t in self.tensors():
            t.zero_grad()


def init_params(graph: HeteroGraph, paths: list[MetaPath], hidden_dim: int,
                attn_dim: int, rng: np.random.Generator, *,
                use_direct: bool = True, use_expanded: bool = True) -> ModelParams:
    """Glorot-initialize every parameter in a fixed, seed-stable order."""
    d = hidden_dim
    feature_w = {}
    feature_b = {}
    for tid in range(graph.num_types):
        feature_w[tid] = glorot_init((graph.features[tid].shape[1], d), rng)
        feature_b[tid] = glorot_init((1, d), rng)
    attn_direct = {}
    if use_direct:
        for path in paths:
            attn_direct[path.name] = glorot_init((2 * d, 1), rng)
    gcn_w = {}
    for path in paths:
        gcn_w[(path.name, Scale.INITIAL)] = glorot_init((d, d), rng)
        if use_expanded:
            gcn_w[(path.name, Scale.EXPANDED)] = glorot_init((d, d), rng)
    if use_expanded:
        scale_w = glorot_init((d, attn_dim), rng)
        scale_b = glorot_init((1, attn_dim), rng)
        scale_attn = glorot_init((attn_dim, 1), rng)
    else:
        scale_w = scale_b = scale_attn = None
    width = 2 * d if use_direct else d
    sem_w = glorot_init((width, attn_dim), rng)
    sem_b = glorot_init((1, attn_dim), rng)
    sem_attn = glorot_init((attn_dim, 1), rng)
    disc_w = glorot_init((width, width), rng)
    return ModelParams(feature_w, feature_b, attn_direct, gcn_w,
                       scale_w, scale_b, scale_attn, sem_w, sem_b, sem_attn,
                       disc_w, hidden_dim=d, embed_width=width)


@dataclass
class ViewEmbedding:
    """One meta-path view: the concatenated representation plus its parts."""

    name: str
    embedding: Tensor                     # (n_target, width)
    direct: Tensor | None                 # (n_target, d) or None without direct part
    aggregated: Tensor                    # (n_target, d)
    scale_weights: tuple[float, float]    # (initial, expanded), sums to 1


@dataclass
class GraphTensors:
    """Dense constants derived once per (graph, paths): attention masks,
    renormalized GCN adjacencies, and initial meta-path adjacencies."""

    direct_mask: dict[str, np.ndarray] = field(default_factory=dict)
    gcn_norm: dict[tuple[str, Scale], np.ndarray] = field(default_factory=dict)
    initial_adj: dict[str, np.ndarray] = field(default_factory=dict)


def normalized_adjacency(adjacency) -> np.ndarray:
    """Renormalization-trick propagation matrix D^-1/2 (X + I) D^-1/2."""
    dense = np.asarray(adjacency.todense() if hasattr(adjacency, "todense") else adjacency,
                       dtype=np.float64)
    with_loops = dense + np.eye(dense.shape[0])
    inv_sqrt = 1.0 / np.sqrt(with_loops.sum(axis=1))
    return with_loops * inv_sqrt[:, None] * inv_sqrt[None, :]


def prepare_graph(graph: HeteroGraph, paths: list[MetaPath], *,
                  use_expanded: bool = True) -> GraphTensors:
    cache = GraphTensors()
    for path in paths:
        sub = metapath_adjacency(graph, path)
        cache.initial_adj[path.name] = np.asarray(sub.adjacency.todense(), dtype=np.float64)
        cache.gcn_norm[(path.name, Scale.INITIAL)] = normalized_adjacency(sub.adjacency)
        if use_expanded:
            exp = expanded_adjacency(graph, path)
            cache.gcn_norm[(path.name, Scale.EXPANDED)] = normalized_adjacency(exp.adjacency)
        first = step_matrix(graph, *path.steps[0])
        cache.direct_mask[path.name] = np.asarray(first.todense(), dtype=np.float64)
    return cache


def transform_features(graph: HeteroGraph, params: ModelParams,
                       features_override: dict[int, np.ndarray] | None = None
                       ) -> dict[int, Tensor]:
    """Project every node type into the shared d-dim space: ELU(X W + b)."""
    out = {}
    for tid in range(graph.num_types):
        feats = graph.features[tid]
        if features_override and tid in features_override:
            feats = features_override[tid]
        w = params.feature_w[tid]
        if feats.shape[1] != w.shape[0]:
            raise ValueError(
                f"type {graph.type_names[tid]!r}: feature dim {feats.shape[1]} "
                f"does not match transform input dim {w.shape[0]}")
        out[tid] = (Tensor.constant(feats) @ w + params.feature_b[tid]).elu()
    return out


def direct_attention_weights(graph: HeteroGraph, path: MetaPath,
                             transformed: dict[int, Tensor], params: ModelParams, *,
                             slope: float = 0.2,
                             mask: np.ndarray | None = None) -> Tensor:
    """Per-target attention over direct one-hop neighbors; rows sum to 1
    (or to 0 for targets with no neighbors)."""
    if mask is None:
        mask = np.asarray(step_matrix(graph, *path.steps[0]).todense(), dtype=np.float64)
    h_target = transformed[graph.target_type]
    h_aux = transformed[path.node_type_seq[1]]
    attn = params.attn_direct[path.name]
    d = params.hidden_dim
    # Split the (2d, 1) vector: logit_ij = a_top . h_i + a_bot . h_j.
    top = attn.gather_rows(np.arange(d))
    bot = attn.gather_rows(np.arange(d, 2 * d))
    target_score = h_target @ top                      # (n, 1)
    aux_score = (h_aux @ bot).transpose()              # (1, n_aux)
    logits = (target_score + aux_score).leaky_relu(slope)
    return logits.masked_row_softmax(mask)


def aggregate_direct(graph: HeteroGraph, path: MetaPath,
                     transformed: dict[int, Tensor], params: ModelParams, *,
                     slope: float = 0.2, mask: np.ndarray | None = None) -> Tensor:
    """Attention-weighted sum of direct one-hop neighbors, per target node.

    Attention logits are LeakyReLU(a^T [h_i || h_j]) masked to actual
    neighbors; rows with no neighbors produce a zero vector (the sum over an
    empty set), which ELU maps to zero.
    """
    weights = direct_attention_weights(graph, path, transformed, params,
                                       slope=slope, mask=mask)
    return (weights @ transformed[path.node_type_seq[1]]).elu()


def gcn_encode(subgraph: MetaPathSubgraph | None, h_target: Tensor, weight: Tensor,
               *, norm: np.ndarray | None = None) -> Tensor:
    """1-layer GCN: ELU(A_hat H W) with the renormalization self-loop."""
    if norm is None:
        if subgraph is None:
            raise ValueError("gcn_encode needs a subgraph or a precomputed norm")
        norm = normalized_adjacency(subgraph.adjacency)
    return (Tensor.constant(norm) @ h_target @ weight).elu()


def fuse_scales(h_initial: Tensor, h_expanded: Tensor,
                params: ModelParams) -> tuple[Tensor, Tensor]:
    """Attention over the two scales; returns (fused matrix, (1, 2) weights)."""
    if params.scale_w is None:
        raise ValueError("model was built without multi-scale parameters")
    scores = []
    for h in (h_initial, h_expanded):
        projected = (h @ params.scale_w + params.scale_b).tanh()
        scores.append((projected @ params.scale_attn).mean_rows())   # (1, 1)
    omega = concat_cols(scores).row_softmax()                        # (1, 2)
    w_init = omega @ Tensor.constant([[1.0], [0.0]])                 # (1, 1)
    w_exp = omega @ Tensor.constant([[0.0], [1.0]])
    fused = h_initial * w_init + h_expanded * w_exp
    return fused, omega


def build_view_embedding(graph: HeteroGraph, path: MetaPath, params: ModelParams, *,
                         transformed: dict[int, Tensor] | None = None,
                         cache: GraphTensors | None = None,
                         use_direct: bool = True, use_expanded: bool = True,
                         slope: float = 0.2) -> ViewEmbedding:
    """Full per-view pipeline for one initial meta-path."""
    if not path.is_initial:
        raise ValueError(f"views are built from initial meta-paths, got {path.name!r}")
    if transformed is None:
        transformed = transform_features(graph, params)
    h_target = transformed[graph.target_type]

    norm_i = cache.gcn_norm[(path.name, Scale.INITIAL)] if cache else None
    h_init = gcn_encode(None if norm_i is not None else metapath_adjacency(graph, path),
                        h_target, params.gcn_w[(path.name, Scale.INITIAL)], norm=norm_i)
    if use_expanded:
        norm_e = cache.gcn_norm[(path.name, Scale.EXPANDED)] if cache else None
        h_exp = gcn_encode(None if norm_e is not None else expanded_adjacency(graph, path),
                           h_target, params.gcn_w[(path.name, Scale.EXPANDED)], norm=norm_e)
        aggregated, omega = fuse_scales(h_init, h_exp, params)
        scale_weights = (float(omega.values[0, 0]), float(omega.values[0, 1]))
    else:
        aggregated = h_init
        scale_weights = (1.0, 0.0)

    if use_direct:
        mask = cache.direct_mask[path.name] if cache else None
        direct = aggregate_direct(graph, path, transformed, params, slope=slope, mask=mask)
        embedding = concat_cols([direct, aggregated])
    else:
        direct = None
        embedding = aggregated
    return ViewEmbedding(path.name, embedding, direct, aggregated, scale_weights)


def fuse_semantic(views: list[ViewEmbedding], params: ModelParams) -> tuple[Tensor, np.ndarray]:
    """Attention over views; returns (Z, per-view weights summing to 1)."""
    if not views:
        raise ValueError("semantic fusion needs at least one view")
    scores = []
    for view in views:
        projected = (view.embedding @ params.sem_w + params.sem_b).tanh()
        scores.append((projected @ params.sem_attn).mean_rows())
    beta = concat_cols(scores).row_softmax()                         # (1, M)
    z = None
    for idx, view in enumerate(views):
        pick = np.zeros((len(views), 1))
        pick[idx, 0] = 1.0
        weight = beta @ Tensor.constant(pick)                        # (1, 1)
        term = view.embedding * weight
        z = term if z is None else z + term
    return z, beta.values[0].copy()


def encode_views(graph: HeteroGraph, paths: list[MetaPath], params: ModelParams, *,
                 features_override: dict[int, np.ndarray] | None = None,
                 cache: GraphTensors | None = None,
                 use_direct: bool = True, use_expanded: bool = True,
                 slope: float = 0.2) -> list[ViewEmbedding]:
    """Encode every meta-path view with one shared feature transform."""
    transformed = transform_features(graph, params, features_override)
    return [build_view_embedding(graph, path, params, transformed=transformed,
                                 cache=cache, use_direct=use_direct,
                                 use_expanded=use_expanded, slope=slope)
            for path in paths]
