"""Positive sampling and the contrastive objective.

For an anchor node in view m paired against view n, the positives are its
initial-meta-path neighbors inside view m plus its own counterpart in view n
(k + 1 in total); everything else in both views is negative. The objective
blends a local-global mutual-information term (bilinear discriminator against
a mean-pooled summary) with a local-local InfoNCE term over cosine
similarities, weighted by ``alpha``, summed over ordered view pairs and all
target nodes.

The printed local-global form contains only positive pairs and can be
saturated by a constant discriminator, so the default mode adds standard
corruption negatives (target features row-shuffled, re-encoded by the same
forward pass); ``literal`` mode keeps the bare form for fidelity experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .encoder import GraphTensors, ModelParams, encode_views
from .hin import HeteroGraph
from .metapath import MetaPath, metapath_adjacency, metapath_neighbors

PROB_CLAMP = 1e-7
GLOBAL_MODES = ("corrupted", "literal")


@dataclass
class PositiveSet:
    """Positives for one anchor under an ordered view pair (m, n)."""

    anchor: int
    view_pair: tuple[str, str]
    members: list[tuple[str, int]]      # (view tag, node index)

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class ContrastConfig:
    tau: float = 0.5
    alpha: float = 0.5
    global_negatives: str = "corrupted"

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.global_negatives not in GLOBAL_MODES:
            raise ValueError(f"global_negatives must be one of {GLOBAL_MODES}")


def sample_positives(graph: HeteroGraph, path_m: MetaPath, path_n: MetaPath,
                     anchor: int) -> PositiveSet:
    """Meta-path neighbors in view m plus the anchor's counterpart in view n."""
    if not path_m.is_initial:
        raise ValueError("positive sampling is limited to initial meta-paths")
    members = [(path_m.name, j) for j in metapath_neighbors(graph, path_m, anchor)]
    members.append((path_n.name, anchor))
    return PositiveSet(anchor, (path_m.name, path_n.name), members)


def summary_vector(view_embedding: Tensor) -> Tensor:
    """Mean-pooled readout of a view: (n, w) -> (1, w)."""
    if view_embedding.shape[0] == 0:
        raise ValueError("cannot summarize an empty view")
    return view_embedding.mean_rows()


def discriminate(h: Tensor, s: Tensor, disc_w: Tensor) -> Tensor:
    """Bilinear score sigmoid(h W s^T); h may hold one row per node."""
    return (h @ disc_w @ s.transpose()).sigmoid()


def _log(p: Tensor) -> Tensor:
    return p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).log()


def _global_pair_loss(h_m: Tensor, h_n: Tensor, disc_w: Tensor, mode: str,
                      h_m_cor: Tensor | None = None,
                      h_n_cor: Tensor | None = None) -> Tensor:
    """Local-global term summed over all anchors of one ordered pair."""
    s_m = summary_vector(h_m)
    loss = -(_log(discriminate(h_m, s_m, disc_w)).sum()) \
           - (_log(discriminate(h_n, s_m, disc_w)).sum())
    if mode == "corrupted":
        if h_m_cor is None or h_n_cor is None:
            raise ValueError("corrupted mode requires corrupted view embeddings")
        loss = loss - (_log(1.0 - discriminate(h_m_cor, s_m, disc_w)).sum()) \
                    - (_log(1.0 - discriminate(h_n_cor, s_m, disc_w)).sum())
    elif mode != "literal":
        raise ValueError(f"unknown global mode {mode!r}")
    return loss


def loss_global(anchor: int, h_m: Tensor, h_n: Tensor, disc_w: Tensor,
                mode: str = "literal", h_m_cor: Tensor | None = None,
                h_n_cor: Tensor | None = None) -> Tensor:
    """Local-global term for a single anchor node."""
    idx = [anchor]
    s_m = summary_vector(h_m)
    loss = -(_log(discriminate(h_m.gather_rows(idx), s_m, disc_w))) \
           - (_log(discriminate(h_n.gather_rows(idx), s_m, disc_w)))
    if mode == "corrupted":
        if h_m_cor is None or h_n_cor is None:
            raise ValueError("corrupted mode requires corrupted view embeddings")
        loss = loss - _log(1.0 - discriminate(h_m_cor.gather_rows(idx), s_m, disc_w)) \
                    - _log(1.0 - discriminate(h_n_cor.gather_rows(idx), s_m, disc_w))
    elif mode != "literal":
        raise ValueError(f"unknown global mode {mode!r}")
    return loss.sum()


def _scaled_exp(sims: Tensor, tau: float) -> Tensor:
    # Cosine similarities never exceed 1, so shifting by 1/tau keeps every
    # exponent non-positive (the log-sum-exp trick with a constant bound).
    return (sims.scale(1.0 / tau) - (1.0 / tau)).exp()


def _local_pair_loss(h_m: Tensor, h_n: Tensor, pos_mask: np.ndarray,
                     tau: float) -> Tensor:
    """InfoNCE term summed over all anchors of one ordered pair.

    pos_mask[i, j] = 1 marks j as an initial-meta-path neighbor of i (view m
    positives); the cross-view counterpart positive is always included.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    n = h_m.shape[0]
    norm_m = h_m.l2_normalize_rows()
    norm_n = h_n.l2_normalize_rows()
    e_mm = _scaled_exp(norm_m @ norm_m.transpose(), tau)
    e_mn = _scaled_exp(norm_m @ norm_n.transpose(), tau)
    e_nn = _scaled_exp(norm_n @ norm_n.transpose(), tau)

    eye = np.eye(n)
    ones = Tensor.constant(np.ones((n, 1)))
    pos = (e_mm * Tensor.constant(pos_mask)) @ ones + (e_mn * Tensor.constant(eye)) @ ones
    neg = (e_mm * Tensor.constant(1.0 - pos_mask - eye)) @ ones \
        + (e_nn * Tensor.constant(1.0 - eye)) @ ones
    return ((pos + neg).log() - pos.log()).sum()


def loss_local(anchor: int, positives: PositiveSet, h_m: Tensor, h_n: Tensor,
               tau: float) -> Tensor:
    """InfoNCE term for a single anchor, following the positive set's view tags."""
    if tau <= 0:
        raise ValueError("temperature must be positive")
    m_name, n_name = positives.view_pair
    n = h_m.shape[0]
    norm_m = h_m.l2_normalize_rows()
    norm_n = h_n.l2_normalize_rows()
    query_m = norm_m.gather_rows([anchor])
    query_n = norm_n.gather_rows([anchor])
    sims_m = _scaled_exp(query_m @ norm_m.transpose(), tau)      # vs view-m nodes
    sims_cross = _scaled_exp(query_m @ norm_n.transpose(), tau)  # vs view-n nodes
    sims_n = _scaled_exp(query_n @ norm_n.transpose(), tau)      # anchor's view-n row

    pos_m = np.zeros((1, n))
    pos_n = np.zeros((1, n))
    for tag, idx in positives.members:
        if tag == m_name:
            pos_m[0, idx] = 1.0
        elif tag == n_name:
            pos_n[0, idx] = 1.0
        else:
            raise ValueError(f"member tag {tag!r} not in view pair {positives.view_pair}")
    neg_m = 1.0 - pos_m
    neg_m[0, anchor] = 0.0      # the query itself is never a negative
    neg_n = 1.0 - pos_n
    neg_n[0, anchor] = 0.0

    pos = (sims_m * Tensor.constant(pos_m)).sum() + (sims_cross * Tensor.constant(pos_n)).sum()
    neg = (sims_m * Tensor.constant(neg_m)).sum() + (sims_n * Tensor.constant(neg_n)).sum()
    return (pos + neg).log() - pos.log()


def positive_masks(graph: HeteroGraph, paths: list[MetaPath], *,
                   counterpart_only: bool = False,
                   cache: GraphTensors | None = None) -> dict[str, np.ndarray]:
    """Per-path binary masks of initial meta-path neighbors (zero diagonal)."""
    masks = {}
    for path in paths:
        if counterpart_only:
            masks[path.name] = np.zeros((graph.n_target, graph.n_target))
        elif cache is not None:
            masks[path.name] = cache.initial_adj[path.name]
        else:
            masks[path.name] = np.asarray(
                metapath_adjacency(graph, path).adjacency.todense(), dtype=np.float64)
    return masks


def loss_total(graph: HeteroGraph, paths: list[MetaPath], params: ModelParams,
               config: ContrastConfig, rng: np.random.Generator, *,
               cache: GraphTensors | None = None,
               use_direct: bool = True, use_expanded: bool = True,
               counterpart_only: bool = False, slope: float = 0.2) -> Tensor:
    """Blended objective summed over ordered view pairs and all target nodes."""
    if len(paths) < 2:
        raise ValueError("the contrastive objective needs at least 2 meta-paths")
    views = encode_views(graph, paths, params, cache=cache, use_direct=use_direct,
                         use_expanded=use_expanded, slope=slope)
    corrupted = None
    if config.alpha > 0 and config.global_negatives == "corrupted":
        feats = graph.features[graph.target_type]
        perm = rng.permutation(feats.shape[0])
        corrupted = encode_views(graph, paths, params,
                                 features_override={graph.target_type: feats[perm]},
                                 cache=cache, use_direct=use_direct,
                                 use_expanded=use_expanded, slope=slope)
    masks = positive_masks(graph, paths, counterpart_only=counterpart_only, cache=cache)

    total = None
    for im, view_m in enumerate(views):
        for ik, view_n in enumerate(views):
            if im == ik:
                continue
            pair = None
            if config.alpha > 0:
                cor_m = corrupted[im].embedding if corrupted else None
                cor_n = corrupted[ik].embedding if corrupted else None
                pair = _global_pair_loss(view_m.embedding, view_n.embedding,
                                         params.disc_w, config.global_negatives,
                                         cor_m, cor_n).scale(config.alpha)
            if config.alpha < 1:
                local = _local_pair_loss(view_m.embedding, view_n.embedding,
                                         masks[view_m.name], config.tau)
                local = local.scale(1.0 - config.alpha)
                pair = local if pair is None else pair + local
            total = pair if total is None else total + pair
    return total
