"""Multi-scale meta-path heterogeneous graph contrastive learning toolkit."""

from .autodiff import AdamState, Tensor, adam_step, concat_cols, glorot_init
from .contrastive import (ContrastConfig, PositiveSet, discriminate,
                          loss_global, loss_local, loss_total,
                          sample_positives, summary_vector)
from .data import (DatasetManifest, SyntheticSpec, generate_synthetic,
                   load_dataset, load_embeddings, save_embeddings,
                   write_dataset)
from .encoder import (GraphTensors, ModelParams, ViewEmbedding,
                      aggregate_direct, build_view_embedding,
                      direct_attention_weights, encode_views, fuse_scales,
                      fuse_semantic, gcn_encode, init_params,
                      normalized_adjacency, prepare_graph, transform_features)
from .evaluation import (EvalReport, LinearClassifier, SplitSpec,
                         classify_metrics, cluster_metrics,
                         evaluate_classification, evaluate_clustering, kmeans,
                         make_split_spec, split, train_linear_classifier)
from .hin import (HeteroGraph, Relation, neighbors, relation_from_edges,
                  require_valid, validate)
from .metapath import (MetaPath, MetaPathSubgraph, Scale, build_metapath,
                       direct_neighbors, expand_metapath, expanded_adjacency,
                       metapath_adjacency, metapath_neighbors)
from .training import (TrainConfig, TrainResult, Wiring, apply_variant,
                       encode_untrained, train)

__version__ = "0.1.0"
