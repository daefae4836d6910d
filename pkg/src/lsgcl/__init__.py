"""Local structure-aware graph contrastive learning on sparse attributed graphs."""

from .contrastive import LossConfig, multi_level_loss, sample_negatives, triplet_term
from .encoder import EmbeddingViews, EncoderParams, backward, encode, encode_views, init_params
from .graph import Graph, build_graph, column_normalized_adjacency, load_edge_list, normalize_adjacency
from .sampler import PprConfig, SubgraphSet, precompute_subgraphs, ppr_scores, rank_top_k
from .trainer import TrainConfig, adam_step, export_embeddings, train

__version__ = "0.1.0"

__all__ = [
    "LossConfig",
    "multi_level_loss",
    "sample_negatives",
    "triplet_term",
    "EmbeddingViews",
    "EncoderParams",
    "backward",
    "encode",
    "encode_views",
    "init_params",
    "Graph",
    "build_graph",
    "column_normalized_adjacency",
    "load_edge_list",
    "normalize_adjacency",
    "PprConfig",
    "SubgraphSet",
    "precompute_subgraphs",
    "ppr_scores",
    "rank_top_k",
    "TrainConfig",
    "adam_step",
    "export_embeddings",
    "train",
]
