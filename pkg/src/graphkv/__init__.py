"""Graph-based refinement of token importance scores for KV-cache eviction."""
from .eviction import EvictionPolicy, EvictionResult, Refinement, evict, gather, select_topk
from .graph import SimilarityKind, SourceSelection, SparseGraph, build_sparse_graph, neighborhood
from .kv_model import LayerCache, cosine_similarity, l2_norm_rows, softmax_row
from .propagation import (
    AdaptiveNeighbors,
    FixedNeighbors,
    PropagationConfig,
    SignalKind,
    propagate,
    refine_scores,
)
from .scorers import ScorerKind, WindowConfig

__all__ = [
    "AdaptiveNeighbors", "EvictionPolicy", "EvictionResult", "FixedNeighbors", "LayerCache",
    "PropagationConfig", "Refinement", "ScorerKind", "SignalKind", "SimilarityKind",
    "SourceSelection", "SparseGraph", "WindowConfig", "build_sparse_graph", "cosine_similarity",
    "evict", "gather", "l2_norm_rows", "neighborhood", "propagate", "refine_scores",
    "select_topk", "softmax_row",
]
