"""Knowledge-graph expansion, embedding link prediction and network analytics."""

__version__ = "0.1.0"

from .analytics import average_clustering, density, diameter, local_clustering, network_report
from .embeddings import EmbeddingModel, TrainConfig, gradient_check, init_model, score, train
from .evaluation import (
    FilterIndex,
    RankingMetrics,
    edge_set_precision_recall,
    f1,
    filtered_rank,
    mean_rank,
    mean_reciprocal_rank,
    precision_at_k,
)
from .expansion import (
    ExpansionConfig,
    ExpansionReport,
    bayesian_link_probability,
    conflict_rate,
    detect_conflict,
    edge_growth,
    expand,
    vertex_growth,
)
from .extraction import CandidateTriple, ExtractionBatch, fetch_candidates, parse_candidates, synthesize_candidates
from .store import KnowledgeGraph, load_triples_tsv, save_triples_tsv

__all__ = [
    "CandidateTriple",
    "EmbeddingModel",
    "ExpansionConfig",
    "ExpansionReport",
    "ExtractionBatch",
    "FilterIndex",
    "KnowledgeGraph",
    "RankingMetrics",
    "TrainConfig",
    "average_clustering",
    "bayesian_link_probability",
    "conflict_rate",
    "density",
    "detect_conflict",
    "diameter",
    "edge_growth",
    "edge_set_precision_recall",
    "expand",
    "f1",
    "fetch_candidates",
    "filtered_rank",
    "gradient_check",
    "init_model",
    "load_triples_tsv",
    "local_clustering",
    "mean_rank",
    "mean_reciprocal_rank",
    "network_report",
    "parse_candidates",
    "precision_at_k",
    "save_triples_tsv",
    "score",
    "synthesize_candidates",
    "train",
    "vertex_growth",
]
