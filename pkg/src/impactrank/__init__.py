"""Change impact analysis for Java code: call graphs, method embeddings,
graph propagation and IR-style benchmark scoring."""

from .benchmark import (
    ChangeAnnotation,
    EvalReport,
    ImpactTask,
    TaskScore,
    aggregate,
    build_tasks,
    evaluate,
    locate_method,
    read_annotations,
    score_task,
)
from .callgraph import CallGraph, ClassGraph, build_call_graph, build_class_graph, resolve_call
from .corpus import Corpus, ExclusionRules, MethodRecord, extract_corpus, preprocess_method
from .embedding import EmbeddingMatrix, cosine, import_embeddings, tfidf_embed
from .propagation import PropagationConfig, order_adjacency, propagate, similarity_weighting
from .ranking import RankedImpactList, rank, rank_queries, scope_corpus

__version__ = "0.1.0"

__all__ = [
    "CallGraph",
    "ChangeAnnotation",
    "ClassGraph",
    "Corpus",
    "EmbeddingMatrix",
    "EvalReport",
    "ExclusionRules",
    "ImpactTask",
    "MethodRecord",
    "PropagationConfig",
    "RankedImpactList",
    "TaskScore",
    "aggregate",
    "build_call_graph",
    "build_class_graph",
    "build_tasks",
    "cosine",
    "evaluate",
    "extract_corpus",
    "import_embeddings",
    "locate_method",
    "order_adjacency",
    "preprocess_method",
    "propagate",
    "rank",
    "rank_queries",
    "read_annotations",
    "resolve_call",
    "scope_corpus",
    "score_task",
    "similarity_weighting",
    "tfidf_embed",
]
