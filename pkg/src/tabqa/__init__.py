"""Multimodal table question answering with SQL, arithmetic, and chain-of-thought
routes, self-consistency scoring, and pairwise reranking."""

from .aggregate import AggregationResult, Candidate, aggregate
from .config import PipelineConfig, load_config, save_config
from .context import Context, HashingEncoder, Table, Value, build_context, load_table, parse_value
from .normalize import normalize_answer
from .pipeline import Components, answer_question, build_components

__all__ = [
    "AggregationResult",
    "Candidate",
    "Components",
    "Context",
    "HashingEncoder",
    "PipelineConfig",
    "Table",
    "Value",
    "aggregate",
    "answer_question",
    "build_components",
    "build_context",
    "load_config",
    "load_table",
    "normalize_answer",
    "parse_value",
    "save_config",
]
