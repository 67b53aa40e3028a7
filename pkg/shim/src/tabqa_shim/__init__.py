"""HTTP model shim for the table-QA engine."""

from .app import create_app
from .backends import Backend, MockBackend, RerankerBackend
from .reranker import (
    PairwiseReranker,
    RankPair,
    RerankerConfig,
    TrainResult,
    load_model,
    pairwise_accuracy,
    save_model,
    train_reranker,
)
from .schemas import RESPONSE_SCHEMAS

__all__ = [
    "create_app",
    "Backend",
    "MockBackend",
    "RerankerBackend",
    "PairwiseReranker",
    "RankPair",
    "RerankerConfig",
    "TrainResult",
    "load_model",
    "pairwise_accuracy",
    "save_model",
    "train_reranker",
    "RESPONSE_SCHEMAS",
]
