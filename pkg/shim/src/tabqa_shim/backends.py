"""Service backends: a deterministic mock for contract tests and offline use,
and a variant that serves a trained pairwise reranker for /v1/rank."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

from .reranker import PairwiseReranker, load_model


def _digest(*parts: str) -> str:
    joined = "\x1f".join(parts)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


class Backend(Protocol):
    ready: bool

    def generate(self, prompt: str, k: int, temperature: float, top_p: float) -> list[str]: ...
    def rank(self, question: str, context_text: str, answer_a: str, answer_b: str) -> float: ...
    def sqlgen(self, question: str, headers: Sequence[str],
               sample_rows: Sequence[Sequence[str]]) -> list[str]: ...
    def identifiers(self) -> dict[str, str]: ...


@dataclass
class MockBackend:
    """Scripted outputs, fully determined by the request contents."""

    ready: bool = True

    def generate(self, prompt: str, k: int, temperature: float, top_p: float) -> list[str]:
        tag = _digest(prompt)[:8]
        return [
            f"Step 1: read the context. Final Answer: mock-{tag}."
            for _ in range(k)
        ]

    def rank(self, question: str, context_text: str, answer_a: str, answer_b: str) -> float:
        if answer_a == answer_b:
            return 0.0
        bucket = int(_digest(question, context_text, answer_a, answer_b)[:8], 16)
        return (bucket % 2001 - 1000) / 1000.0

    def sqlgen(self, question: str, headers: Sequence[str],
               sample_rows: Sequence[Sequence[str]]) -> list[str]:
        quoted = [h.replace('"', '""') for h in headers[:2]]
        return [f'SELECT "{h}"' for h in quoted]

    def identifiers(self) -> dict[str, str]:
        return {"generator": "mock", "reranker": "mock", "sqlgen": "mock"}


@dataclass
class RerankerBackend(MockBackend):
    """Mock generation/sqlgen with a trained model behind /v1/rank."""

    model: Optional[PairwiseReranker] = None
    model_path: Optional[str] = None
    ready: bool = field(default=False)

    def load(self) -> None:
        if self.model is None:
            if self.model_path is None:
                raise ValueError("RerankerBackend needs a model or model_path")
            self.model = load_model(self.model_path)
        self.ready = True

    def rank(self, question: str, context_text: str, answer_a: str, answer_b: str) -> float:
        assert self.model is not None
        return self.model.score(question, context_text, answer_a, answer_b)

    def identifiers(self) -> dict[str, str]:
        return {
            "generator": "mock",
            "reranker": f"pairwise-linear:{self.model_path or 'in-memory'}",
            "sqlgen": "mock",
        }
