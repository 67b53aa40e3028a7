"""Candidate pooling, self-consistency scoring, pairwise reranking, final selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

from .context import Context

MODALITY_PRIORITY = {"sql": 0, "num": 1, "cot": 2}


@dataclass(frozen=True)
class Candidate:
    answer: str
    normalized: str
    modality: str  # "sql" | "num" | "cot"
    heuristic: float = 0.0  # trust term H in [0, 1]
    sample_index: Optional[int] = None  # cot only
    rationale: Optional[str] = None
    present: bool = True

    def __post_init__(self) -> None:
        if not 0.0 <= self.heuristic <= 1.0:
            raise ValueError("heuristic trust must be in [0, 1]")


def absent_candidate(modality: str, sample_index: Optional[int] = None) -> Candidate:
    return Candidate(
        answer="", normalized="", modality=modality,
        heuristic=0.0, sample_index=sample_index, present=False,
    )


class PairScorer(Protocol):
    def score(self, question: str, ctx: Context, a: Candidate, b: Candidate) -> float: ...


def build_candidate_set(
    structured: Optional[Candidate],
    symbolic: Optional[Candidate],
    cot_samples: Sequence[Candidate],
) -> list[Candidate]:
    """Ordered candidate pool [sql?, num?, cot_1..cot_k]; absent candidates dropped."""
    pool: list[Candidate] = []
    for c in [structured, symbolic, *cot_samples]:
        if c is not None and c.present:
            pool.append(c)
    return pool


def consistency_scores(pool: Sequence[Candidate], lam: float) -> list[float]:
    """Frequency-of-agreement (over normalized answers) plus lam-weighted trust term."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    if not pool:
        raise ValueError("empty candidate set")
    n = len(pool)
    return [
        sum(1 for other in pool if other.normalized == c.normalized) / n
        + lam * c.heuristic
        for c in pool
    ]


@dataclass
class BaselineScorer:
    """Offline pairwise scorer: difference of consistency scores (antisymmetric)."""

    consistency: dict[int, float]  # candidate position -> C value
    pool: Sequence[Candidate]

    def score(self, question: str, ctx: Context, a: Candidate, b: Candidate) -> float:
        ia = next(i for i, c in enumerate(self.pool) if c is a)
        ib = next(i for i, c in enumerate(self.pool) if c is b)
        return self.consistency[ia] - self.consistency[ib]


def baseline_pair_scorer(pool: Sequence[Candidate], consistency: Sequence[float]) -> BaselineScorer:
    return BaselineScorer({i: c for i, c in enumerate(consistency)}, pool)


def pair_scores(
    scorer: PairScorer,
    question: str,
    ctx: Context,
    pool: Sequence[Candidate],
    fallback: Optional[PairScorer] = None,
) -> tuple[list[list[float]], bool]:
    """Full off-diagonal score matrix; diagonal fixed at 0.

    A failing scorer call falls back to ``fallback`` for that pair; the second
    return value reports whether any pair was degraded this way.
    """
    n = len(pool)
    sigma = [[0.0] * n for _ in range(n)]
    degraded = False
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            try:
                sigma[i][j] = float(scorer.score(question, ctx, pool[i], pool[j]))
            except Exception:
                if fallback is None:
                    raise
                sigma[i][j] = float(fallback.score(question, ctx, pool[i], pool[j]))
                degraded = True
    return sigma, degraded


def total_scores(sigma: Sequence[Sequence[float]]) -> list[float]:
    """Row sums excluding the diagonal."""
    n = len(sigma)
    return [sum(sigma[i][j] for j in range(n) if j != i) for i in range(n)]


def _tie_key(c: Candidate) -> tuple:
    return (
        MODALITY_PRIORITY[c.modality],
        c.sample_index if c.sample_index is not None else -1,
    )


def select(
    pool: Sequence[Candidate],
    totals: Sequence[float],
    consistency: Sequence[float],
) -> tuple[Optional[Candidate], str]:
    """Argmax of total score; ties broken by consistency, then modality
    priority sql > num > cot, then lowest cot sample index.

    Returns (winner, tie_break_path); winner is None when the pool is empty.
    """
    if not pool:
        return None, "abstain"
    best = 0
    path = "totals"
    for i in range(1, len(pool)):
        if totals[i] > totals[best]:
            best, path = i, "totals"
        elif totals[i] == totals[best]:
            if consistency[i] > consistency[best]:
                best, path = i, "consistency"
            elif consistency[i] == consistency[best] and _tie_key(pool[i]) < _tie_key(pool[best]):
                best, path = i, "modality"
    return pool[best], path


@dataclass
class AggregationResult:
    pool: list[Candidate]
    consistency: list[float]
    sigma: list[list[float]]
    totals: list[float]
    selected: Optional[Candidate]
    tie_break: str
    degraded: bool = False

    @property
    def answer(self) -> Optional[str]:
        return self.selected.answer if self.selected is not None else None

    def to_dict(self) -> dict:
        return {
            "candidates": [
                {
                    "answer": c.answer,
                    "normalized": c.normalized,
                    "modality": c.modality,
                    "sample_index": c.sample_index,
                    "heuristic": c.heuristic,
                }
                for c in self.pool
            ],
            "consistency": self.consistency,
            "sigma": self.sigma,
            "totals": self.totals,
            "selected": None if self.selected is None else self.selected.answer,
            "tie_break": self.tie_break,
            "degraded": self.degraded,
        }


def aggregate(
    question: str,
    ctx: Context,
    pool: Sequence[Candidate],
    lam: float,
    scorer: Optional[PairScorer] = None,
    use_reranker: bool = True,
) -> AggregationResult:
    """Run consistency scoring, pairwise reranking, and selection over a pool.

    With ``use_reranker`` off, selection is argmax consistency (majority-vote
    fallback); sigma/totals are zeroed.
    """
    pool = list(pool)
    if not pool:
        return AggregationResult([], [], [], [], None, "abstain")
    consistency = consistency_scores(pool, lam)
    baseline = baseline_pair_scorer(pool, consistency)
    if not use_reranker:
        n = len(pool)
        zeros = [[0.0] * n for _ in range(n)]
        winner, path = select(pool, [0.0] * n, consistency)
        return AggregationResult(pool, consistency, zeros, [0.0] * n, winner, path)
    if len(pool) == 1:
        return AggregationResult(pool, consistency, [[0.0]], [0.0], pool[0], "singleton")
    active = scorer if scorer is not None else baseline
    sigma, degraded = pair_scores(active, question, ctx, pool, fallback=baseline)
    totals = total_scores(sigma)
    winner, path = select(pool, totals, consistency)
    return AggregationResult(pool, consistency, sigma, totals, winner, path, degraded)
