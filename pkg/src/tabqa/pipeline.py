"""End-to-end question answering: run the three routes, pool candidates,
aggregate, and time each stage."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .aggregate import AggregationResult, Candidate, aggregate, build_candidate_set
from .config import PipelineConfig
from .context import Context, HashingEncoder
from .cot import CotResult, FewShotExample, GenerationClient, MockClient, PromptConfig, sample_and_vote
from .sqlexec import QueryGenerator, RuleBasedGenerator, load_synonyms, structured_answer
from .symbolic import symbolic_answer

DISABLE_CHOICES = ("sql", "numsolver", "cot", "reranker")


class FailingClient:
    """Placeholder when no generation backend is configured: every sample fails,
    so the natural route abstains."""

    def generate(self, prompt: str, temperature: float, top_p: float, sample_index: int) -> str:
        raise RuntimeError("no generation backend configured")


def scoring_vector(dimension: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dimension)
    return v / np.linalg.norm(v)


def load_few_shots(path: str) -> list[FewShotExample]:
    with open(path, encoding="utf-8") as fh:
        items = json.load(fh)
    return [FewShotExample(it["question"], it["answer_trace"]) for it in items]


@dataclass
class Components:
    encoder: HashingEncoder
    w: np.ndarray
    query_gen: QueryGenerator
    gen_client: GenerationClient
    pair_scorer: Optional[object] = None  # PairScorer; None -> baseline
    prompt: PromptConfig = field(default_factory=PromptConfig)


def build_components(cfg: PipelineConfig) -> Components:
    encoder = HashingEncoder(cfg.dimension, cfg.seed)
    w = scoring_vector(cfg.dimension, cfg.seed)
    synonyms = load_synonyms(cfg.synonyms_file) if cfg.synonyms_file else None
    query_gen: QueryGenerator = RuleBasedGenerator(synonyms)
    gen_client: GenerationClient
    pair_scorer = None
    if cfg.shim_url:
        from .shimclient import ShimGenerationClient, ShimPairScorer, ShimQueryGenerator

        gen_client = ShimGenerationClient(cfg.shim_url)
        pair_scorer = ShimPairScorer(cfg.shim_url)
        query_gen = ShimQueryGenerator(cfg.shim_url)
    elif cfg.fixtures_file:
        gen_client = MockClient.from_file(cfg.fixtures_file)
    else:
        gen_client = FailingClient()
    examples = load_few_shots(cfg.few_shot_file) if cfg.few_shot_file else []
    prompt = PromptConfig(examples=examples, k=cfg.k, temperature=cfg.temperature, top_p=cfg.top_p)
    return Components(encoder, w, query_gen, gen_client, pair_scorer, prompt)


@dataclass
class PipelineOutcome:
    structured: Optional[Candidate]
    symbolic: Optional[Candidate]
    cot: Optional[CotResult]
    aggregation: AggregationResult
    timings_ms: dict[str, float]

    @property
    def answer(self) -> Optional[str]:
        return self.aggregation.answer


def answer_question(
    question: str,
    ctx: Context,
    cfg: PipelineConfig,
    components: Components,
    lam: Optional[float] = None,
    disable: Sequence[str] = (),
) -> PipelineOutcome:
    disable = set(disable)
    unknown = disable - set(DISABLE_CHOICES)
    if unknown:
        raise ValueError(f"unknown disable targets: {sorted(unknown)}")
    lam_value = lam if lam is not None else cfg.resolve_lambda()
    timings: dict[str, float] = {}
    total_start = time.perf_counter()

    structured = None
    t0 = time.perf_counter()
    if "sql" not in disable:
        structured = structured_answer(components.query_gen, question, ctx)
    timings["sql"] = (time.perf_counter() - t0) * 1000

    symbolic = None
    t0 = time.perf_counter()
    if "numsolver" not in disable:
        symbolic = symbolic_answer(
            question, ctx, components.encoder, components.w, cfg.max_depth, cfg.beam
        )
    timings["numsolver"] = (time.perf_counter() - t0) * 1000

    cot_result = None
    t0 = time.perf_counter()
    if "cot" not in disable:
        cot_result = sample_and_vote(components.gen_client, question, ctx, components.prompt)
    timings["cot"] = (time.perf_counter() - t0) * 1000

    pool = build_candidate_set(
        structured, symbolic, cot_result.candidates if cot_result else []
    )
    t0 = time.perf_counter()
    result = aggregate(
        question,
        ctx,
        pool,
        lam_value,
        scorer=components.pair_scorer,
        use_reranker="reranker" not in disable,
    )
    timings["reranker"] = (time.perf_counter() - t0) * 1000
    timings["total"] = (time.perf_counter() - total_start) * 1000
    return PipelineOutcome(structured, symbolic, cot_result, result, timings)
