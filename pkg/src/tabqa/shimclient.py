"""HTTP clients for an external model service: text generation, pairwise
ranking, and SQL generation. Each call applies a timeout; callers fall back to
the offline baselines on failure."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import requests

from .aggregate import Candidate
from .context import Context, Schema, Table
from .cot import render_table
from .sqlexec import SqlQuery, SqlSyntaxError, parse_sql, validate_query, SqlExecutionError

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


def context_text(ctx: Context) -> str:
    parts = []
    if ctx.passage:
        parts.append(ctx.passage)
    if ctx.table is not None:
        parts.append(render_table(ctx.table))
    return "\n".join(parts)


@dataclass
class ShimGenerationClient:
    base_url: str
    timeout: float = DEFAULT_TIMEOUT

    def generate(self, prompt: str, temperature: float, top_p: float, sample_index: int) -> str:
        resp = requests.post(
            f"{self.base_url}/v1/generate",
            json={"prompt": prompt, "k": sample_index, "temperature": temperature, "top_p": top_p},
            timeout=self.timeout,
        )
        resp.raise_for_status()
        samples = resp.json()["samples"]
        return samples[sample_index - 1]["text"]


@dataclass
class ShimPairScorer:
    base_url: str
    timeout: float = DEFAULT_TIMEOUT

    def score(self, question: str, ctx: Context, a: Candidate, b: Candidate) -> float:
        resp = requests.post(
            f"{self.base_url}/v1/rank",
            json={
                "question": question,
                "context_text": context_text(ctx),
                "answer_a": a.answer,
                "answer_b": b.answer,
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        return float(resp.json()["score"])


@dataclass
class ShimQueryGenerator:
    base_url: str
    timeout: float = DEFAULT_TIMEOUT
    sample_rows: int = 3

    def generate(self, question: str, table: Table, schema: Schema) -> list[SqlQuery]:
        resp = requests.post(
            f"{self.base_url}/v1/sqlgen",
            json={
                "question": question,
                "headers": list(table.headers),
                "sample_rows": [
                    [c.raw for c in row] for row in table.rows[: self.sample_rows]
                ],
            },
            timeout=self.timeout,
        )
        resp.raise_for_status()
        queries = []
        for text in resp.json()["queries"]:
            try:
                q = parse_sql(text)
                validate_query(q, schema)
            except (SqlSyntaxError, SqlExecutionError, ValueError) as e:
                log.warning("discarding remote query %r: %s", text, e)
                continue
            queries.append(q)
        return queries
