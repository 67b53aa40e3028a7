"""Natural-language route: prompt assembly, pluggable generation client with a
deterministic mock, answer extraction, number-alignment trust, majority voting."""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional, Protocol, Sequence

from .aggregate import Candidate, absent_candidate
from .context import Context, Table, _NUMBER_RE, _try_parse_number
from .normalize import normalize_answer

FINAL_ANSWER_RE = re.compile(r"final answer:", re.IGNORECASE)


@dataclass(frozen=True)
class FewShotExample:
    question: str
    answer_trace: str


@dataclass
class PromptConfig:
    instruction: str = (
        "Answer the financial question using step-by-step reasoning. "
        "Justify your answer using available context."
    )
    examples: list[FewShotExample] = field(default_factory=list)
    k: int = 5
    temperature: float = 0.3
    top_p: float = 0.95

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")


class GenerationClient(Protocol):
    def generate(self, prompt: str, temperature: float, top_p: float, sample_index: int) -> str: ...


def render_table(t: Table) -> str:
    """Aligned pipe-separated rows with a header line."""
    cells = [list(t.headers)] + [[c.raw or str(c) for c in row] for row in t.rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(t.headers))]
    lines = [
        "| " + " | ".join(row[j].ljust(widths[j]) for j in range(len(row))) + " |"
        for row in cells
    ]
    return "\n".join(lines)


def build_prompt(question: str, ctx: Context, cfg: PromptConfig) -> str:
    sections = [f"Instruction: {cfg.instruction}", f"Question: {question}"]
    context_lines = ["Context (Passage & Table Snippets):"]
    if ctx.passage:
        context_lines.append(ctx.passage)
    if ctx.table is not None:
        context_lines.append(render_table(ctx.table))
    sections.append("\n".join(context_lines))
    if cfg.examples:
        shot_lines = ["Few-shot Examples:"]
        for ex in cfg.examples:
            shot_lines.append(f"Q: {ex.question}")
            shot_lines.append(f"A: {ex.answer_trace}")
        sections.append("\n".join(shot_lines))
    sections.append("Answer:")
    return "\n\n".join(sections)


def extract_answer(text: str) -> Optional[str]:
    """Substring after the last "Final Answer:" (case-insensitive), trimmed to
    end of line; falls back to the last non-empty line. Trailing '.' dropped."""
    if not text.strip():
        return None
    matches = list(FINAL_ANSWER_RE.finditer(text))
    if matches:
        tail = text[matches[-1].end():]
        line = tail.split("\n", 1)[0]
    else:
        line = [ln for ln in text.splitlines() if ln.strip()][-1]
    answer = line.strip().rstrip(".").strip()
    return answer or None


def prompt_digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


class MockClient:
    """Deterministic scripted client: a JSON fixture maps prompt digests to
    response lists; sample i replays response (i-1) mod len."""

    def __init__(self, fixtures: dict[str, list[str]]) -> None:
        self.fixtures = fixtures

    @classmethod
    def from_file(cls, path: str) -> "MockClient":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh))

    def generate(self, prompt: str, temperature: float, top_p: float, sample_index: int) -> str:
        key = prompt_digest(prompt)
        responses = self.fixtures.get(key)
        if not responses:
            raise KeyError(f"no scripted responses for prompt digest {key}")
        return responses[(sample_index - 1) % len(responses)]


def number_alignment(rationale: str, ctx: Context) -> float:
    """Fraction of the rationale's numeric literals that occur among the
    context's numbers or are a single binary operation away from two of them.
    A rationale citing no numbers is vacuously aligned (1.0)."""
    cited: list[Decimal] = []
    for m in _NUMBER_RE.finditer(rationale):
        # ordinal step markers ("Step 2:") are narration, not cited quantities
        if re.search(r"step\s*$", rationale[: m.start()], re.IGNORECASE):
            continue
        v = _try_parse_number(m.group(0).strip())
        if v is not None and v.number is not None:
            cited.append(v.number)
    if not cited:
        return 1.0
    known = {v.number for v, _prov in ctx.numbers if v.kind == "number"}
    pool = sorted(known)
    derivable: set[Decimal] = set(pool)
    for a in pool:
        for b in pool:
            derivable.add(a + b)
            derivable.add(a - b)
            derivable.add(a * b)
            if b != 0:
                derivable.add(a / b)
                derivable.add((a - b) / b)
    aligned = sum(1 for x in cited if x in derivable)
    return aligned / len(cited)


@dataclass
class CotSample:
    sample_index: int
    rationale: str
    answer: Optional[str]


@dataclass
class CotResult:
    samples: list[CotSample]
    candidates: list[Candidate]  # one per successful sample, in sample order
    voted: Candidate  # majority-vote winner (diagnostic)


def majority_vote(answers: Sequence[str]) -> Optional[int]:
    """Index of the argmax-count answer under normalization; ties go to the
    earliest sample among the tied answers."""
    if not answers:
        return None
    counts: dict[str, int] = {}
    first_seen: dict[str, int] = {}
    for i, a in enumerate(answers):
        key = normalize_answer(a)
        counts[key] = counts.get(key, 0) + 1
        first_seen.setdefault(key, i)
    winner = min(counts, key=lambda k: (-counts[k], first_seen[k]))
    return first_seen[winner]


def sample_and_vote(
    client: GenerationClient, question: str, ctx: Context, cfg: PromptConfig
) -> CotResult:
    """Draw k samples (sample_index 1..k), extract and vote answers. Failed
    samples are dropped; if every sample fails, the voted candidate is absent."""
    prompt = build_prompt(question, ctx, cfg)
    samples: list[CotSample] = []
    for i in range(1, cfg.k + 1):
        try:
            text = client.generate(prompt, cfg.temperature, cfg.top_p, i)
        except Exception:
            continue
        samples.append(CotSample(i, text, extract_answer(text)))

    candidates = []
    for s in samples:
        if s.answer is None:
            continue
        candidates.append(
            Candidate(
                answer=s.answer,
                normalized=normalize_answer(s.answer),
                modality="cot",
                heuristic=number_alignment(s.rationale, ctx),
                sample_index=s.sample_index,
                rationale=s.rationale,
            )
        )

    if not candidates:
        return CotResult(samples, [], absent_candidate("cot"))
    win = majority_vote([c.answer for c in candidates])
    assert win is not None
    return CotResult(samples, candidates, candidates[win])
