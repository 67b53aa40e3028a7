"""Arithmetic route: enumerate candidate expression trees over extracted numbers,
score them with the attention-pooled encoder embedding, evaluate the best."""

from __future__ import annotations

import decimal
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Sequence, Union

import numpy as np

from .aggregate import Candidate, absent_candidate
from .context import Context, Encoder, Value, format_value
from .normalize import normalize_answer

OP_NAMES = ("add", "sub", "mul", "div", "pct_change", "ratio")


class EvaluationError(ValueError):
    """Raised on division by zero or non-finite results."""


@dataclass(frozen=True)
class Leaf:
    index: int  # position in the extracted-number list

    @property
    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class Op:
    kind: str
    left: "ExpressionTree"
    right: "ExpressionTree"

    def __post_init__(self) -> None:
        if self.kind not in OP_NAMES:
            raise ValueError(f"unknown operator: {self.kind}")

    @property
    def depth(self) -> int:
        return 1 + max(self.left.depth, self.right.depth)


ExpressionTree = Union[Leaf, Op]


def render_tree(tree: ExpressionTree) -> str:
    """Canonical form, e.g. ``pct_change(num[0], num[1])``."""
    if isinstance(tree, Leaf):
        return f"num[{tree.index}]"
    return f"{tree.kind}({render_tree(tree.left)}, {render_tree(tree.right)})"


def eval_tree(tree: ExpressionTree, numbers: Sequence[Decimal]) -> Value:
    """Exact-decimal recursive evaluation. pct_change(a, b) = (a - b) / b and
    carries the percent flag; any zero divisor raises, never yielding NaN/inf."""

    def rec(t: ExpressionTree) -> Decimal:
        if isinstance(t, Leaf):
            if not 0 <= t.index < len(numbers):
                raise EvaluationError(f"leaf index {t.index} out of range")
            return numbers[t.index]
        a, b = rec(t.left), rec(t.right)
        try:
            if t.kind == "add":
                return a + b
            if t.kind == "sub":
                return a - b
            if t.kind == "mul":
                return a * b
            if t.kind in ("div", "ratio"):
                return a / b
            if t.kind == "pct_change":
                return (a - b) / b
        except (decimal.DivisionByZero, decimal.InvalidOperation, decimal.Overflow) as e:
            raise EvaluationError(f"{t.kind}: {e}") from e
        raise EvaluationError(f"unknown operator: {t.kind}")

    result = rec(tree)
    if not result.is_finite():
        raise EvaluationError("non-finite result")
    percent = isinstance(tree, Op) and tree.kind == "pct_change"
    return Value(kind="number", number=result, percent=percent)


def format_answer(v: Value) -> str:
    """Percents with one decimal ("12.0%"); plain numbers with minimal decimals.
    No explicit "+" sign (normalization treats it as noise anyway)."""
    if v.kind == "number" and v.percent:
        assert v.number is not None
        pct = (v.number * 100).quantize(Decimal("0.1"))
        return f"{pct}%"
    return format_value(v)


@dataclass
class ExpressionScore:
    pooled: np.ndarray
    alphas: np.ndarray
    scalar: float


def _tree_nodes(tree: ExpressionTree) -> list[ExpressionTree]:
    if isinstance(tree, Leaf):
        return [tree]
    return [tree] + _tree_nodes(tree.left) + _tree_nodes(tree.right)


def score_expression(
    tree: ExpressionTree,
    enc: Encoder,
    w: np.ndarray,
    surfaces: Sequence[str],
) -> ExpressionScore:
    """Attention-pool node embeddings: alpha = softmax(w . phi(node)) over all
    leaf and operator nodes; pooled = sum(alpha * phi); scalar = w . pooled."""
    if len(w) != enc.dimension:
        raise ValueError("weight vector dimension mismatch")
    nodes = _tree_nodes(tree)
    phis = np.stack(
        [enc.encode(surfaces[n.index] if isinstance(n, Leaf) else n.kind) for n in nodes]
    )
    logits = phis @ w
    logits = logits - logits.max()
    alphas = np.exp(logits)
    alphas /= alphas.sum()
    pooled = alphas @ phis
    return ExpressionScore(pooled=pooled, alphas=alphas, scalar=float(w @ pooled))


# --- enumeration ------------------------------------------------------------

OP_KEYWORDS = [
    ("growth", "pct_change"),
    ("change", "pct_change"),
    ("changed", "pct_change"),
    ("grew", "pct_change"),
    ("increase", "pct_change"),
    ("increased", "pct_change"),
    ("decrease", "pct_change"),
    ("decreased", "pct_change"),
    ("difference", "sub"),
    ("minus", "sub"),
    ("gap", "sub"),
    ("total", "add"),
    ("sum", "add"),
    ("combined", "add"),
    ("altogether", "add"),
    ("per", "ratio"),
    ("ratio", "ratio"),
    ("proportion", "ratio"),
    ("divided", "div"),
    ("times", "mul"),
    ("product", "mul"),
    ("multiplied", "mul"),
]

_TOKEN_RE = re.compile(r"[0-9a-z]+")
_YEAR_RE = re.compile(r"\b(1[89]\d{2}|2[01]\d{2})\b")

_STOPWORDS = {
    "what", "is", "the", "a", "an", "of", "in", "for", "to", "was", "were",
    "did", "how", "much", "and", "or", "on", "at", "by", "with", "s",
}


def _is_year_like(x: Decimal) -> bool:
    return x == x.to_integral_value() and Decimal(1800) <= x <= Decimal(2199)


@dataclass(frozen=True)
class _Operand:
    index: int
    value: Decimal
    surface: str
    group: str
    period: Optional[int]  # associated year, when detectable
    relevant: bool


def _detect_year_column(ctx: Context) -> Optional[int]:
    if ctx.table is None:
        return None
    for j, header in enumerate(ctx.table.headers):
        tokens = set(_TOKEN_RE.findall(header.lower()))
        if tokens & {"year", "years", "fy", "date"}:
            return j
    for j in range(len(ctx.table.headers)):
        cells = [row[j] for row in ctx.table.rows]
        if cells and all(c.kind == "number" and c.number is not None and _is_year_like(c.number) for c in cells):
            return j
    return None


def _build_operands(question: str, ctx: Context) -> list[_Operand]:
    content = set(_TOKEN_RE.findall(question.lower())) - _STOPWORDS
    year_col = _detect_year_column(ctx)
    passage_years: list[tuple[int, int]] = []
    if ctx.passage:
        passage_years = [(m.start(), int(m.group(0))) for m in _YEAR_RE.finditer(ctx.passage)]

    operands = []
    for i, (value, prov) in enumerate(ctx.numbers):
        if value.kind != "number" or value.number is None:
            continue
        period: Optional[int] = None
        if prov.source == "table":
            group = f"table:{prov.col}"
            if year_col is not None and ctx.table is not None:
                cell = ctx.table.rows[prov.row][year_col]
                if cell.kind == "number" and cell.number is not None and _is_year_like(cell.number):
                    period = int(cell.number)
                elif cell.kind == "date" and cell.date_value is not None:
                    period = cell.date_value.year
        else:
            group = "passage"
            preceding = [y for pos, y in passage_years if pos < prov.start]
            if preceding:
                period = preceding[-1]
        descriptor = prov.descriptor(ctx)
        desc_tokens = set(_TOKEN_RE.findall(descriptor.lower()))
        operands.append(
            _Operand(
                index=i,
                value=value.number,
                surface=value.raw or format_value(value),
                group=group,
                period=period,
                relevant=bool(desc_tokens & content),
            )
        )
    return operands


def _matched_ops(question: str) -> list[str]:
    tokens = set(_TOKEN_RE.findall(question.lower()))
    ops = []
    for keyword, op in OP_KEYWORDS:
        if keyword in tokens and op not in ops:
            ops.append(op)
    return ops


def _operand_pool(operands: list[_Operand]) -> list[_Operand]:
    pool = [o for o in operands if o.relevant] or list(operands)
    non_year = [o for o in pool if not _is_year_like(o.value)]
    return non_year or pool


def _pairs_for(pool: list[_Operand], directional: bool) -> list[tuple[_Operand, _Operand]]:
    """Ordered operand pairs, drawn within provenance groups when any group has
    two members. Directional ops pair (later period, earlier period) only."""
    groups: dict[str, list[_Operand]] = {}
    for o in pool:
        groups.setdefault(o.group, []).append(o)
    multi = [g for g in groups.values() if len(g) >= 2]
    sources = multi if multi else ([pool] if len(pool) >= 2 else [])
    pairs = []
    for group in sources:
        for a in group:
            for b in group:
                if a.index == b.index:
                    continue
                if directional and a.period is not None and b.period is not None and a.period != b.period:
                    if a.period < b.period:
                        continue
                pairs.append((a, b))
    return pairs


@dataclass
class EnumerationResult:
    candidates: list[ExpressionTree]
    eligible: list[ExpressionTree]  # candidates admissible for final selection
    surfaces: list[str]  # leaf index -> surface string
    values: list[Decimal]  # leaf index -> magnitude
    guided: bool


def enumerate_trees(
    question: str,
    ctx: Context,
    max_depth: int = 3,
    beam: int = 5,
    enc: Optional[Encoder] = None,
    w: Optional[np.ndarray] = None,
) -> EnumerationResult:
    """Keyword-guided candidate enumeration with beam-limited deepening.

    Question keywords select the operator set (change/growth -> pct_change,
    difference -> sub, total -> add, per/ratio -> ratio and div); with no
    keyword evidence all operators are considered. Single-operator trees are
    always kept; deeper trees are grown against the top-``beam`` per depth.
    Bare leaves appear only when no operator tree can be formed.
    """
    operands = _build_operands(question, ctx)
    surfaces = ["" for _ in ctx.numbers]
    values = [Decimal(0) for _ in ctx.numbers]
    for o in operands:
        surfaces[o.index] = o.surface
        values[o.index] = o.value
    if not operands:
        return EnumerationResult([], [], surfaces, values, guided=False)

    matched = _matched_ops(question)
    guided = bool(matched)
    ops = matched if guided else list(OP_NAMES)
    pool = _operand_pool(operands)

    candidates: list[ExpressionTree] = []
    seen: set[str] = set()

    def add(tree: ExpressionTree) -> None:
        key = render_tree(tree)
        if key in seen or (isinstance(tree, Op) and tree.depth > max_depth):
            return
        seen.add(key)
        candidates.append(tree)

    directional = {"pct_change"}
    for op in ops:
        for a, b in _pairs_for(pool, directional=op in directional):
            add(Op(op, Leaf(a.index), Leaf(b.index)))

    # full-group sum chains for additive questions
    if "add" in ops:
        groups: dict[str, list[_Operand]] = {}
        for o in pool:
            groups.setdefault(o.group, []).append(o)
        for group in groups.values():
            if len(group) >= 3 and len(group) - 1 <= max_depth:
                chain: ExpressionTree = Leaf(group[0].index)
                for o in group[1:]:
                    chain = Op("add", chain, Leaf(o.index))
                add(chain)

    eligible = list(candidates)

    if not candidates:
        for o in pool:
            add(Leaf(o.index))
        return EnumerationResult(candidates, list(candidates), surfaces, values, guided)

    def scalar(tree: ExpressionTree) -> float:
        if enc is None or w is None:
            return 0.0
        return score_expression(tree, enc, w, surfaces).scalar

    frontier = sorted(candidates, key=lambda t: (-scalar(t), render_tree(t)))[:beam]
    for _depth in range(2, max_depth + 1):
        grown: list[ExpressionTree] = []
        for t in frontier:
            for o in pool:
                for op in ops:
                    for combined in (Op(op, t, Leaf(o.index)), Op(op, Leaf(o.index), t)):
                        if combined.depth <= max_depth and render_tree(combined) not in seen:
                            grown.append(combined)
        if not grown:
            break
        grown.sort(key=lambda t: (-scalar(t), render_tree(t)))
        frontier = grown[:beam]
        for t in frontier:
            add(t)

    return EnumerationResult(candidates, eligible, surfaces, values, guided)


def symbolic_answer(
    question: str,
    ctx: Context,
    enc: Encoder,
    w: np.ndarray,
    max_depth: int = 3,
    beam: int = 5,
) -> Candidate:
    """Enumerate, score, evaluate the best tree. Keyword-guided questions select
    among single-operator trees; tie-break is shallower tree then canonical form."""
    if not ctx.numbers:
        return absent_candidate("num")
    enumeration = enumerate_trees(question, ctx, max_depth, beam, enc, w)
    pool = enumeration.eligible if enumeration.guided else enumeration.candidates
    if not pool:
        return absent_candidate("num")
    scored = [
        (score_expression(t, enc, w, enumeration.surfaces).scalar, t) for t in pool
    ]
    scored.sort(key=lambda st: (-st[0], st[1].depth, render_tree(st[1])))
    best = scored[0][1]
    try:
        value = eval_tree(best, enumeration.values)
    except EvaluationError:
        return absent_candidate("num")
    answer = format_answer(value)
    return Candidate(
        answer=answer,
        normalized=normalize_answer(answer),
        modality="num",
        heuristic=1.0,
        rationale=render_tree(best),
    )
