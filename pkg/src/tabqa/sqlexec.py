"""SQL-subset grammar, executor over one in-memory table, and a rule-based query generator.

Grammar:
    SELECT (col ("," col)* | FN "(" col ")")
        [WHERE pred (AND pred)*] [ORDER BY col (ASC|DESC)] [LIMIT n]
with a single implicit table, case-insensitive keywords, and double-quoted
column names for names with spaces.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Optional, Protocol

from .aggregate import Candidate, absent_candidate
from .context import Context, Schema, Table, Value, format_value, parse_value
from .normalize import normalize_answer

log = logging.getLogger(__name__)

AGGREGATES = ("COUNT", "SUM", "AVG", "MIN", "MAX")
KEYWORDS = {"SELECT", "WHERE", "AND", "ORDER", "BY", "ASC", "DESC", "LIMIT", "FROM", "CONTAINS"}
OPS = ("=", "!=", "<=", ">=", "<", ">")


class SqlSyntaxError(ValueError):
    def __init__(self, message: str, offset: int) -> None:
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class SqlExecutionError(ValueError):
    """Unknown column, type-mismatched predicate, or empty-set aggregate."""


@dataclass(frozen=True)
class Predicate:
    column: str
    op: str  # one of OPS or CONTAINS
    literal: Value


@dataclass(frozen=True)
class SqlQuery:
    columns: Optional[tuple[str, ...]] = None
    aggregate: Optional[tuple[str, str]] = None  # (fn, column)
    where: tuple[Predicate, ...] = ()
    order_by: Optional[tuple[str, bool]] = None  # (column, ascending)
    limit: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.columns is None) == (self.aggregate is None):
            raise ValueError("query must have exactly one of columns/aggregate")
        if self.limit is not None and self.limit <= 0:
            raise ValueError("limit must be positive")


@dataclass(frozen=True)
class ExecResult:
    rows: Optional[tuple[tuple[Value, ...], ...]]
    scalar: Optional[Value]
    row_count: int
    executed_ok: bool = True


# --- lexer / parser ---------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<qident>"(?:[^"]|"")*")
  | (?P<string>'(?:[^']|'')*')
  | (?P<op><=|>=|!=|<>|=|<|>)
  | (?P<punct>[(),])
  | (?P<word>[^\s'"(),<>=!]+)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int


def _lex(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup or "", m.group(0), pos))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    def _peek(self) -> Optional[_Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _next(self, expect: str) -> _Token:
        tok = self._peek()
        if tok is None:
            raise SqlSyntaxError(f"expected {expect}, found end of input", len(self.text))
        self.pos += 1
        return tok

    def _keyword(self, tok: _Token) -> str:
        return tok.text.upper() if tok.kind == "word" else ""

    def _expect_keyword(self, kw: str) -> None:
        tok = self._next(kw)
        if self._keyword(tok) != kw:
            raise SqlSyntaxError(f"expected {kw}", tok.offset)

    def _column(self) -> str:
        tok = self._next("column name")
        if tok.kind == "qident":
            return tok.text[1:-1].replace('""', '"')
        if tok.kind == "word":
            up = tok.text.upper()
            if up in KEYWORDS or up in AGGREGATES:
                raise SqlSyntaxError(f"reserved word {tok.text!r} cannot name a column", tok.offset)
            return tok.text
        raise SqlSyntaxError("expected column name", tok.offset)

    def _literal(self) -> Value:
        tok = self._next("literal")
        if tok.kind == "string":
            return parse_value(tok.text[1:-1].replace("''", "'"))
        if tok.kind == "word":
            return parse_value(tok.text)
        raise SqlSyntaxError("expected literal", tok.offset)

    def _predicate(self) -> Predicate:
        column = self._column()
        tok = self._next("comparison operator")
        if tok.kind == "op":
            op = "!=" if tok.text == "<>" else tok.text
        elif self._keyword(tok) == "CONTAINS":
            op = "CONTAINS"
        else:
            raise SqlSyntaxError("expected comparison operator", tok.offset)
        return Predicate(column, op, self._literal())

    def parse(self) -> SqlQuery:
        self._expect_keyword("SELECT")
        tok = self._peek()
        if tok is None:
            raise SqlSyntaxError("expected select list, found end of input", len(self.text))
        aggregate = None
        columns = None
        if tok.kind == "word" and tok.text.upper() in AGGREGATES:
            fn = tok.text.upper()
            self.pos += 1
            open_tok = self._next("(")
            if open_tok.text != "(":
                raise SqlSyntaxError("expected '('", open_tok.offset)
            col = self._column()
            close_tok = self._next(")")
            if close_tok.text != ")":
                raise SqlSyntaxError("expected ')'", close_tok.offset)
            aggregate = (fn, col)
        else:
            cols = [self._column()]
            while (nxt := self._peek()) is not None and nxt.text == ",":
                self.pos += 1
                cols.append(self._column())
            columns = tuple(cols)

        where: list[Predicate] = []
        order_by = None
        limit = None
        if (nxt := self._peek()) is not None and self._keyword(nxt) == "WHERE":
            self.pos += 1
            where.append(self._predicate())
            while (nxt := self._peek()) is not None and self._keyword(nxt) == "AND":
                self.pos += 1
                where.append(self._predicate())
        if (nxt := self._peek()) is not None and self._keyword(nxt) == "ORDER":
            self.pos += 1
            self._expect_keyword("BY")
            col = self._column()
            ascending = True
            if (nxt := self._peek()) is not None and self._keyword(nxt) in ("ASC", "DESC"):
                ascending = self._keyword(nxt) == "ASC"
                self.pos += 1
            order_by = (col, ascending)
        if (nxt := self._peek()) is not None and self._keyword(nxt) == "LIMIT":
            self.pos += 1
            tok = self._next("limit count")
            if not tok.text.isdigit() or int(tok.text) <= 0:
                raise SqlSyntaxError("expected positive integer limit", tok.offset)
            limit = int(tok.text)
        if (nxt := self._peek()) is not None:
            raise SqlSyntaxError(f"unexpected token {nxt.text!r}", nxt.offset)
        return SqlQuery(columns, aggregate, tuple(where), order_by, limit)


def parse_sql(text: str) -> SqlQuery:
    if not text.strip():
        raise SqlSyntaxError("empty query", 0)
    return _Parser(text).parse()


def _render_column(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _render_literal(v: Value) -> str:
    if v.kind == "number":
        return format_value(v)
    if v.kind == "date":
        return "'" + format_value(v) + "'"
    return "'" + (v.text or "").replace("'", "''") + "'"


def render_sql(q: SqlQuery) -> str:
    """Canonical text form; parse_sql(render_sql(q)) == q."""
    parts = ["SELECT"]
    if q.aggregate is not None:
        fn, col = q.aggregate
        parts.append(f"{fn}({_render_column(col)})")
    else:
        parts.append(", ".join(_render_column(c) for c in q.columns or ()))
    if q.where:
        parts.append("WHERE")
        parts.append(
            " AND ".join(f"{_render_column(p.column)} {p.op} {_render_literal(p.literal)}" for p in q.where)
        )
    if q.order_by is not None:
        col, ascending = q.order_by
        parts.append(f"ORDER BY {_render_column(col)} {'ASC' if ascending else 'DESC'}")
    if q.limit is not None:
        parts.append(f"LIMIT {q.limit}")
    return " ".join(parts)


# --- executor ---------------------------------------------------------------

_KIND_RANK = {"number": 0, "date": 1, "text": 2}


def _sort_key(v: Value) -> tuple:
    if v.kind == "number":
        return (0, v.number)
    if v.kind == "date":
        return (1, v.date_value)
    return (2, v.text or "")


def _resolve_column(t: Table, name: str) -> int:
    try:
        return t.column_index(name)
    except KeyError:
        raise SqlExecutionError(f"unknown column: {name}") from None


def _check_predicate_types(t: Table, p: Predicate, col: int) -> None:
    col_type = t.column_types[col]
    if p.op == "CONTAINS":
        if col_type != "text":
            raise SqlExecutionError(f"CONTAINS requires a text column, got {col_type}: {p.column}")
        if p.literal.kind != "text":
            raise SqlExecutionError(f"CONTAINS requires a text literal on {p.column}")
        return
    if p.op in ("<", "<=", ">", ">="):
        if col_type not in ("number", "date"):
            raise SqlExecutionError(f"ordering comparison requires number/date column: {p.column}")
    if p.literal.kind != col_type and p.op != "=" and p.op != "!=":
        raise SqlExecutionError(
            f"type mismatch on {p.column}: column is {col_type}, literal is {p.literal.kind}"
        )


def predicate_matches(cell: Value, op: str, literal: Value) -> bool:
    """Cell-vs-literal comparison; cells whose kind differs from the literal
    never satisfy =, <, <=, >, >= and always satisfy !=."""
    if op == "CONTAINS":
        if cell.kind != "text" or literal.kind != "text":
            return False
        return (literal.text or "").casefold() in (cell.text or "").casefold()
    if cell.kind != literal.kind:
        return op == "!="
    if cell.kind == "number":
        a, b = cell.number, literal.number
    elif cell.kind == "date":
        a, b = cell.date_value, literal.date_value
    else:
        a, b = cell.text, literal.text
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise SqlExecutionError(f"unknown operator: {op}")


def execute(q: SqlQuery, t: Table) -> ExecResult:
    """Filter by all predicates, apply order/limit, then project or aggregate."""
    pred_cols = [(_resolve_column(t, p.column), p) for p in q.where]
    for col, p in pred_cols:
        _check_predicate_types(t, p, col)

    rows = [row for row in t.rows if all(predicate_matches(row[c], p.op, p.literal) for c, p in pred_cols)]

    if q.order_by is not None:
        col = _resolve_column(t, q.order_by[0])
        rows.sort(key=lambda r: _sort_key(r[col]), reverse=not q.order_by[1])
    if q.limit is not None:
        rows = rows[: q.limit]

    if q.aggregate is not None:
        fn, col_name = q.aggregate
        col = _resolve_column(t, col_name)
        if fn == "COUNT":
            return ExecResult(None, Value(kind="number", number=Decimal(len(rows))), len(rows))
        values = [r[col].number for r in rows if r[col].kind == "number"]
        if fn == "SUM":
            total = sum(values, Decimal(0))
            return ExecResult(None, Value(kind="number", number=total), len(rows))
        if not values:
            raise SqlExecutionError(f"{fn} over zero rows")
        if fn == "AVG":
            result = sum(values, Decimal(0)) / Decimal(len(values))
        elif fn == "MIN":
            result = min(values)
        else:
            result = max(values)
        return ExecResult(None, Value(kind="number", number=result), len(rows))

    cols = [_resolve_column(t, c) for c in q.columns or ()]
    projected = tuple(tuple(r[c] for c in cols) for r in rows)
    return ExecResult(projected, None, len(projected))


# --- query generation -------------------------------------------------------


class QueryGenerator(Protocol):
    def generate(self, question: str, table: Table, schema: Schema) -> list[SqlQuery]: ...


AGGREGATE_TRIGGERS = [
    ("how many", "COUNT"),
    ("count", "COUNT"),
    ("sum", "SUM"),
    ("total", "SUM"),
    ("average", "AVG"),
    ("mean", "AVG"),
    ("largest", "MAX"),
    ("max", "MAX"),
    ("highest", "MAX"),
    ("smallest", "MIN"),
    ("min", "MIN"),
    ("lowest", "MIN"),
]

_WORD_RE = re.compile(r"[0-9a-z]+(?:\.[0-9]+)?%?")
_PAREN_RE = re.compile(r"\([^)]*\)")

DEFAULT_SYNONYMS = {
    "net income": "net profit",
    "earnings": "net profit",
    "sales": "revenue",
    "turnover": "revenue",
}


def load_synonyms(path: str) -> dict[str, str]:
    """One ``phrase<TAB>column`` mapping per line, UTF-8; blank lines and
    '#'-comments skipped."""
    table: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise ValueError(f"synonym line missing tab separator: {line!r}")
            phrase, target = line.split("\t", 1)
            table[phrase.strip().casefold()] = target.strip()
    return table


def _header_core_tokens(header: str) -> set[str]:
    core = _PAREN_RE.sub(" ", header)
    return set(_WORD_RE.findall(core.casefold()))


@dataclass
class RuleBasedGenerator:
    """Offline baseline: match question tokens to column names (case-folded,
    with a synonym table) and literals to cell values; emit projection and
    aggregate templates ranked by matched evidence."""

    synonyms: dict[str, str] | None = None

    def generate(self, question: str, table: Table, schema: Schema) -> list[SqlQuery]:
        syns = self.synonyms if self.synonyms is not None else DEFAULT_SYNONYMS
        qfold = question.casefold()
        qtokens = set(_WORD_RE.findall(qfold))
        for phrase, target in syns.items():
            if phrase in qfold:
                qtokens |= set(_WORD_RE.findall(target.casefold()))

        matched_cols: list[tuple[str, int]] = []  # (header, evidence)
        for header in table.headers:
            core = _header_core_tokens(header)
            if core and core <= qtokens:
                matched_cols.append((header, len(core)))

        predicates: list[Predicate] = []
        for tok in _WORD_RE.findall(qfold):
            lit = parse_value(tok)
            if lit.kind != "number":
                continue
            for j, header in enumerate(table.headers):
                if any(row[j] == lit for row in table.rows):
                    p = Predicate(header, "=", lit)
                    if p not in predicates:
                        predicates.append(p)

        agg_fn = next((fn for phrase, fn in AGGREGATE_TRIGGERS if phrase in qfold), None)

        pred_cols = {p.column for p in predicates}
        targets = [(h, ev) for h, ev in matched_cols if h not in pred_cols] or matched_cols
        if not targets and predicates:
            # literal evidence only: project the non-predicate columns
            targets = [(h, 0) for h in table.headers if h not in pred_cols]

        scored: list[tuple[float, SqlQuery]] = []

        def add(query: SqlQuery, score: float) -> None:
            try:
                validate_query(query, schema)
            except SqlExecutionError as e:
                log.warning("discarding generated query %r: %s", render_sql(query), e)
                return
            scored.append((score, query))

        # bare projections with no predicate or aggregate evidence are not
        # emitted: header overlap alone is too weak to commit to a lookup
        for header, evidence in targets:
            preds = tuple(p for p in predicates if p.column != header)
            if agg_fn is not None:
                add(SqlQuery(aggregate=(agg_fn, header), where=preds), 2 * evidence + len(preds) + 1)
                if preds:
                    add(SqlQuery(aggregate=(agg_fn, header)), 2 * evidence + 0.5)
            if preds:
                add(SqlQuery(columns=(header,), where=preds), 2 * evidence + len(preds))

        scored.sort(key=lambda sq: (-sq[0], render_sql(sq[1])))
        out: list[SqlQuery] = []
        for _score, query in scored:
            if query not in out:
                out.append(query)
        return out


def validate_query(q: SqlQuery, schema: Schema) -> None:
    names = {n.casefold(): i for i, n in enumerate(schema.column_names)}

    def check(name: str) -> int:
        if name.casefold() not in names:
            raise SqlExecutionError(f"unknown column: {name}")
        return names[name.casefold()]

    if q.aggregate is not None:
        fn, col = q.aggregate
        if fn not in AGGREGATES:
            raise SqlExecutionError(f"unknown aggregate: {fn}")
        i = check(col)
        if fn != "COUNT" and schema.column_types[i] != "number":
            raise SqlExecutionError(f"{fn} requires a number column: {col}")
    for c in q.columns or ():
        check(c)
    for p in q.where:
        i = check(p.column)
        if p.op == "CONTAINS" and schema.column_types[i] != "text":
            raise SqlExecutionError(f"CONTAINS requires a text column: {p.column}")
        if p.op in ("<", "<=", ">", ">=") and schema.column_types[i] not in ("number", "date"):
            raise SqlExecutionError(f"ordering comparison requires number/date column: {p.column}")
    if q.order_by is not None:
        check(q.order_by[0])


def structured_answer(gen: QueryGenerator, question: str, ctx: Context) -> Candidate:
    """Execute the top-ranked generated query; absent when no table, no
    candidate, or execution fails."""
    if ctx.table is None:
        return absent_candidate("sql")
    schema = ctx.schema or ctx.table.schema
    try:
        queries = gen.generate(question, ctx.table, schema)
    except Exception:
        # remote generators may be unreachable; the route abstains
        log.warning("query generation failed", exc_info=True)
        return absent_candidate("sql")
    if not queries:
        return absent_candidate("sql")
    try:
        result = execute(queries[0], ctx.table)
    except SqlExecutionError:
        return absent_candidate("sql")
    if result.scalar is not None:
        answer = format_value(result.scalar)
    elif result.rows:
        answer = format_value(result.rows[0][0])
    else:
        return absent_candidate("sql")
    return Candidate(
        answer=answer,
        normalized=normalize_answer(answer),
        modality="sql",
        heuristic=1.0 if result.executed_ok and result.row_count >= 1 else 0.0,
    )
