"""Multimodal context model: typed values, tables, number extraction, text encoding."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import date
from decimal import Decimal, InvalidOperation
from typing import Iterable, Optional, Protocol

import numpy as np

UNIT_SCALES = {"k": Decimal(10) ** 3, "m": Decimal(10) ** 6, "b": Decimal(10) ** 9}
CURRENCY_CHARS = "$€£¥₹"

_NUMBER_RE = re.compile(
    r"""
    (?P<sign>[+-]?)
    [$€£¥₹]?\s?
    (?P<mag>\d{1,3}(?:,\d{3})+|\d+)
    (?P<frac>\.\d+)?
    (?:[eE](?P<exp>[+-]?\d+))?
    \s?(?P<unit>[KkMmBb])?\b
    \s?(?P<pct>%)?
    """,
    re.VERBOSE,
)

_MONTHS = {
    "jan": 1, "january": 1, "feb": 2, "february": 2, "mar": 3, "march": 3,
    "apr": 4, "april": 4, "may": 5, "jun": 6, "june": 6, "jul": 7, "july": 7,
    "aug": 8, "august": 8, "sep": 9, "sept": 9, "september": 9, "oct": 10,
    "october": 10, "nov": 11, "november": 11, "dec": 12, "december": 12,
}

_ISO_DATE_RE = re.compile(r"^(\d{4})-(\d{2})(?:-(\d{2}))?$")
_MONTH_YEAR_RE = re.compile(r"^([A-Za-z]+)\.?\s+(\d{1,2}),?\s+(\d{4})$|^([A-Za-z]+)\.?\s+(\d{4})$")


class IngestError(ValueError):
    """Raised when a tabular source cannot be loaded."""


class SchemaError(ValueError):
    """Raised when table headers violate schema constraints."""


@dataclass(frozen=True)
class Value:
    """A typed cell/token value. ``raw`` keeps the source text for round-tripping
    and is excluded from equality."""

    kind: str  # "number" | "text" | "date"
    number: Optional[Decimal] = None
    percent: bool = False
    text: Optional[str] = None
    date_value: Optional[date] = None
    raw: str = field(default="", compare=False)

    def __str__(self) -> str:
        return format_value(self)


def format_number(x: Decimal) -> str:
    """Shortest plain-decimal rendering (no exponent, no trailing zeros)."""
    x = x.normalize()
    _sign, _digits, exp = x.as_tuple()
    if isinstance(exp, int) and exp >= 0:
        # kill the exponent form (5.6E+9 -> 5600000000)
        return str(int(x))
    s = format(x, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s or "0"


def format_value(v: Value) -> str:
    if v.kind == "number":
        assert v.number is not None
        if v.percent:
            return format_number(v.number * 100) + "%"
        return format_number(v.number)
    if v.kind == "date":
        assert v.date_value is not None
        return v.date_value.isoformat()
    return v.text or ""


def _try_parse_date(text: str) -> Optional[date]:
    m = _ISO_DATE_RE.match(text)
    if m:
        y, mo, d = int(m.group(1)), int(m.group(2)), int(m.group(3) or 1)
        try:
            return date(y, mo, d)
        except ValueError:
            return None
    m = _MONTH_YEAR_RE.match(text)
    if m:
        if m.group(1):
            name, day, year = m.group(1).lower(), int(m.group(2)), int(m.group(3))
        else:
            name, day, year = m.group(4).lower(), 1, int(m.group(5))
        if name in _MONTHS:
            try:
                return date(year, _MONTHS[name], day)
            except ValueError:
                return None
    return None


def _try_parse_number(text: str) -> Optional[Value]:
    m = _NUMBER_RE.fullmatch(text.strip())
    if not m:
        return None
    mag = m.group("mag").replace(",", "") + (m.group("frac") or "")
    if m.group("exp"):
        mag += "E" + m.group("exp")
    try:
        num = Decimal(m.group("sign") + mag)
    except InvalidOperation:
        return None
    unit = m.group("unit")
    if unit:
        num *= UNIT_SCALES[unit.lower()]
    percent = m.group("pct") is not None
    if percent:
        num /= 100
    return Value(kind="number", number=num, percent=percent, raw=text)


def parse_value(text: str) -> Value:
    """Parse a cell/token into a typed Value. Total: unrecognized input becomes text.

    Units K/M/B expand to 1e3/1e6/1e9; leading currency symbols are stripped;
    a trailing "%" yields the fractional magnitude with the percent flag set.
    """
    stripped = text.strip()
    if not stripped:
        return Value(kind="text", text="", raw=text)
    num = _try_parse_number(stripped)
    if num is not None:
        return Value(kind=num.kind, number=num.number, percent=num.percent, raw=text)
    d = _try_parse_date(stripped)
    if d is not None:
        return Value(kind="date", date_value=d, raw=text)
    return Value(kind="text", text=stripped, raw=text)


@dataclass(frozen=True)
class Schema:
    column_names: tuple[str, ...]
    column_types: tuple[str, ...]
    table_name: str = "t"

    def __post_init__(self) -> None:
        if len(self.column_names) != len(self.column_types):
            raise SchemaError("column_names and column_types length mismatch")


@dataclass(frozen=True)
class Table:
    headers: tuple[str, ...]
    column_types: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...]

    def __post_init__(self) -> None:
        folded = [h.casefold() for h in self.headers]
        if len(set(folded)) != len(folded):
            raise SchemaError("duplicate headers after case-folding")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise IngestError(f"row {i} has {len(row)} cells, expected {len(self.headers)}")

    @property
    def schema(self) -> Schema:
        return Schema(self.headers, self.column_types)

    def column_index(self, name: str) -> int:
        folded = name.casefold()
        for i, h in enumerate(self.headers):
            if h.casefold() == folded:
                return i
        raise KeyError(name)


def _infer_column_types(headers: tuple[str, ...], rows: list[tuple[Value, ...]]) -> tuple[str, ...]:
    types = []
    for j in range(len(headers)):
        counts: dict[str, int] = {}
        for row in rows:
            counts[row[j].kind] = counts.get(row[j].kind, 0) + 1
        if not counts:
            types.append("text")
        else:
            # majority kind; ties resolved by fixed preference
            order = {"number": 0, "date": 1, "text": 2}
            types.append(max(counts, key=lambda k: (counts[k], -order[k])))
    return tuple(types)


def make_table(headers: Iterable[str], raw_rows: Iterable[Iterable[str]]) -> Table:
    headers = tuple(str(h) for h in headers)
    rows = []
    for i, raw in enumerate(raw_rows):
        cells = tuple(parse_value(str(c)) for c in raw)
        if len(cells) != len(headers):
            raise IngestError(f"row {i} has {len(cells)} cells, expected {len(headers)}")
        rows.append(cells)
    return Table(headers, _infer_column_types(headers, rows), tuple(rows))


def load_table(source: str, format: str = "csv") -> Table:
    """Load a table from file content (csv with header row, or JSON
    {"headers": [...], "rows": [[...], ...]})."""
    if format == "csv":
        reader = csv.reader(io.StringIO(source))
        lines = list(reader)
        if not lines:
            raise IngestError("empty file")
        return make_table(lines[0], lines[1:])
    if format == "json":
        try:
            obj = json.loads(source)
        except json.JSONDecodeError as e:
            raise IngestError(f"invalid JSON table: {e}") from e
        if not isinstance(obj, dict) or "headers" not in obj:
            raise IngestError("JSON table must be an object with 'headers' and 'rows'")
        return make_table(obj["headers"], obj.get("rows", []))
    raise IngestError(f"unsupported format: {format}")


def table_to_csv(t: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(t.headers)
    for row in t.rows:
        w.writerow([c.raw for c in row])
    return buf.getvalue()


def table_to_json(t: Table) -> str:
    return json.dumps(
        {"headers": list(t.headers), "rows": [[c.raw for c in row] for row in t.rows]},
        ensure_ascii=False,
    )


@dataclass(frozen=True)
class Provenance:
    source: str  # "passage" | "table"
    start: int = -1  # char offset (passage)
    end: int = -1
    row: int = -1  # cell position (table)
    col: int = -1

    def descriptor(self, ctx: "Context") -> str:
        """Text describing where the number came from, used for relevance matching."""
        if self.source == "table" and ctx.table is not None:
            return ctx.table.headers[self.col]
        if self.source == "passage" and ctx.passage:
            lo = max(0, self.start - 60)
            hi = min(len(ctx.passage), self.end + 60)
            return ctx.passage[lo:hi]
        return ""


@dataclass(frozen=True)
class Context:
    table: Optional[Table] = None
    passage: Optional[str] = None
    numbers: tuple[tuple[Value, Provenance], ...] = ()
    schema: Optional[Schema] = None

    def __post_init__(self) -> None:
        if self.table is None and self.passage is None:
            raise ValueError("context requires at least one of table/passage")


def extract_numbers(question: str, ctx: Context) -> list[tuple[Value, Provenance]]:
    """All numeric values in passage then table cells, in document order."""
    out: list[tuple[Value, Provenance]] = []
    seen: set[tuple] = set()
    if ctx.passage:
        for m in _NUMBER_RE.finditer(ctx.passage):
            if not m.group(0).strip():
                continue
            v = _try_parse_number(m.group(0).strip())
            if v is None:
                continue
            key = (v.number, v.percent, m.start(), m.end())
            if key in seen:
                continue
            seen.add(key)
            out.append((v, Provenance("passage", start=m.start(), end=m.end())))
    if ctx.table is not None:
        for i, row in enumerate(ctx.table.rows):
            for j, cell in enumerate(row):
                if cell.kind == "number":
                    out.append((cell, Provenance("table", row=i, col=j)))
    return out


def build_context(
    table: Optional[Table] = None,
    passage: Optional[str] = None,
    question: str = "",
) -> Context:
    ctx = Context(table=table, passage=passage)
    numbers = tuple(extract_numbers(question, ctx))
    schema = table.schema if table is not None else None
    return Context(table=table, passage=passage, numbers=numbers, schema=schema)


class Encoder(Protocol):
    """Deterministic text-to-vector encoder."""

    dimension: int

    def encode(self, text: str) -> np.ndarray: ...


_TOKEN_RE = re.compile(r"[0-9a-z]+")


class HashingEncoder:
    """Seeded feature-hashing encoder: lowercase tokens, hash to signed buckets,
    sum, L2-normalize. Stable across processes (no PYTHONHASHSEED dependence)."""

    def __init__(self, dimension: int = 64, seed: int = 13) -> None:
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self._key = seed.to_bytes(8, "little", signed=True)

    def _token_hash(self, token: str) -> int:
        import hashlib

        h = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=8)
        return int.from_bytes(h.digest(), "little")

    def encode(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float64)
        for tok in _TOKEN_RE.findall(text.lower()):
            h = self._token_hash(tok)
            bucket = (h >> 1) % self.dimension
            sign = 1.0 if (h & 1) else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


@dataclass
class EncodedContext:
    q_vec: np.ndarray
    table_vecs: Optional[np.ndarray]  # rows x cols x d
    passage_vec: Optional[np.ndarray]
    number_vecs: np.ndarray  # n x d


def encode_context(enc: Encoder, q: str, ctx: Context) -> EncodedContext:
    """Encode question, table (cell + header sums), passage, and numbers."""
    d = enc.dimension
    q_vec = enc.encode(q)
    table_vecs = None
    if ctx.table is not None:
        t = ctx.table
        header_vecs = [enc.encode(h) for h in t.headers]
        table_vecs = np.zeros((len(t.rows), len(t.headers), d), dtype=np.float64)
        for i, row in enumerate(t.rows):
            for j, cell in enumerate(row):
                table_vecs[i, j] = enc.encode(cell.raw or format_value(cell)) + header_vecs[j]
    passage_vec = enc.encode(ctx.passage) if ctx.passage else None
    number_vecs = np.zeros((len(ctx.numbers), d), dtype=np.float64)
    for i, (v, _prov) in enumerate(ctx.numbers):
        number_vecs[i] = enc.encode(v.raw or format_value(v))
    return EncodedContext(q_vec, table_vecs, passage_vec, number_vecs)
