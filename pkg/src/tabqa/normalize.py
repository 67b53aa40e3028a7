"""Canonical answer strings: the equality relation behind voting, consistency, and EM."""

from __future__ import annotations

import re
from decimal import Decimal, InvalidOperation

from .context import UNIT_SCALES, format_number

_ARTICLES = {"a", "an", "the"}

_CANON_NUMBER_RE = re.compile(
    r"""
    (?P<sign>[+-]?)
    [$€£¥₹]?\s?
    (?P<mag>\d{1,3}(?:,\d{3})+|\d+)
    (?P<frac>\.\d+)?
    \s?(?P<unit>[kmb])?
    \s?(?P<pct>%)?
    """,
    re.VERBOSE,
)


def _canonical_numeric(text: str) -> str | None:
    m = _CANON_NUMBER_RE.fullmatch(text)
    if not m:
        return None
    try:
        num = Decimal(m.group("sign") + m.group("mag").replace(",", "") + (m.group("frac") or ""))
    except InvalidOperation:
        return None
    if m.group("unit"):
        num *= UNIT_SCALES[m.group("unit")]
    if m.group("pct"):
        return format_number(num) + "%"
    return format_number(num)


def normalize_answer(text: str) -> str:
    """Canonicalize an answer string for equality comparison.

    Lowercase, trim, strip a leading "+", surrounding quotes, and a trailing
    "."; collapse whitespace; numeric answers (with currency symbols, K/M/B
    suffixes, or "%") reduce to a shortest-decimal form; articles are dropped
    from multi-word text answers. Applied to a fixpoint so the result is
    idempotent (stripping can expose new strippable prefixes).
    """
    s = text
    for _ in range(10):
        out = _normalize_once(s)
        if out == s:
            return out
        s = out
    return s


def _normalize_once(text: str) -> str:
    s = text.strip().lower()
    s = re.sub(r"\s+", " ", s)
    if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
        s = s[1:-1].strip()
    s = s.rstrip(".")
    s = s.strip()
    if s.startswith("+"):
        s = s[1:].strip()
    numeric = _canonical_numeric(s)
    if numeric is not None:
        return numeric
    words = s.split(" ")
    if len(words) > 1:
        kept = [w for w in words if w not in _ARTICLES]
        if kept:
            s = " ".join(kept)
    return s
