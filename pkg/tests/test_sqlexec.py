from __future__ import annotations

import random
from decimal import Decimal

import pytest

from tabqa.context import Context, Table, Value, build_context, make_table
from tabqa.sqlexec import (
    Predicate,
    RuleBasedGenerator,
    SqlExecutionError,
    SqlQuery,
    SqlSyntaxError,
    execute,
    parse_sql,
    render_sql,
    structured_answer,
    validate_query,
)


class TestParse:
    def test_projection_with_where(self):
        q = parse_sql('SELECT "Revenue (B)" WHERE Year = 2022')
        assert q.columns == ("Revenue (B)",)
        assert q.where == (Predicate("Year", "=", Value(kind="number", number=Decimal(2022))),)

    def test_aggregate(self):
        q = parse_sql('SELECT SUM("Revenue (B)")')
        assert q.aggregate == ("SUM", "Revenue (B)")
        assert q.columns is None

    def test_select_from_syntax_error_offset(self):
        with pytest.raises(SqlSyntaxError) as exc:
            parse_sql("SELECT FROM")
        assert exc.value.offset == 7

    def test_unknown_aggregate_is_plain_column(self):
        # MEDIAN(x) is not an aggregate; '(' after a bare column is an error
        with pytest.raises(SqlSyntaxError):
            parse_sql("SELECT MEDIAN(x)")

    def test_keywords_case_insensitive(self):
        q = parse_sql("select Year where Year > 2020 order by Year desc limit 1")
        assert q.order_by == ("Year", False)
        assert q.limit == 1

    def test_empty_input(self):
        with pytest.raises(SqlSyntaxError):
            parse_sql("   ")

    def test_string_literal_and_contains(self):
        q = parse_sql("SELECT City WHERE Name CONTAINS 'van ''t'")
        assert q.where[0].op == "CONTAINS"
        assert q.where[0].literal.text == "van 't"


def random_query(rng: random.Random, table: Table) -> SqlQuery:
    headers = table.headers
    types = table.column_types

    def random_literal(j: int) -> Value:
        if rng.random() < 0.6 and table.rows:
            return rng.choice(table.rows)[j]
        if types[j] == "number":
            return Value(kind="number", number=Decimal(rng.randint(-20, 20)))
        return Value(kind="text", text=rng.choice(["alpha", "beta", "gamma", "x"]))

    where = []
    for _ in range(rng.randint(0, 3)):
        j = rng.randrange(len(headers))
        if types[j] == "number":
            op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
        elif types[j] == "text":
            op = rng.choice(["=", "!=", "CONTAINS"])
        else:
            op = rng.choice(["=", "!=", "<", ">"])
        lit = random_literal(j)
        if op == "CONTAINS" and lit.kind != "text":
            lit = Value(kind="text", text="a")
        where.append(Predicate(headers[j], op, lit))

    order_by = None
    if rng.random() < 0.5:
        order_by = (rng.choice(headers), rng.random() < 0.5)
    limit = rng.randint(1, 5) if rng.random() < 0.4 else None

    if rng.random() < 0.4:
        number_cols = [h for h, t in zip(headers, types) if t == "number"]
        if number_cols:
            fn = rng.choice(["COUNT", "SUM", "AVG", "MIN", "MAX"])
            return SqlQuery(aggregate=(fn, rng.choice(number_cols)), where=tuple(where),
                            order_by=order_by, limit=limit)
    cols = tuple(rng.sample(headers, rng.randint(1, len(headers))))
    return SqlQuery(columns=cols, where=tuple(where), order_by=order_by, limit=limit)


def random_table(rng: random.Random) -> Table:
    n_cols = rng.randint(1, 6)
    n_rows = rng.randint(0, 20)
    headers, cells = [], []
    for j in range(n_cols):
        kind = rng.choice(["number", "text"])
        headers.append(f"col{j}")
        if kind == "number":
            cells.append([str(rng.randint(-20, 20)) if rng.random() < 0.7
                          else f"{rng.randint(0, 99)}.{rng.randint(0, 9)}" for _ in range(n_rows)])
        else:
            cells.append([rng.choice(["alpha", "beta", "gamma", "delta x"]) for _ in range(n_rows)])
    rows = [[cells[j][i] for j in range(n_cols)] for i in range(n_rows)]
    return make_table(headers, rows)


# --- independent naive reference evaluator ----------------------------------

def ref_cell_key(v: Value):
    if v.kind == "number":
        return (0, v.number)
    if v.kind == "date":
        return (1, v.date_value)
    return (2, v.text or "")


def ref_pred(cell: Value, p: Predicate) -> bool:
    lit = p.literal
    if p.op == "CONTAINS":
        return (cell.kind == "text" and lit.kind == "text"
                and (lit.text or "").casefold() in (cell.text or "").casefold())
    if cell.kind != lit.kind:
        return p.op == "!="
    a = {"number": cell.number, "date": cell.date_value, "text": cell.text}[cell.kind]
    b = {"number": lit.number, "date": lit.date_value, "text": lit.text}[lit.kind]
    return {
        "=": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
    }[p.op]


def ref_execute(q: SqlQuery, t: Table):
    """Naive row scan, written independently of the engine."""
    idx = {h.casefold(): i for i, h in enumerate(t.headers)}
    kept = []
    for row in t.rows:
        if all(ref_pred(row[idx[p.column.casefold()]], p) for p in q.where):
            kept.append(row)
    if q.order_by:
        j = idx[q.order_by[0].casefold()]
        kept = sorted(kept, key=lambda r: ref_cell_key(r[j]), reverse=not q.order_by[1])
    if q.limit is not None:
        kept = kept[: q.limit]
    if q.aggregate:
        fn, col = q.aggregate
        j = idx[col.casefold()]
        if fn == "COUNT":
            return ("scalar", Decimal(len(kept)), len(kept))
        nums = [r[j].number for r in kept if r[j].kind == "number"]
        if fn == "SUM":
            return ("scalar", sum(nums, Decimal(0)), len(kept))
        if not nums:
            return ("error", None, None)
        if fn == "AVG":
            return ("scalar", sum(nums, Decimal(0)) / len(nums), len(kept))
        return ("scalar", min(nums) if fn == "MIN" else max(nums), len(kept))
    cols = [idx[c.casefold()] for c in q.columns]
    return ("rows", tuple(tuple(r[j] for j in cols) for r in kept), len(kept))


class TestExecute:
    def test_yoy_lookup(self, yoy_table):
        r = execute(parse_sql('SELECT "Revenue (B)" WHERE Year = 2022'), yoy_table)
        assert r.rows[0][0].number == Decimal("5.6")
        assert r.executed_ok

    def test_yoy_sum(self, yoy_table):
        r = execute(parse_sql('SELECT SUM("Revenue (B)")'), yoy_table)
        assert r.scalar.number == Decimal("10.6")

    def test_empty_filter_ok(self, yoy_table):
        r = execute(parse_sql("SELECT Year WHERE Year > 2030"), yoy_table)
        assert r.rows == ()
        assert r.row_count == 0
        assert r.executed_ok

    def test_unknown_column(self, yoy_table):
        with pytest.raises(SqlExecutionError):
            execute(parse_sql("SELECT nosuch"), yoy_table)

    def test_avg_over_zero_rows(self, yoy_table):
        with pytest.raises(SqlExecutionError):
            execute(parse_sql('SELECT AVG("Revenue (B)") WHERE Year = 1900'), yoy_table)

    def test_sum_over_zero_rows_is_zero(self, yoy_table):
        r = execute(parse_sql('SELECT SUM("Revenue (B)") WHERE Year = 1900'), yoy_table)
        assert r.scalar.number == Decimal(0)

    def test_does_not_mutate_table(self, yoy_table):
        before = yoy_table.rows
        execute(parse_sql("SELECT Year ORDER BY Year ASC"), yoy_table)
        assert yoy_table.rows == before
        assert yoy_table.rows[0][0].number == Decimal(2022)

    def test_oracle_equivalence_random(self):
        rng = random.Random(20240811)
        for _ in range(500):
            t = random_table(rng)
            q = random_query(rng, t)
            expected = ref_execute(q, t)
            if expected[0] == "error":
                with pytest.raises(SqlExecutionError):
                    execute(q, t)
                continue
            r = execute(q, t)
            if expected[0] == "scalar":
                assert r.scalar.number == expected[1]
            else:
                assert r.rows == expected[1]
            assert r.row_count == expected[2]

    def test_predicate_order_independent(self):
        rng = random.Random(7)
        for _ in range(50):
            t = random_table(rng)
            q = random_query(rng, t)
            if len(q.where) < 2:
                continue
            shuffled = list(q.where)
            rng.shuffle(shuffled)
            q2 = SqlQuery(q.columns, q.aggregate, tuple(shuffled), q.order_by, q.limit)
            try:
                r1 = execute(q, t)
            except SqlExecutionError:
                with pytest.raises(SqlExecutionError):
                    execute(q2, t)
                continue
            r2 = execute(q2, t)
            assert (r1.rows, r1.scalar, r1.row_count) == (r2.rows, r2.scalar, r2.row_count)


class TestRenderRoundTrip:
    def test_random_ast_roundtrip(self):
        rng = random.Random(99)
        for _ in range(300):
            t = random_table(rng)
            q = random_query(rng, t)
            assert parse_sql(render_sql(q)) == q

    def test_quoted_column_with_spaces(self):
        q = SqlQuery(columns=("Revenue (B)",))
        assert parse_sql(render_sql(q)) == q


class TestGenerator:
    def test_synonym_column_match(self, yoy_table):
        gen = RuleBasedGenerator({"net income": "net profit"})
        queries = gen.generate("What is net income in 2022?", yoy_table, yoy_table.schema)
        top = queries[0]
        assert top.columns == ("Net Profit (B)",)
        assert top.where[0].column == "Year"
        assert top.where[0].literal.number == Decimal(2022)

    def test_no_evidence_empty(self, yoy_table):
        gen = RuleBasedGenerator({})
        assert gen.generate("Who won the match?", yoy_table, yoy_table.schema) == []

    def test_aggregate_trigger(self, yoy_table):
        gen = RuleBasedGenerator({})
        queries = gen.generate("sum of revenue", yoy_table, yoy_table.schema)
        assert any(q.aggregate == ("SUM", "Revenue (B)") for q in queries)

    def test_validates_against_schema(self, yoy_table):
        q = SqlQuery(columns=("nope",))
        with pytest.raises(SqlExecutionError):
            validate_query(q, yoy_table.schema)


class TestStructuredAnswer:
    def test_yoy_net_income(self, yoy_table, yoy_context):
        gen = RuleBasedGenerator({"net income": "net profit"})
        c = structured_answer(gen, "What is net income in 2022?", yoy_context)
        assert c.present
        assert c.answer == "1.2"
        assert c.heuristic == 1.0

    def test_no_table_absent(self):
        ctx = build_context(passage="only a passage")
        c = structured_answer(RuleBasedGenerator({}), "what is x", ctx)
        assert not c.present

    def test_execution_failure_absent(self, yoy_context):
        class BadGen:
            def generate(self, question, table, schema):
                return [SqlQuery(aggregate=("AVG", "Revenue (B)"),
                                 where=(Predicate("Year", "=", Value(kind="number", number=Decimal(1))),))]

        c = structured_answer(BadGen(), "anything", yoy_context)
        assert not c.present
        assert c.heuristic == 0.0
