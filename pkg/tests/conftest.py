from __future__ import annotations

import pytest

from tabqa.config import PipelineConfig
from tabqa.context import build_context, make_table
from tabqa.cot import MockClient, build_prompt, prompt_digest
from tabqa.pipeline import build_components

YOY_QUESTION = "What is the YoY change in revenue?"
YOY_PASSAGE = (
    "The revenue for 2022 was $5.6B, while for 2021 it was $5.0B. "
    "The company's net profit also increased year-over-year. "
    "Table below shows quarterly breakdowns."
)
YOY_TRACE = (
    "Step 1: Revenue in 2022 = $5.6B; in 2021 = $5.0B. "
    "Step 2: Increase = $0.6B. "
    "Step 3: $0.6B/$5.0B = 12%. Final Answer: +12.0%."
)


@pytest.fixture
def yoy_table():
    return make_table(
        ["Year", "Revenue (B)", "Net Profit (B)"],
        [["2022", "5.6", "1.2"], ["2021", "5.0", "1.0"]],
    )


@pytest.fixture
def yoy_context(yoy_table):
    return build_context(table=yoy_table, passage=YOY_PASSAGE, question=YOY_QUESTION)


@pytest.fixture
def default_config():
    return PipelineConfig()


@pytest.fixture
def yoy_components(default_config, yoy_context):
    components = build_components(default_config)
    prompt = build_prompt(YOY_QUESTION, yoy_context, components.prompt)
    components.gen_client = MockClient({prompt_digest(prompt): [YOY_TRACE]})
    return components


YOY_TABLE_RAW = {
    "headers": ["Year", "Revenue (B)", "Net Profit (B)"],
    "rows": [["2022", "5.6", "1.2"], ["2021", "5.0", "1.0"]],
}

# ten-record regression batch exercising all three routes, abstention, trust
# annotations, and vote ties
RAW_RECORDS = [
    {"id": "r1", "question": YOY_QUESTION, "table": YOY_TABLE_RAW,
     "passage": YOY_PASSAGE, "gold_answers": ["12%"]},
    {"id": "r2", "question": "What is net income in 2022?", "table": YOY_TABLE_RAW,
     "gold_answers": ["1.2"]},
    {"id": "r3", "question": "What is the sum of revenue?", "table": YOY_TABLE_RAW,
     "gold_answers": ["10.6"]},
    {"id": "r4", "question": "What is the difference between x and y?",
     "passage": "x was 10 and y was 4.", "gold_answers": ["6"]},
    {"id": "r5", "question": "Who is the chief executive?",
     "passage": "The chief executive is Jane Smith.", "gold_answers": ["Jane Smith"]},
    {"id": "r6", "question": "What is net income in 2021?", "table": YOY_TABLE_RAW,
     "gold_answers": ["1.0"]},
    {"id": "r7", "question": "How many units shipped?",
     "passage": "The company shipped 100 units.",
     "gold_answers": ["100", "one hundred"], "trust_answer": "100"},
    {"id": "r8", "question": "What was the growth in profit?",
     "passage": "Profit rose from 4.0 in 2020 to 5.0 in 2021.", "gold_answers": ["25%"]},
    {"id": "r9", "question": "What is the total?",
     "passage": "No figures were disclosed.", "gold_answers": ["42"]},
    {"id": "r10", "question": "Which region led?",
     "passage": "Both the North region and the South region performed well.",
     "gold_answers": ["North"]},
]

COT_TRACES = {
    "r1": [YOY_TRACE],
    "r2": ["The table shows 1.2 for 2022. Final Answer: 1.2."],
    "r3": ["5.6 plus 5.0 is 10.6. Final Answer: 10.6."],
    "r4": ["10 minus 4 is 6. Final Answer: 6."],
    "r5": ["The passage names the chief executive. Final Answer: Jane Smith."],
    "r6": ["Misreading the table. Final Answer: 9.9."],
    "r7": ["The passage says 100 units. Final Answer: 100."],
    "r8": ["(5.0 - 4.0) / 4.0 = 25%. Final Answer: 25%."],
    # r9 intentionally unscripted: every route abstains
    "r10": ["Final Answer: North.", "Final Answer: South."],
}


def fixture_records():
    from tabqa.evaluate import parse_record

    return [parse_record(obj, i) for i, obj in enumerate(RAW_RECORDS)]


def wire_mock(components, records):
    """Point the generation client at scripted traces for each record's
    full-context prompt."""
    from tabqa.evaluate import record_context

    fixtures = {}
    for rec in records:
        traces = COT_TRACES.get(rec.id)
        if not traces:
            continue
        ctx = record_context(rec)
        prompt = build_prompt(rec.question, ctx, components.prompt)
        fixtures[prompt_digest(prompt)] = traces
    components.gen_client = MockClient(fixtures)
    return fixtures


@pytest.fixture
def batch_records():
    return fixture_records()


@pytest.fixture
def batch_components(default_config, batch_records):
    components = build_components(default_config)
    wire_mock(components, batch_records)
    return components
