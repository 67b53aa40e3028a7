"""Dataset loading, EM / trust-accuracy metrics, batch runs with per-module
timing, and module/input ablations."""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .config import PipelineConfig
from .context import Context, Schema, Table, extract_numbers, make_table
from .normalize import normalize_answer
from .pipeline import Components, answer_question

MODULE_ABLATIONS = {
    "sql": "w/o SQL",
    "numsolver": "w/o NumSolver",
    "cot": "w/o CoT",
    "reranker": "w/o Reranker",
}
INPUT_ABLATIONS = {
    "tables": "w/o Tables",
    "passages": "w/o Passages",
    "numbers": "w/o Numbers",
    "schema": "w/o Schema",
}


class DatasetError(ValueError):
    """Malformed dataset file or record."""


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    question: str
    table: Optional[Table]
    passage: Optional[str]
    gold_answers: tuple[str, ...]
    trust_answer: Optional[str] = None
    modality_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if self.table is None and self.passage is None:
            raise DatasetError(f"record {self.id}: needs table or passage")
        if not self.gold_answers:
            raise DatasetError(f"record {self.id}: gold_answers must be non-empty")


def parse_record(obj: dict, index: int) -> DatasetRecord:
    try:
        table = None
        if obj.get("table") is not None:
            t = obj["table"]
            table = make_table(t["headers"], t.get("rows", []))
        return DatasetRecord(
            id=str(obj.get("id", index)),
            question=obj["question"],
            table=table,
            passage=obj.get("passage"),
            gold_answers=tuple(obj["gold_answers"]),
            trust_answer=obj.get("trust_answer"),
            modality_tag=obj.get("modality_tag"),
        )
    except DatasetError:
        raise
    except Exception as e:
        raise DatasetError(f"record {index}: {e}") from e


def load_dataset(path: str) -> list[DatasetRecord]:
    """JSONL, one record per line."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetError(f"record {i}: invalid JSON: {e}") from e
            records.append(parse_record(obj, i))
    return records


def exact_match(pred: Optional[str], golds: Sequence[str]) -> bool:
    if not golds:
        raise ValueError("golds must be non-empty")
    if pred is None:
        return False
    normalized = normalize_answer(pred)
    return any(normalized == normalize_answer(g) for g in golds)


def em(matches: Sequence[bool]) -> float:
    if not matches:
        raise ValueError("empty evaluation set")
    return sum(matches) / len(matches)


def trust_match(pred: Optional[str], record: DatasetRecord) -> bool:
    """Compare against the annotated trustworthy answer; records without one
    fall back to the first gold answer."""
    reference = record.trust_answer if record.trust_answer is not None else record.gold_answers[0]
    if pred is None:
        return False
    return normalize_answer(pred) == normalize_answer(reference)


def tw_accuracy(predictions: Sequence[Optional[str]], records: Sequence[DatasetRecord]) -> float:
    if not records:
        raise ValueError("empty evaluation set")
    return sum(trust_match(p, r) for p, r in zip(predictions, records)) / len(records)


def record_context(record: DatasetRecord, remove_inputs: frozenset[str] = frozenset()) -> Optional[Context]:
    """Build the per-record context, applying input-modality ablations.
    Returns None when ablation leaves no context at all (record abstains)."""
    table = None if "tables" in remove_inputs else record.table
    passage = None if "passages" in remove_inputs else record.passage
    if table is None and passage is None:
        return None
    ctx = Context(table=table, passage=passage)
    numbers = () if "numbers" in remove_inputs else tuple(extract_numbers(record.question, ctx))
    schema = None
    if table is not None:
        schema = table.schema
        if "schema" in remove_inputs:
            # strip inferred type information
            schema = Schema(schema.column_names, tuple("text" for _ in schema.column_names))
    return Context(table=table, passage=passage, numbers=numbers, schema=schema)


def run_batch(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    components: Components,
    tag: Optional[str] = None,
    disable: Sequence[str] = (),
    remove_inputs: Sequence[str] = (),
    label: str = "full",
    include_timings: bool = False,
    jobs: int = 1,
) -> dict:
    """Run the pipeline over a dataset; abstentions count as metric misses.

    Wall-clock timings are collected per module but included in the report only
    on request, so that default reports are byte-reproducible.
    """
    if not records:
        raise DatasetError("empty evaluation set")
    lam = cfg.resolve_lambda(tag)
    removed = frozenset(remove_inputs)

    def process(record: DatasetRecord):
        ctx = record_context(record, removed)
        if ctx is None:
            return None, {"sql": 0.0, "numsolver": 0.0, "cot": 0.0, "reranker": 0.0, "total": 0.0}
        outcome = answer_question(record.question, ctx, cfg, components, lam=lam, disable=disable)
        return outcome, outcome.timings_ms

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(process, records))
    else:
        results = [process(r) for r in records]

    per_record = []
    matches = []
    trust_matches = []
    timing_rows = []
    for record, (outcome, timings) in zip(records, results):
        prediction = outcome.answer if outcome is not None else None
        matched = exact_match(prediction, record.gold_answers)
        trusted = trust_match(prediction, record)
        matches.append(matched)
        trust_matches.append(trusted)
        timing_rows.append(timings)
        per_record.append(
            {
                "id": record.id,
                "prediction": prediction,
                "em": matched,
                "tw": trusted,
                "abstained": prediction is None,
            }
        )

    report = {
        "ablation": label,
        "em": em(matches),
        "tw_acc": sum(trust_matches) / len(records),
        "n": len(records),
        "per_record": per_record,
    }
    if include_timings:
        report["timings"] = summarize_timings(timing_rows)
    return report


def summarize_timings(rows: Sequence[dict[str, float]]) -> dict[str, dict[str, float]]:
    out = {}
    for key in ("sql", "numsolver", "cot", "reranker", "total"):
        values = [r[key] for r in rows]
        out[key] = {
            "mean_ms": statistics.fmean(values),
            "stdev_ms": statistics.stdev(values) if len(values) > 1 else 0.0,
        }
    return out


def ablate(
    records: Sequence[DatasetRecord],
    cfg: PipelineConfig,
    components: Components,
    targets: Sequence[str],
    tag: Optional[str] = None,
    jobs: int = 1,
) -> list[dict]:
    """One report per ablation target; targets name either a module
    (sql/numsolver/cot/reranker) or an input field (tables/passages/numbers/schema)."""
    reports = []
    for target in targets:
        if target in MODULE_ABLATIONS:
            reports.append(
                run_batch(
                    records, cfg, components, tag=tag,
                    disable=[target], label=MODULE_ABLATIONS[target], jobs=jobs,
                )
            )
        elif target in INPUT_ABLATIONS:
            reports.append(
                run_batch(
                    records, cfg, components, tag=tag,
                    remove_inputs=[target], label=INPUT_ABLATIONS[target], jobs=jobs,
                )
            )
        else:
            raise ValueError(f"unknown ablation target: {target}")
    return reports


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def report_to_csv(reports: Sequence[dict]) -> str:
    lines = ["ablation,em,tw_acc,n"]
    for r in reports:
        lines.append(f"{r['ablation']},{r['em']},{r['tw_acc']},{r['n']}")
    return "\n".join(lines) + "\n"
