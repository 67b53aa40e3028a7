"""Command-line surface: single-question answering, batch evaluation,
ablations, and timing benchmarks."""

from __future__ import annotations

import json
import os
import sys
from typing import Optional

import click

from .config import PipelineConfig, load_config
from .context import build_context, load_table
from .evaluate import (
    DatasetError,
    MODULE_ABLATIONS,
    INPUT_ABLATIONS,
    ablate,
    load_dataset,
    report_to_json,
    run_batch,
)
from .pipeline import build_components, answer_question

EXIT_ABSTAIN = 1
EXIT_DATASET = 2
EXIT_USAGE = 64


def _load_cfg(config_path: Optional[str]) -> PipelineConfig:
    return load_config(config_path)


def _jobs(cfg: PipelineConfig, override: Optional[int]) -> int:
    if override is not None:
        return max(1, override)
    if cfg.jobs > 0:
        return cfg.jobs
    return os.cpu_count() or 1


@click.group()
def main() -> None:
    """Multimodal table question answering."""


@main.command()
@click.argument("question")
@click.option("--table-file", type=click.Path(exists=True), help="CSV or JSON table file.")
@click.option("--table-format", type=click.Choice(["csv", "json"]), default=None)
@click.option("--passage", default=None, help="Free-text passage context.")
@click.option("--config", "config_path", default=None, help="Config file path.")
@click.option("--explain", is_flag=True, help="Print the full aggregation JSON.")
def answer(question, table_file, table_format, passage, config_path, explain) -> None:
    """Answer one question against a table and/or passage."""
    if table_file is None and passage is None:
        click.echo("error: provide at least one of --table-file/--passage", err=True)
        sys.exit(EXIT_USAGE)
    cfg = _load_cfg(config_path)
    table = None
    if table_file:
        fmt = table_format or ("json" if table_file.endswith(".json") else "csv")
        with open(table_file, encoding="utf-8") as fh:
            table = load_table(fh.read(), fmt)
    ctx = build_context(table=table, passage=passage, question=question)
    components = build_components(cfg)
    outcome = answer_question(question, ctx, cfg, components)
    if explain:
        click.echo(json.dumps(outcome.aggregation.to_dict(), sort_keys=True, indent=2))
    if outcome.answer is None:
        click.echo("no module produced a candidate", err=True)
        sys.exit(EXIT_ABSTAIN)
    click.echo(outcome.answer)


def _run_eval(dataset, config_path, tag, ablate_list, out, timings, jobs_override):
    cfg = _load_cfg(config_path)
    try:
        records = load_dataset(dataset)
        if not records:
            raise DatasetError("empty evaluation set")
    except (DatasetError, OSError) as e:
        click.echo(f"dataset error: {e}", err=True)
        sys.exit(EXIT_DATASET)
    components = build_components(cfg)
    jobs = _jobs(cfg, jobs_override)
    try:
        reports = [
            run_batch(records, cfg, components, tag=tag, include_timings=timings, jobs=jobs)
        ]
        if ablate_list:
            targets = [t.strip() for t in ablate_list.split(",") if t.strip()]
            reports.extend(ablate(records, cfg, components, targets, tag=tag, jobs=jobs))
    except DatasetError as e:
        click.echo(f"dataset error: {e}", err=True)
        sys.exit(EXIT_DATASET)

    def variant_filename(label: str) -> str:
        slug = label.replace("w/o ", "wo_").replace(" ", "_").lower()
        return f"report_{slug}.json" if label != "full" else "report.json"

    if out is None:
        for report in reports:
            click.echo(report_to_json(report), nl=False)
    elif len(reports) == 1 and not os.path.isdir(out):
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(report_to_json(reports[0]))
    else:
        os.makedirs(out, exist_ok=True)
        for report in reports:
            path = os.path.join(out, variant_filename(report["ablation"]))
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(report_to_json(report))
            click.echo(path)


@main.command("eval")
@click.argument("dataset", type=click.Path())
@click.option("--config", "config_path", default=None)
@click.option("--tag", default=None, help="Dataset tag (wtq/ftq) for the lambda default.")
@click.option("--ablate", "ablate_list", default=None, help="Comma-separated ablation targets.")
@click.option("--out", default=None, help="Report file, or directory for multiple variants.")
@click.option("--timings", is_flag=True, help="Include wall-clock timings (non-reproducible).")
@click.option("--jobs", type=int, default=None, help="Parallel records (default: logical cores).")
def eval_cmd(dataset, config_path, tag, ablate_list, out, timings, jobs) -> None:
    """Evaluate a JSONL dataset; write EM/TwAccuracy report(s)."""
    _run_eval(dataset, config_path, tag, ablate_list, out, timings, jobs)


@main.command("ablate")
@click.argument("dataset", type=click.Path())
@click.option("--config", "config_path", default=None)
@click.option("--tag", default=None)
@click.option(
    "--ablate", "ablate_list",
    default=",".join(MODULE_ABLATIONS),
    show_default=True,
    help="Comma-separated targets: " + ",".join([*MODULE_ABLATIONS, *INPUT_ABLATIONS]),
)
@click.option("--out", default=None)
@click.option("--jobs", type=int, default=None)
def ablate_cmd(dataset, config_path, tag, ablate_list, out, jobs) -> None:
    """Shorthand for eval --ablate."""
    _run_eval(dataset, config_path, tag, ablate_list, out, False, jobs)


@main.command()
@click.argument("dataset", type=click.Path())
@click.option("--config", "config_path", default=None)
@click.option("--tag", default=None)
@click.option("--jobs", type=int, default=None)
def bench(dataset, config_path, tag, jobs) -> None:
    """Per-module latency table (mean/stddev ms)."""
    cfg = _load_cfg(config_path)
    try:
        records = load_dataset(dataset)
        if not records:
            raise DatasetError("empty evaluation set")
    except (DatasetError, OSError) as e:
        click.echo(f"dataset error: {e}", err=True)
        sys.exit(EXIT_DATASET)
    components = build_components(cfg)
    report = run_batch(
        records, cfg, components, tag=tag, include_timings=True, jobs=_jobs(cfg, jobs)
    )
    rows = [
        ("SQL", "sql"),
        ("NumSolver", "numsolver"),
        ("CoT", "cot"),
        ("Reranker", "reranker"),
        ("Total", "total"),
    ]
    timings = report["timings"]
    click.echo(f"{'Module':<12}{'Mean (ms)':>12}{'Stddev (ms)':>14}")
    for name, key in rows:
        t = timings[key]
        click.echo(f"{name:<12}{t['mean_ms']:>12.3f}{t['stdev_ms']:>14.3f}")


if __name__ == "__main__":
    main()
