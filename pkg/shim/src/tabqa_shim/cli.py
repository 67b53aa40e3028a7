"""Service and training entry points."""

from __future__ import annotations

import json
import sys

import click

from .backends import MockBackend, RerankerBackend
from .reranker import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_LR,
    DEFAULT_MAX_LENGTH,
    RankPair,
    save_model,
    train_reranker,
)


@click.group()
def main() -> None:
    """Model shim: serving and reranker training."""


@main.command()
@click.option("--port", type=int, default=8731, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--mock", is_flag=True, help="Serve deterministic scripted outputs.")
@click.option("--reranker", "reranker_path", type=click.Path(exists=True), default=None,
              help="Trained reranker artifact for /v1/rank.")
def serve(port: int, host: str, mock: bool, reranker_path: str | None) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .app import create_app

    if reranker_path:
        backend = RerankerBackend(model_path=reranker_path)
        backend.load()
    elif mock:
        backend = MockBackend()
    else:
        click.echo("error: pass --mock or --reranker PATH", err=True)
        sys.exit(64)
    uvicorn.run(create_app(backend), host=host, port=port)


@main.command()
@click.argument("pairs_file", type=click.Path(exists=True))
@click.option("--out", required=True, help="Path for the saved model artifact.")
@click.option("--lr", type=float, default=DEFAULT_LR, show_default=True)
@click.option("--batch-size", type=int, default=DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--max-length", type=int, default=DEFAULT_MAX_LENGTH, show_default=True)
@click.option("--max-epochs", type=int, default=300, show_default=True)
@click.option("--seed", type=int, default=13, show_default=True)
def train(pairs_file: str, out: str, lr: float, batch_size: int,
          max_length: int, max_epochs: int, seed: int) -> None:
    """Fine-tune the pairwise reranker on a JSONL pair dataset.

    Each line: {"question": ..., "context": ..., "better": ..., "worse": ...}
    """
    pairs = []
    with open(pairs_file, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            pairs.append(RankPair(obj["question"], obj["context"],
                                  obj["better"], obj["worse"]))
    try:
        result = train_reranker(pairs, lr=lr, batch_size=batch_size,
                                max_length=max_length, max_epochs=max_epochs, seed=seed)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)
    save_model(result.model, out)
    click.echo(f"val_accuracy={result.val_accuracy:.3f} epochs={result.epochs_run} -> {out}")


if __name__ == "__main__":
    main()
