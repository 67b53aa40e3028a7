"""Pairwise answer reranker: hashed bag-of-tokens features over
(question, context, answer pair) and a linear scoring head, trained with
binary cross-entropy on labeled better/worse answer pairs."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

_TOKEN_RE = re.compile(r"[0-9a-z%$.]+")

DEFAULT_LR = 2e-5
DEFAULT_BATCH_SIZE = 16
DEFAULT_MAX_LENGTH = 384
MIN_PAIRS = 100


@dataclass(frozen=True)
class RankPair:
    question: str
    context: str
    better: str
    worse: str


@dataclass(frozen=True)
class RerankerConfig:
    buckets: int = 256
    max_length: int = DEFAULT_MAX_LENGTH
    seed: int = 13


def _tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class PairwiseReranker(nn.Module):
    """score(q, C, a, b): linear head over [q-bag; C-bag; a-bag - b-bag].

    The answer segments enter as a difference, so equal answers score 0 and
    the score carries the a-vs-b preference; question/context segments
    condition the head without being assumed to cancel.
    """

    def __init__(self, config: RerankerConfig | None = None) -> None:
        super().__init__()
        self.config = config or RerankerConfig()
        self._key = self.config.seed.to_bytes(8, "little")
        self.head = nn.Linear(3 * self.config.buckets, 1)
        generator = torch.Generator().manual_seed(self.config.seed)
        with torch.no_grad():
            self.head.weight.normal_(0.0, 0.05, generator=generator)
            self.head.bias.zero_()

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8, key=self._key)
        return int.from_bytes(digest.digest(), "little") % self.config.buckets

    def _bag(self, tokens: Sequence[str]) -> torch.Tensor:
        vec = torch.zeros(self.config.buckets)
        for t in tokens:
            vec[self._bucket(t)] += 1.0
        return vec

    def featurize(self, question: str, context: str, answer_a: str, answer_b: str) -> torch.Tensor:
        # combined input is length-capped; answers keep priority so long
        # contexts cannot crowd out the pair being compared
        a = _tokens(answer_a)[:64]
        b = _tokens(answer_b)[:64]
        budget = max(self.config.max_length - len(a) - len(b), 0)
        q = _tokens(question)[: min(64, budget)]
        c = _tokens(context)[: budget - len(q)]
        return torch.cat([self._bag(q), self._bag(c), self._bag(a) - self._bag(b)])

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        return self.head(features).squeeze(-1)

    @torch.no_grad()
    def score(self, question: str, context: str, answer_a: str, answer_b: str) -> float:
        return float(self(self.featurize(question, context, answer_a, answer_b)))


@dataclass
class TrainResult:
    model: PairwiseReranker
    val_accuracy: float
    epochs_run: int


def pairwise_accuracy(model: PairwiseReranker, pairs: Sequence[RankPair]) -> float:
    if not pairs:
        raise ValueError("empty pair set")
    hits = sum(
        1 for p in pairs if model.score(p.question, p.context, p.better, p.worse) > 0
    )
    return hits / len(pairs)


def train_reranker(
    pairs: Sequence[RankPair],
    lr: float = DEFAULT_LR,
    batch_size: int = DEFAULT_BATCH_SIZE,
    max_length: int = DEFAULT_MAX_LENGTH,
    max_epochs: int = 300,
    patience: int = 20,
    val_fraction: float = 0.2,
    seed: int = 13,
) -> TrainResult:
    """Fit the pairwise head with BCE; each pair is seen in both orders
    (labels 1/0). Early stopping on validation loss."""
    if len(pairs) < MIN_PAIRS:
        raise ValueError(
            f"refusing to train on {len(pairs)} pairs; need at least {MIN_PAIRS}"
        )
    torch.manual_seed(seed)
    model = PairwiseReranker(RerankerConfig(max_length=max_length, seed=seed))

    shuffled = list(pairs)
    generator = torch.Generator().manual_seed(seed)
    order = torch.randperm(len(shuffled), generator=generator).tolist()
    shuffled = [shuffled[i] for i in order]
    n_val = max(1, int(len(shuffled) * val_fraction))
    val_pairs, train_pairs = shuffled[:n_val], shuffled[n_val:]

    def features_and_labels(subset: Sequence[RankPair]) -> tuple[torch.Tensor, torch.Tensor]:
        xs, ys = [], []
        for p in subset:
            xs.append(model.featurize(p.question, p.context, p.better, p.worse))
            ys.append(1.0)
            xs.append(model.featurize(p.question, p.context, p.worse, p.better))
            ys.append(0.0)
        return torch.stack(xs), torch.tensor(ys)

    x_train, y_train = features_and_labels(train_pairs)
    x_val, y_val = features_and_labels(val_pairs)

    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    loss_fn = nn.BCEWithLogitsLoss()
    best_val = float("inf")
    best_state = {k: v.clone() for k, v in model.state_dict().items()}
    stale = 0
    epochs_run = 0
    for epoch in range(max_epochs):
        epochs_run = epoch + 1
        perm = torch.randperm(len(x_train), generator=generator)
        model.train()
        for start in range(0, len(perm), batch_size):
            idx = perm[start : start + batch_size]
            optimizer.zero_grad()
            loss = loss_fn(model(x_train[idx]), y_train[idx])
            loss.backward()
            optimizer.step()
        model.eval()
        with torch.no_grad():
            val_loss = float(loss_fn(model(x_val), y_val))
        if val_loss < best_val - 1e-6:
            best_val = val_loss
            best_state = {k: v.clone() for k, v in model.state_dict().items()}
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break
    model.load_state_dict(best_state)
    model.eval()
    return TrainResult(model, pairwise_accuracy(model, val_pairs), epochs_run)


def save_model(model: PairwiseReranker, path: str) -> None:
    torch.save(
        {
            "config": {
                "buckets": model.config.buckets,
                "max_length": model.config.max_length,
                "seed": model.config.seed,
            },
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_model(path: str) -> PairwiseReranker:
    artifact = torch.load(path, map_location="cpu", weights_only=True)
    model = PairwiseReranker(RerankerConfig(**artifact["config"]))
    model.load_state_dict(artifact["state_dict"])
    model.eval()
    return model
