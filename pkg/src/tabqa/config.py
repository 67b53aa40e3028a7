"""Pipeline configuration: defaults, flat key=value config files, env override."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from typing import Optional

CONFIG_ENV_VAR = "TABQA_CONFIG"

LAMBDA_BY_TAG = {"wtq": 0.3, "ftq": 0.4}
DEFAULT_LAMBDA = 0.3


@dataclass
class PipelineConfig:
    lam: Optional[float] = None  # consistency trust weight; per-dataset default when unset
    k: int = 5
    temperature: float = 0.3
    top_p: float = 0.95
    dimension: int = 64
    max_depth: int = 3
    beam: int = 5
    seed: int = 13
    shim_url: Optional[str] = None
    few_shot_file: Optional[str] = None
    synonyms_file: Optional[str] = None
    fixtures_file: Optional[str] = None
    jobs: int = 0  # 0 = logical cores

    def __post_init__(self) -> None:
        if self.lam is not None and self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.dimension <= 0 or self.beam <= 0 or self.max_depth < 1:
            raise ValueError("dimension, beam, max_depth must be positive")

    def resolve_lambda(self, tag: Optional[str] = None) -> float:
        if self.lam is not None:
            return self.lam
        return LAMBDA_BY_TAG.get((tag or "").lower(), DEFAULT_LAMBDA)


_KEY_MAP = {
    "lambda": "lam",
    "k": "k",
    "temperature": "temperature",
    "top_p": "top_p",
    "dimension": "dimension",
    "max_depth": "max_depth",
    "beam": "beam",
    "seed": "seed",
    "shim_url": "shim_url",
    "few_shot_file": "few_shot_file",
    "synonyms_file": "synonyms_file",
    "fixtures_file": "fixtures_file",
    "jobs": "jobs",
}
_FIELD_TO_KEY = {v: k for k, v in _KEY_MAP.items()}

_INT_FIELDS = {"k", "dimension", "max_depth", "beam", "seed", "jobs"}
_FLOAT_FIELDS = {"lam", "temperature", "top_p"}


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """Load a flat ``key = value`` config file; missing keys keep defaults.
    With no path, honors the TABQA_CONFIG environment variable."""
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        return PipelineConfig()
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in _KEY_MAP:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            name = _KEY_MAP[key]
            if name in _INT_FIELDS:
                values[name] = int(raw)
            elif name in _FLOAT_FIELDS:
                values[name] = float(raw)
            else:
                values[name] = raw
    return PipelineConfig(**values)


def save_config(cfg: PipelineConfig, path: str) -> None:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        lines.append(f"{_FIELD_TO_KEY[f.name]} = {value}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
