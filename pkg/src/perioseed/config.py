"""Experiment configuration: JSON file, flag overrides, environment override.

Schema (all keys optional unless a command requires them):

    {
      "corpus": "notes.jsonl",
      "gold": "gold.jsonl",
      "rules": "rules.jsonl",
      "examples_file": "examples.jsonl",
      "out": "runs/exp1",
      "rng_seed": 7,
      "sample_size": 25,
      "negative_ratio": "1/4",
      "generation_type": "combined",
      "backend": {"type": "mock", "url": "", "max_tokens": 16,
                   "temperature": 0.0, "stop": ["\n"], "concurrency": 4,
                   "timeout": 120.0, "retries": 3},
      "mock": {"mode": "oracle", "p_hallucinate": 0.0, "p_malformed": 0.0,
                "p_extraneous": 0.0, "rng_seed": 0},
      "grid": {"sample_sizes": [15, 25, 50],
                "negative_ratios": ["1/3", "1/4"],
                "generation_types": ["combined", "separate"]}
    }

The PERIOSEED_BACKEND_URL environment variable overrides backend.url.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .backend import BackendSettings, MockConfig
from .prompting import PromptConfig, parse_ratio

ENV_BACKEND_URL = "PERIOSEED_BACKEND_URL"


class ConfigError(ValueError):
    """Unusable experiment configuration."""


@dataclass(frozen=True)
class GridSpec:
    sample_sizes: tuple[int, ...] = (15, 25, 50)
    negative_ratios: tuple[Fraction, ...] = (Fraction(1, 3), Fraction(1, 4))
    generation_types: tuple[str, ...] = ("combined", "separate")


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: Optional[str] = None
    gold: Optional[str] = None
    rules: Optional[str] = None
    examples_file: Optional[str] = None
    out: Optional[str] = None
    rng_seed: int = 0
    sample_size: int = 25
    negative_ratio: Fraction = Fraction(1, 4)
    generation_type: str = "combined"
    backend: BackendSettings = field(default_factory=BackendSettings)
    grid: GridSpec = field(default_factory=GridSpec)

    def prompt_config(self) -> PromptConfig:
        return PromptConfig(
            sample_size=self.sample_size,
            negative_ratio=self.negative_ratio,
            generation_type=self.generation_type,
            rng_seed=self.rng_seed,
        )

    def to_dict(self) -> dict:
        """JSON-safe echo of the configuration, for manifests.

        The output directory is omitted so identical runs into different
        directories stay byte-identical.
        """
        return {
            "corpus": self.corpus,
            "gold": self.gold,
            "rules": self.rules,
            "examples_file": self.examples_file,
            "rng_seed": self.rng_seed,
            "sample_size": self.sample_size,
            "negative_ratio": str(self.negative_ratio),
            "generation_type": self.generation_type,
            "backend": {
                "type": self.backend.type,
                "url": self.backend.url,
                "max_tokens": self.backend.max_tokens,
                "temperature": self.backend.temperature,
                "stop": list(self.backend.stop),
                "concurrency": self.backend.concurrency,
                "timeout": self.backend.timeout,
                "retries": self.backend.retries,
            },
            "mock": {
                "mode": self.backend.mock.mode,
                "p_hallucinate": self.backend.mock.p_hallucinate,
                "p_malformed": self.backend.mock.p_malformed,
                "p_extraneous": self.backend.mock.p_extraneous,
                "rng_seed": self.backend.mock.rng_seed,
            },
            "grid": {
                "sample_sizes": list(self.grid.sample_sizes),
                "negative_ratios": [str(r) for r in self.grid.negative_ratios],
                "generation_types": list(self.grid.generation_types),
            },
        }


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


def config_from_dict(data: dict) -> ExperimentConfig:
    _require(isinstance(data, dict), "config must be a JSON object")
    known = {
        "corpus", "gold", "rules", "examples_file", "out", "rng_seed",
        "sample_size", "negative_ratio", "generation_type", "backend", "mock", "grid",
    }
    unknown = set(data) - known
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")

    backend_data = data.get("backend", {})
    mock_data = data.get("mock", {})
    grid_data = data.get("grid", {})
    try:
        mock = MockConfig(
            mode=mock_data.get("mode", "oracle"),
            p_hallucinate=float(mock_data.get("p_hallucinate", 0.0)),
            p_malformed=float(mock_data.get("p_malformed", 0.0)),
            p_extraneous=float(mock_data.get("p_extraneous", 0.0)),
            rng_seed=int(mock_data.get("rng_seed", 0)),
        )
        backend = BackendSettings(
            type=backend_data.get("type", "mock"),
            url=backend_data.get("url", ""),
            max_tokens=int(backend_data.get("max_tokens", 16)),
            temperature=float(backend_data.get("temperature", 0.0)),
            stop=tuple(backend_data.get("stop", ["\n"])),
            concurrency=int(backend_data.get("concurrency", 4)),
            timeout=float(backend_data.get("timeout", 120.0)),
            retries=int(backend_data.get("retries", 3)),
            mock=mock,
        )
        grid = GridSpec(
            sample_sizes=tuple(int(s) for s in grid_data.get("sample_sizes", (15, 25, 50))),
            negative_ratios=tuple(
                parse_ratio(r) for r in grid_data.get("negative_ratios", ("1/3", "1/4"))
            ),
            generation_types=tuple(
                grid_data.get("generation_types", ("combined", "separate"))
            ),
        )
        return ExperimentConfig(
            corpus=data.get("corpus"),
            gold=data.get("gold"),
            rules=data.get("rules"),
            examples_file=data.get("examples_file"),
            out=data.get("out"),
            rng_seed=int(data.get("rng_seed", 0)),
            sample_size=int(data.get("sample_size", 25)),
            negative_ratio=parse_ratio(data.get("negative_ratio", "1/4")),
            generation_type=data.get("generation_type", "combined"),
            backend=backend,
            grid=grid,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def load_config(path: Optional[str | Path]) -> ExperimentConfig:
    if path is None:
        config = ExperimentConfig()
    else:
        _require(Path(path).exists(), f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        config = config_from_dict(data)
    return apply_env(config)


def apply_env(config: ExperimentConfig) -> ExperimentConfig:
    url = os.environ.get(ENV_BACKEND_URL)
    if url:
        config = replace(config, backend=replace(config.backend, url=url))
    return config
