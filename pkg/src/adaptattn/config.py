"""Run configuration: a ``key = value`` file merged with command-line overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from adaptattn.corpus import BinConfig
from adaptattn.errors import ConfigError
from adaptattn.model import ModelConfig
from adaptattn.training import TrainConfig

MODES = ("nonadaptive", "approach1", "approach2", "custom")
PRECISION_ENV = "ADAPTATTN_PRECISION"


class RunConfigError(ConfigError):
    """Carries every violation found, one message each."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("\n".join(problems))


@dataclass(frozen=True)
class RunConfig:
    mode: str = "approach1"
    L1: int | None = None
    L2: int | None = None
    max_len_cap: int = 512
    pad_small: int | None = None
    pad_medium: int | None = None
    heads_small: int = 2
    heads_medium: int = 4
    heads_large: int = 8
    d_model: int = 64
    n_layers: int = 2
    d_ff: int = 128
    max_vocab: int = 20_000
    min_freq: int = 2
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    precision: str = "f32"

    def thresholds(self) -> tuple[int | None, int | None]:
        if self.mode == "approach2":
            return 110, 200
        if self.mode in ("approach1", "nonadaptive"):
            return 75, 150
        return self.L1, self.L2

    def bin_config(self) -> BinConfig:
        L1, L2 = self.thresholds()
        pad = None
        if self.pad_small is not None or self.pad_medium is not None:
            pad = (self.pad_small or L1, self.pad_medium or L2, self.max_len_cap)
        return BinConfig(
            L1=L1,
            L2=L2,
            max_len_cap=self.max_len_cap,
            heads=(self.heads_small, self.heads_medium, self.heads_large),
            pad_len=pad,
            adaptive=self.mode != "nonadaptive",
        )

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size, self.d_model, self.n_layers, self.d_ff, bin_config=self.bin_config())

    def train_config(self, vocab_size: int, checkpoint_path=None, metrics_path=None) -> TrainConfig:
        return TrainConfig(
            model=self.model_config(vocab_size),
            batch_size=self.batch_size,
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            seed=self.seed,
            dtype=self.precision,
            checkpoint_path=None if checkpoint_path is None else str(checkpoint_path),
            metrics_path=None if metrics_path is None else str(metrics_path),
        )

    @property
    def np_dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    def violations(self) -> list[str]:
        out = []
        if self.mode not in MODES:
            return [f"mode must be one of {', '.join(MODES)}, got {self.mode!r}"]
        if self.mode != "custom" and (self.L1 is not None or self.L2 is not None):
            out.append(f"L1/L2 are fixed by mode {self.mode}; use mode = custom to set them")
        if self.mode == "custom" and (self.L1 is None or self.L2 is None):
            out.append("mode custom requires both L1 and L2")
        if self.precision not in ("f32", "f64"):
            out.append(f"precision must be f32 or f64, got {self.precision!r}")
        for name in ("max_vocab",):
            if getattr(self, name) < 2:
                out.append(f"{name} must be >= 2, got {getattr(self, name)}")
        if self.min_freq < 1:
            out.append(f"min_freq must be >= 1, got {self.min_freq}")
        if out:
            return out
        # delegate the structural checks to the component configs, falling back
        # to defaults after a failure so later problems are still reported
        bins = BinConfig()
        try:
            bins = self.bin_config()
        except ConfigError as exc:
            out.extend(str(exc).split("; "))
            try:
                bins = BinConfig(heads=(self.heads_small, self.heads_medium, self.heads_large))
            except ConfigError:
                pass
        model = ModelConfig(max(self.max_vocab, 2))
        try:
            model = ModelConfig(max(self.max_vocab, 2), self.d_model, self.n_layers, self.d_ff, bin_config=bins)
        except ConfigError as exc:
            out.extend(p for p in str(exc).split("; ") if p not in out)
        try:
            TrainConfig(
                model=model,
                batch_size=self.batch_size,
                epochs=self.epochs,
                learning_rate=self.learning_rate,
                beta1=self.beta1,
                beta2=self.beta2,
                adam_eps=self.adam_eps,
                seed=self.seed,
                dtype=self.precision,
            )
        except ConfigError as exc:
            out.extend(p for p in str(exc).split("; ") if p not in out)
        return out

    def validated(self) -> "RunConfig":
        problems = self.violations()
        if problems:
            raise RunConfigError(problems)
        return self


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _TYPES[key]
    if "int" in kind:
        return int(raw)
    if "float" in kind:
        return float(raw)
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values: dict = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            problems.append(f"{source}:{lineno}: expected 'key = value', got {line!r}")
            continue
        if key not in _TYPES:
            problems.append(f"{source}:{lineno}: unknown key {key!r}")
            continue
        try:
            values[key] = _coerce(key, raw)
        except ValueError:
            problems.append(f"{source}:{lineno}: {key} has invalid value {raw!r}")
    if problems:
        raise RunConfigError(problems)
    return values


def load_run_config(path=None, **overrides) -> RunConfig:
    """File values, then ``ADAPTATTN_PRECISION``, then non-None ``overrides``; validated."""
    values: dict = {}
    if path is not None:
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise RunConfigError([f"cannot read config file {p}: {exc.strerror or exc}"]) from exc
        values.update(parse_config_text(text, str(p)))
    env = os.environ.get(PRECISION_ENV)
    if env:
        values["precision"] = env.strip()
    values.update({k: v for k, v in overrides.items() if v is not None})
    return replace(RunConfig(), **values).validated()
