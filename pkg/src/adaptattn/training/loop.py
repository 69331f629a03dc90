from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from adaptattn.corpus import LabeledDocument
from adaptattn.errors import ConfigError, DataError, NumericError
from adaptattn.model import ModelConfig, ModelParams, forward, init_params
from adaptattn.numcore import GradTape
from adaptattn.training.batching import make_batches, ordered_batches
from adaptattn.training.checkpoint import save_checkpoint
from adaptattn.training.metrics import Confusion, HistoryRow, Metrics, accuracy, cross_entropy, f1_score, write_history
from adaptattn.training.optim import AdamHyper, AdamState, adam_step

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    batch_size: int = 32
    epochs: int = 10
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    dtype: str = "f32"
    checkpoint_path: str | None = None
    metrics_path: str | None = None

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if self.batch_size < 1:
            out.append(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            out.append(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            out.append(f"learning_rate must be > 0, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            out.append(f"adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.adam_eps > 0:
            out.append(f"adam_eps must be > 0, got {self.adam_eps}")
        if self.dtype not in ("f32", "f64"):
            out.append(f"dtype must be f32 or f64, got {self.dtype!r}")
        return out

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "f32" else np.float64

    @property
    def adam(self) -> AdamHyper:
        return AdamHyper(self.learning_rate, self.beta1, self.beta2, self.adam_eps)


def epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def best_checkpoint_path(path) -> Path:
    path = Path(path)
    return path.with_name(f"{path.stem}-best{path.suffix}")


def evaluate(params: ModelParams, docs: Sequence[LabeledDocument], batch_size: int = 32) -> Metrics:
    """Forward every document in fixed bin-then-index order; no gradients are recorded."""
    if not docs:
        raise DataError("cannot evaluate an empty document list")
    predicted = np.zeros(len(docs), dtype=np.int64)
    labels = np.zeros(len(docs), dtype=np.int64)
    loss_sum = 0.0
    for batch in ordered_batches(docs, params.config.bin_config, batch_size):
        pred = forward(batch, params)
        loss_sum += float(cross_entropy(pred.probs, batch.labels).data) * len(batch)
        predicted[batch.indices] = pred.predicted_label
        labels[batch.indices] = batch.labels
    c = Confusion.from_predictions(predicted, labels)
    return Metrics(f1=f1_score(c), accuracy=accuracy(c), confusion=c, loss=loss_sum / len(docs))


def train(
    docs: Sequence[LabeledDocument],
    cfg: TrainConfig,
    eval_docs: Sequence[LabeledDocument] | None = None,
    vocab_path=None,
    on_epoch: Callable[[list[HistoryRow]], None] | None = None,
) -> tuple[ModelParams, list[HistoryRow]]:
    """Train from a seeded initialization; returns final params and the metric history.

    After each epoch the train documents (and ``eval_docs`` if given) are
    re-evaluated with :func:`evaluate`, so the last train row matches a later
    evaluation of the saved checkpoint.
    """
    if not docs:
        raise DataError("cannot train on an empty document list")
    params = init_params(cfg.model, cfg.seed, dtype=cfg.np_dtype)
    tensors = params.named_tensors()
    values = {k: t.data for k, t in tensors.items()}
    state = AdamState()
    history: list[HistoryRow] = []
    best_f1 = -1.0
    extra = {"batch_size": str(cfg.batch_size)}

    for epoch in range(1, cfg.epochs + 1):
        start = time.perf_counter()
        for i, batch in enumerate(make_batches(docs, cfg, epoch_seed(cfg.seed, epoch)), start=1):
            with GradTape() as tape:
                loss = cross_entropy(forward(batch, params).probs, batch.labels)
            value = float(loss.data)
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss {value} at epoch {epoch}, batch {i}")
            tape.backward(loss)
            adam_step(values, {k: t.grad for k, t in tensors.items()}, state, cfg.adam)
            params.zero_grad()
        train_metrics = evaluate(params, docs, cfg.batch_size)
        rows = [HistoryRow(epoch, "train", train_metrics, time.perf_counter() - start)]
        if eval_docs:
            t0 = time.perf_counter()
            rows.append(HistoryRow(epoch, "test", evaluate(params, eval_docs, cfg.batch_size), time.perf_counter() - t0))
        history.extend(rows)
        log.info("epoch %d %s", epoch, " | ".join(f"{r.split} {r.metrics.line()}" for r in rows))
        if cfg.metrics_path:
            write_history(cfg.metrics_path, history)
        if cfg.checkpoint_path and train_metrics.f1 > best_f1:
            best_f1 = train_metrics.f1
            save_checkpoint(best_checkpoint_path(cfg.checkpoint_path), params, vocab_path, {**extra, "epoch": str(epoch)})
        if on_epoch:
            on_epoch(rows)
    if cfg.checkpoint_path:
        save_checkpoint(cfg.checkpoint_path, params, vocab_path, {**extra, "epoch": str(cfg.epochs)})
    return params, history
