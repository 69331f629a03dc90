"""Batching, loss, optimization, evaluation and checkpointing."""

from adaptattn.training.batching import Batch, collate, make_batches, ordered_batches
from adaptattn.training.checkpoint import load_checkpoint, save_checkpoint
from adaptattn.training.loop import TrainConfig, best_checkpoint_path, epoch_seed, evaluate, train
from adaptattn.training.metrics import (
    Confusion,
    HistoryRow,
    Metrics,
    accuracy,
    cross_entropy,
    f1_score,
    write_history,
)
from adaptattn.training.optim import AdamHyper, AdamState, adam_step

__all__ = [
    "AdamHyper",
    "AdamState",
    "Batch",
    "Confusion",
    "HistoryRow",
    "Metrics",
    "TrainConfig",
    "accuracy",
    "adam_step",
    "best_checkpoint_path",
    "collate",
    "cross_entropy",
    "epoch_seed",
    "evaluate",
    "f1_score",
    "load_checkpoint",
    "make_batches",
    "ordered_batches",
    "save_checkpoint",
    "train",
    "write_history",
]
