from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from adaptattn import numcore as nc
from adaptattn.errors import DataError
from adaptattn.numcore import Tensor

PROB_FLOOR = 1e-12


def cross_entropy(probs: Tensor, labels) -> Tensor:
    """Mean negative log-probability of the true class (probabilities floored at 1e-12)."""
    labels = np.asarray(labels)
    if labels.size and not np.isin(labels, (0, 1)).all():
        bad = labels[~np.isin(labels, (0, 1))][0]
        raise DataError(f"label {bad!r} is not in {{0, 1}}")
    picked = nc.take_along(probs, labels.astype(np.int64))
    return nc.scale(nc.mean(nc.log(picked, floor=PROB_FLOOR)), -1.0)


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_predictions(cls, predicted, labels) -> "Confusion":
        p = np.asarray(predicted).astype(bool)
        y = np.asarray(labels).astype(bool)
        return cls(int(np.sum(p & y)), int(np.sum(p & ~y)), int(np.sum(~p & y)), int(np.sum(~p & ~y)))


def f1_score(c: Confusion) -> float:
    """Positive-class F1; 0.0 whenever precision + recall is zero or undefined."""
    if c.tp == 0:
        return 0.0
    precision = c.tp / (c.tp + c.fp)
    recall = c.tp / (c.tp + c.fn)
    return 2 * precision * recall / (precision + recall)


def accuracy(c: Confusion) -> float:
    """Percentage of correct predictions."""
    if c.total == 0:
        raise DataError("accuracy of an empty prediction set is undefined")
    return 100.0 * (c.tp + c.tn) / c.total


@dataclass(frozen=True)
class Metrics:
    f1: float
    accuracy: float
    confusion: Confusion
    loss: float

    def line(self) -> str:
        return f"f1={self.f1:.4f} accuracy={self.accuracy:.2f} loss={self.loss:.6f}"


@dataclass(frozen=True)
class HistoryRow:
    epoch: int
    split: str
    metrics: Metrics
    seconds: float


HISTORY_HEADER = ["epoch", "split", "loss", "accuracy", "f1", "seconds"]


def history_rows(rows: Iterable[HistoryRow]) -> list[list[str]]:
    return [
        [str(r.epoch), r.split, repr(r.metrics.loss), repr(r.metrics.accuracy), repr(r.metrics.f1), f"{r.seconds:.3f}"]
        for r in rows
    ]


def write_history(path, rows: Iterable[HistoryRow]) -> None:
    path = Path(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_HEADER)
            w.writerows(history_rows(rows))
    except OSError as exc:
        raise OSError(f"cannot write metrics file {path}: {exc.strerror or exc}") from exc
