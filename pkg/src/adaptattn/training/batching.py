"""Bin-homogeneous batches: every batch shares one length bin, hence one head count and pad width."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from adaptattn.corpus import BinConfig, LabeledDocument, LengthBin
from adaptattn.errors import ContractError, DataError


@dataclass
class Batch:
    ids: np.ndarray
    mask: np.ndarray
    labels: np.ndarray
    bin: LengthBin
    head_count: int
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)


def collate(docs: Sequence[LabeledDocument], indices: Sequence[int], bins: BinConfig) -> Batch:
    """Stack encoded documents ``docs[i] for i in indices`` into one batch."""
    if not len(indices):
        raise DataError("cannot build an empty batch")
    chosen = [docs[i] for i in indices]
    b = chosen[0].bin
    if any(d.bin != b for d in chosen):
        found = sorted({LengthBin(d.bin).label for d in chosen})
        raise ContractError(f"batch mixes length bins {found}")
    width = bins.pad_for(b)
    for i, d in zip(indices, chosen):
        if d.ids is None or d.mask is None:
            raise ContractError(f"document {i} has not been encoded")
        if d.ids.shape != (width,):
            raise ContractError(f"document {i} is padded to {d.ids.shape[0]} but bin {LengthBin(b).label} uses {width}")
    return Batch(
        ids=np.stack([d.ids for d in chosen]),
        mask=np.stack([d.mask for d in chosen]),
        labels=np.array([d.label for d in chosen], dtype=np.int64),
        bin=LengthBin(b),
        head_count=bins.heads_for(b),
        indices=np.asarray(indices, dtype=np.int64),
    )


def _by_bin(docs: Sequence[LabeledDocument]) -> dict[LengthBin, list[int]]:
    groups: dict[LengthBin, list[int]] = {b: [] for b in LengthBin}
    for i, d in enumerate(docs):
        groups[LengthBin(d.bin)].append(i)
    return groups


def make_batches(docs: Sequence[LabeledDocument], cfg, epoch_seed: int) -> list[Batch]:
    """Shuffle within each bin, chunk to ``cfg.batch_size``, then shuffle the batch order.

    ``cfg`` is a ``TrainConfig``; both shuffles draw from one generator seeded
    with ``epoch_seed``.
    """
    rng = np.random.default_rng(epoch_seed)
    bins = cfg.model.bin_config
    size = cfg.batch_size
    batches = []
    for idx in _by_bin(docs).values():
        if not idx:
            continue
        order = rng.permutation(np.asarray(idx))
        for start in range(0, len(order), size):
            batches.append(collate(docs, order[start : start + size].tolist(), bins))
    return [batches[i] for i in rng.permutation(len(batches))]


def ordered_batches(docs: Sequence[LabeledDocument], bins: BinConfig, batch_size: int) -> list[Batch]:
    """Unshuffled batches (bin order, then document order) for evaluation."""
    out = []
    for idx in _by_bin(docs).values():
        for start in range(0, len(idx), batch_size):
            out.append(collate(docs, idx[start : start + batch_size], bins))
    return out
