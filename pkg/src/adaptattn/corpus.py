"""Review ingestion: tokenization, vocabulary, length bins and bin statistics."""

from __future__ import annotations

import csv
import enum
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from adaptattn.errors import ConfigError

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_BREAK_RE = re.compile(r"<br\s*/?>", re.IGNORECASE)
_APOSTROPHE_RE = re.compile(r"['’]")
_PUNCT_RE = re.compile(r"[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with HTML line breaks and punctuation removed.

    Apostrophes are deleted so contractions stay one word ("don't" -> "dont");
    any other punctuation character separates words.
    """
    text = _BREAK_RE.sub(" ", text.lower())
    text = _APOSTROPHE_RE.sub("", text)
    return _PUNCT_RE.sub(" ", text).split()


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(default_factory=dict)
    pad_id: int = PAD_ID
    unk_id: int = UNK_ID

    def __post_init__(self):
        if self.id_to_token[:2] != [PAD_TOKEN, UNK_TOKEN]:
            raise ConfigError("vocabulary must start with the reserved PAD and UNK entries")
        if not self.token_to_id:
            self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token) if i >= 2}

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def __len__(self) -> int:
        return self.size

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, self.unk_id)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_to_id.get(t, self.unk_id) for t in tokens]

    def save(self, path) -> None:
        """One corpus token per line; line ``n`` (1-based) holds id ``n + 1``."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.id_to_token[2:]:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        return cls([PAD_TOKEN, UNK_TOKEN, *tokens])


def build_vocab(docs: Iterable[Sequence[str]], max_vocab: int = 20_000, min_freq: int = 2) -> Vocabulary:
    if max_vocab < 2:
        raise ConfigError(f"max_vocab must be >= 2 to hold PAD and UNK, got {max_vocab}")
    freq: Counter[str] = Counter()
    for tokens in docs:
        freq.update(tokens)
    # reserved spellings cannot collide: the tokenizer strips '<' and '>'
    words = [w for w, c in freq.items() if c >= min_freq and w not in (PAD_TOKEN, UNK_TOKEN)]
    words.sort(key=lambda w: (-freq[w], w))
    return Vocabulary([PAD_TOKEN, UNK_TOKEN, *words[: max_vocab - 2]])


class LengthBin(enum.IntEnum):
    SMALL = 0
    MEDIUM = 1
    LARGE = 2

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> "LengthBin":
        try:
            return cls[text.strip().upper()]
        except KeyError:
            raise ConfigError(f"unknown length bin {text!r}") from None


@dataclass(frozen=True)
class BinConfig:
    """Length thresholds plus the head count and pad width of each bin.

    ``heads`` and ``pad_len`` are indexed by :class:`LengthBin`. With
    ``adaptive=False`` every document is routed to the Large bin.
    """

    L1: int = 75
    L2: int = 150
    max_len_cap: int = 512
    heads: tuple[int, int, int] = (2, 4, 8)
    pad_len: tuple[int, int, int] | None = None
    adaptive: bool = True

    def __post_init__(self):
        if self.pad_len is None:
            object.__setattr__(self, "pad_len", (self.L1, self.L2, self.max_len_cap))
        object.__setattr__(self, "heads", tuple(int(h) for h in self.heads))
        object.__setattr__(self, "pad_len", tuple(int(p) for p in self.pad_len))
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.L1 < self.L2 < self.max_len_cap:
            out.append(f"need 0 < L1 < L2 < max_len_cap, got L1={self.L1} L2={self.L2} max_len_cap={self.max_len_cap}")
        if len(self.heads) != 3 or any(h < 1 for h in self.heads):
            out.append(f"heads must be three positive counts, got {self.heads}")
        if len(self.pad_len) != 3:
            out.append(f"pad_len must have three entries, got {self.pad_len}")
        else:
            small, medium, large = self.pad_len
            if small < self.L1:
                out.append(f"pad_len[Small]={small} must be >= L1={self.L1}")
            if medium < self.L2:
                out.append(f"pad_len[Medium]={medium} must be >= L2={self.L2}")
            if large != self.max_len_cap:
                out.append(f"pad_len[Large]={large} must equal max_len_cap={self.max_len_cap}")
        return out

    @classmethod
    def approach1(cls, **overrides) -> "BinConfig":
        return cls(L1=75, L2=150, **overrides)

    @classmethod
    def approach2(cls, **overrides) -> "BinConfig":
        return cls(L1=110, L2=200, **overrides)

    @classmethod
    def nonadaptive(cls, **overrides) -> "BinConfig":
        return cls(**{"adaptive": False, **overrides})

    def heads_for(self, b: LengthBin) -> int:
        return self.heads[b]

    def pad_for(self, b: LengthBin) -> int:
        return self.pad_len[b]

    @property
    def max_pad(self) -> int:
        return max(self.pad_len)

    def with_(self, **changes) -> "BinConfig":
        if "pad_len" not in changes and {"L1", "L2", "max_len_cap"} & changes.keys():
            changes["pad_len"] = None
        return replace(self, **changes)


def classify_length(length: int, cfg: BinConfig) -> LengthBin:
    if not cfg.adaptive:
        return LengthBin.LARGE
    if length <= cfg.L1:
        return LengthBin.SMALL
    if length <= cfg.L2:
        return LengthBin.MEDIUM
    return LengthBin.LARGE


@dataclass
class LabeledDocument:
    tokens: list[str]
    label: int
    bin: LengthBin
    path: str | None = None
    ids: np.ndarray | None = None
    mask: np.ndarray | None = None

    @property
    def length(self) -> int:
        return len(self.tokens)


def encode_document(tokens: Sequence[str], vocab: Vocabulary, cfg: BinConfig):
    """Return ``(ids, mask, bin)``: truncate to the cap, bin, then pad to the bin's width."""
    kept = list(tokens[: cfg.max_len_cap])
    b = classify_length(len(kept), cfg)
    width = cfg.pad_for(b)
    ids = np.full(width, vocab.pad_id, dtype=np.int64)
    mask = np.zeros(width, dtype=np.int8)
    ids[: len(kept)] = vocab.encode(kept)
    mask[: len(kept)] = 1
    return ids, mask, b


def make_document(tokens: list[str], label: int, cfg: BinConfig, path: str | None = None) -> LabeledDocument:
    return LabeledDocument(tokens, int(label), classify_length(min(len(tokens), cfg.max_len_cap), cfg), path)


def encode_corpus(docs: Iterable[LabeledDocument], vocab: Vocabulary, cfg: BinConfig) -> list[LabeledDocument]:
    """Attach padded ids and masks; bins are recomputed under ``cfg``."""
    out = []
    for d in docs:
        ids, mask, b = encode_document(d.tokens, vocab, cfg)
        out.append(LabeledDocument(d.tokens, d.label, b, d.path, ids, mask))
    return out


def load_corpus(root, split: str = "train", cfg: BinConfig | None = None) -> list[LabeledDocument]:
    """Read ``root/<split>/{pos,neg}/*.txt``; documents come back sorted by path."""
    if split not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {split!r}")
    cfg = cfg or BinConfig()
    base = Path(root) / split
    entries = []
    for name, label in (("neg", 0), ("pos", 1)):
        folder = base / name
        if not folder.is_dir():
            raise FileNotFoundError(f"corpus directory not found: {folder}")
        entries.extend((p, label) for p in folder.glob("*.txt"))
    entries.sort(key=lambda e: str(e[0]))
    docs = []
    for path, label in entries:
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise OSError(f"cannot read review file {path}: {exc}") from exc
        docs.append(make_document(tokenize(text), label, cfg, str(path)))
    return docs


@dataclass
class BinStats:
    counts: dict[LengthBin, int]
    fractions: dict[LengthBin, float] | None
    histogram: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def defined(self) -> bool:
        return self.fractions is not None

    def summary(self) -> str:
        lines = [f"documents: {self.total}"]
        for b in LengthBin:
            pct = "undefined" if self.fractions is None else f"{self.fractions[b]:.2f}%"
            lines.append(f"{b.label:<7} {self.counts[b]:>7}  {pct}")
        return "\n".join(lines)


def length_stats(docs: Sequence[LabeledDocument], cfg: BinConfig | None = None) -> BinStats:
    """Per-bin counts and percentages, plus a histogram of raw lengths.

    With ``cfg`` the bins are recomputed from lengths; otherwise each
    document's stored bin is used.
    """
    counts = {b: 0 for b in LengthBin}
    histogram: Counter[int] = Counter()
    for d in docs:
        b = d.bin if cfg is None else classify_length(min(d.length, cfg.max_len_cap), cfg)
        counts[b] += 1
        histogram[d.length] += 1
    total = len(docs)
    fractions = None if total == 0 else {b: 100.0 * counts[b] / total for b in LengthBin}
    return BinStats(counts, fractions, dict(sorted(histogram.items())))


def write_stats_csv(stats: BinStats, bins_path, histogram_path) -> None:
    """``bin,count,fraction`` (fraction as a percentage, empty when undefined) and ``length,count``."""
    with open(bins_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "count", "fraction"])
        for b in LengthBin:
            w.writerow([b.label, stats.counts[b], "" if stats.fractions is None else repr(stats.fractions[b])])
    with open(histogram_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["length", "count"])
        for length, count in stats.histogram.items():
            w.writerow([length, count])
