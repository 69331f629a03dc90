"""Synthetic keyword reviews with a known labeling rule.

Each review mixes neutral filler words with planted sentiment keywords. It is
positive exactly when positive keywords outnumber negative ones. Lengths are
drawn so that every length bin is populated.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adaptattn.corpus import BinConfig

POSITIVE_WORDS = (
    "great", "excellent", "wonderful", "superb", "brilliant", "moving",
    "delightful", "masterful", "charming", "gripping", "fantastic", "loved",
)
NEGATIVE_WORDS = (
    "awful", "terrible", "boring", "dull", "horrible", "tedious",
    "clumsy", "pointless", "dreadful", "weak", "disappointing", "hated",
)
_SYLLABLES = ("ka", "lo", "mi", "ren", "to", "su", "va", "ne", "pi", "dor", "el", "ba", "qui", "zo")


def filler_words(n: int = 300) -> list[str]:
    """Deterministic pseudo-words that never collide with the keyword lists."""
    words = []
    for i in range(n):
        a, b, c = i % 14, (i // 14) % 14, (i // 196) % 14
        words.append(_SYLLABLES[a] + _SYLLABLES[b] + (_SYLLABLES[c] if i >= 196 else "") + "x")
    return words


@dataclass(frozen=True)
class SyntheticReview:
    text: str
    tokens: tuple[str, ...]
    label: int


def _render(tokens: list[str], rng: np.random.Generator) -> str:
    """Join tokens into sentences with capitals, periods and IMDB-style breaks."""
    parts, sentence = [], []
    for tok in tokens:
        sentence.append(tok)
        if len(sentence) >= rng.integers(6, 15):
            parts.append(" ".join(sentence).capitalize() + ".")
            sentence = []
            if rng.random() < 0.15:
                parts.append("<br /><br />")
    if sentence:
        parts.append(" ".join(sentence).capitalize() + ".")
    return " ".join(parts)


def generate(
    n: int,
    seed: int = 0,
    bins: BinConfig | None = None,
    bin_weights: tuple[float, float, float] = (0.4, 0.35, 0.25),
    keyword_rate: float = 0.2,
) -> list[SyntheticReview]:
    """Draw ``n`` reviews with balanced labels.

    Lengths fall in ``[8, L1]``, ``(L1, L2]`` or ``(L2, 1.5 * L2]`` (capped)
    according to ``bin_weights``.
    """
    bins = bins or BinConfig()
    rng = np.random.default_rng(seed)
    filler = filler_words()
    large_hi = min(bins.max_len_cap, bins.L2 + max(1, bins.L2 // 2))
    ranges = ((min(8, bins.L1), bins.L1), (bins.L1 + 1, bins.L2), (bins.L2 + 1, large_hi))
    out = []
    for i in range(n):
        want = i % 2
        lo, hi = ranges[rng.choice(3, p=bin_weights)]
        length = int(rng.integers(lo, hi + 1))
        n_kw = max(3, int(round(keyword_rate * length)))
        n_kw += 1 - n_kw % 2  # odd, so the two keyword counts can never tie
        share = rng.uniform(0.7, 0.95)
        n_major = min(n_kw, max((n_kw // 2) + 1, int(round(share * n_kw))))
        n_pos = n_major if want else n_kw - n_major
        words = list(rng.choice(POSITIVE_WORDS, n_pos)) + list(rng.choice(NEGATIVE_WORDS, n_kw - n_pos))
        words += list(rng.choice(filler, max(0, length - n_kw)))
        words = [str(w) for w in rng.permutation(np.array(words, dtype=object))]
        label = int(n_pos > n_kw - n_pos)
        out.append(SyntheticReview(_render(words, rng), tuple(words), label))
    return out


def write_corpus(root, n_train: int = 500, n_test: int = 200, seed: int = 0, bins: BinConfig | None = None) -> Path:
    """Write ``root/{train,test}/{pos,neg}/*.txt`` in the IMDB layout."""
    root = Path(root)
    for split, n, s in (("train", n_train, seed), ("test", n_test, seed + 1)):
        for sub in ("pos", "neg"):
            (root / split / sub).mkdir(parents=True, exist_ok=True)
        for i, review in enumerate(generate(n, s, bins)):
            sub = "pos" if review.label else "neg"
            rating = 8 if review.label else 2
            (root / split / sub / f"{i:05d}_{rating}.txt").write_text(review.text, encoding="utf-8")
    return root
