"""Model checkpoints on top of the numcore tensor container.

The header echoes the model shape, the bin configuration and the vocabulary
path so a checkpoint is self-describing.
"""

from __future__ import annotations

import numpy as np

from adaptattn.corpus import BinConfig
from adaptattn.errors import ConfigError, DataError, DimensionError
from adaptattn.model import ModelConfig, ModelParams, parameter_shapes
from adaptattn.numcore import load_tensors, save_tensors

FORMAT = "adaptattn-checkpoint-1"


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def config_meta(cfg: ModelConfig) -> dict[str, str]:
    b = cfg.bin_config
    return {
        "format": FORMAT,
        "vocab_size": str(cfg.vocab_size),
        "d_model": str(cfg.d_model),
        "n_layers": str(cfg.n_layers),
        "d_ff": str(cfg.d_ff),
        "L1": str(b.L1),
        "L2": str(b.L2),
        "max_len_cap": str(b.max_len_cap),
        "heads": ",".join(map(str, b.heads)),
        "pad_len": ",".join(map(str, b.pad_len)),
        "adaptive": "1" if b.adaptive else "0",
    }


def config_from_meta(meta: dict[str, str]) -> ModelConfig:
    if meta.get("format") != FORMAT:
        raise DataError(f"not an adaptattn checkpoint (format={meta.get('format')!r})")
    try:
        bins = BinConfig(
            L1=int(meta["L1"]),
            L2=int(meta["L2"]),
            max_len_cap=int(meta["max_len_cap"]),
            heads=_ints(meta["heads"]),
            pad_len=_ints(meta["pad_len"]),
            adaptive=meta["adaptive"] == "1",
        )
        return ModelConfig(
            vocab_size=int(meta["vocab_size"]),
            d_model=int(meta["d_model"]),
            n_layers=int(meta["n_layers"]),
            d_ff=int(meta["d_ff"]),
            bin_config=bins,
        )
    except (KeyError, ValueError, ConfigError) as exc:
        raise DataError(f"checkpoint header is incomplete or invalid: {exc}") from exc


def save_checkpoint(path, params: ModelParams, vocab_path=None, extra: dict[str, str] | None = None) -> None:
    meta = config_meta(params.config)
    if vocab_path is not None:
        meta["vocab"] = str(vocab_path)
    meta.update(extra or {})
    save_tensors(path, {k: t.data for k, t in params.named_tensors().items()}, meta)


def load_checkpoint(path, expected: ModelConfig | None = None, dtype=np.float32):
    """Return ``(params, meta)``.

    When ``expected`` is given, any tensor shape that disagrees with it raises
    :class:`DimensionError` naming both shapes.
    """
    arrays, meta = load_tensors(path)
    cfg = config_from_meta(meta)
    if expected is not None:
        want = parameter_shapes(expected)
        for name, shape in want.items():
            got = arrays.get(name)
            if got is None or got.shape != shape:
                got_shape = None if got is None else list(got.shape)
                raise DimensionError(f"{path}: tensor {name} has shape {got_shape}, config expects {list(shape)}")
        if set(arrays) != set(want):
            raise DimensionError(f"{path}: unexpected tensors {sorted(set(arrays) - set(want))}")
        cfg = expected
    return ModelParams.from_arrays(cfg, arrays, dtype=dtype), meta
