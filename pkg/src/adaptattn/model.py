"""Transformer encoder classifier whose attention head count is chosen per batch.

One set of projection matrices serves every head count: splitting into ``h``
heads is a reshape of the shared Q/K/V projections, so the parameter count
does not depend on the bin configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from adaptattn import numcore as nc
from adaptattn.corpus import BinConfig, LengthBin
from adaptattn.errors import ConfigError, ContractError, DataError, DimensionError
from adaptattn.numcore import Tensor

MASK_BIAS = -1e9
LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_layers: int = 2
    d_ff: int = 128
    n_classes: int = 2
    bin_config: BinConfig = field(default_factory=BinConfig)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise ConfigError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        for name in ("vocab_size", "d_model", "n_layers", "d_ff"):
            if getattr(self, name) < 1:
                out.append(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.vocab_size < 2:
            out.append(f"vocab_size must cover PAD and UNK, got {self.vocab_size}")
        if self.n_classes != 2:
            out.append(f"n_classes is fixed at 2, got {self.n_classes}")
        if self.d_model % 2:
            out.append(f"d_model must be even for the positional table, got {self.d_model}")
        for h in sorted(set(self.bin_config.heads)):
            if self.d_model % h:
                out.append(f"d_model={self.d_model} is not divisible by head count {h}")
        return out


@dataclass
class AttentionParams:
    Wq: Tensor
    Wk: Tensor
    Wv: Tensor
    Wo: Tensor


@dataclass
class EncoderLayerParams:
    attention: AttentionParams
    ff_in: Tensor
    ff_in_b: Tensor
    ff_out: Tensor
    ff_out_b: Tensor
    norm1_gamma: Tensor
    norm1_beta: Tensor
    norm2_gamma: Tensor
    norm2_beta: Tensor


def _param_shapes(cfg: ModelConfig) -> Iterator[tuple[str, tuple[int, ...]]]:
    d, f = cfg.d_model, cfg.d_ff
    yield "embedding", (cfg.vocab_size, d)
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        for w in ("Wq", "Wk", "Wv", "Wo"):
            yield p + "attention." + w, (d, d)
        yield p + "ff_in", (d, f)
        yield p + "ff_in_b", (f,)
        yield p + "ff_out", (f, d)
        yield p + "ff_out_b", (d,)
        for n in ("norm1", "norm2"):
            yield p + n + "_gamma", (d,)
            yield p + n + "_beta", (d,)
    yield "classifier_W", (d, cfg.n_classes)
    yield "classifier_b", (cfg.n_classes,)


def parameter_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    return dict(_param_shapes(cfg))


def count_parameters(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in parameter_shapes(cfg).values())


@dataclass
class ModelParams:
    config: ModelConfig
    embedding: Tensor
    positional: np.ndarray
    layers: list[EncoderLayerParams]
    classifier_W: Tensor
    classifier_b: Tensor

    def named_tensors(self) -> dict[str, Tensor]:
        """Trainable tensors keyed by checkpoint name, in a fixed order."""
        out = {"embedding": self.embedding}
        for i, layer in enumerate(self.layers):
            p = f"layers.{i}."
            for w in ("Wq", "Wk", "Wv", "Wo"):
                out[p + "attention." + w] = getattr(layer.attention, w)
            for n in ("ff_in", "ff_in_b", "ff_out", "ff_out_b", "norm1_gamma", "norm1_beta", "norm2_gamma", "norm2_beta"):
                out[p + n] = getattr(layer, n)
        out["classifier_W"] = self.classifier_W
        out["classifier_b"] = self.classifier_b
        return out

    @property
    def dtype(self):
        return self.embedding.dtype

    def zero_grad(self) -> None:
        for t in self.named_tensors().values():
            t.zero_grad()

    @classmethod
    def from_arrays(cls, cfg: ModelConfig, arrays: dict[str, np.ndarray], dtype=np.float64) -> "ModelParams":
        expected = parameter_shapes(cfg)
        missing = expected.keys() - arrays.keys()
        extra = arrays.keys() - expected.keys()
        if missing or extra:
            raise DimensionError(f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, shape in expected.items():
            got = tuple(np.shape(arrays[name]))
            if got != shape:
                raise DimensionError(f"parameter {name}: expected shape {list(shape)}, got {list(got)}")
        return cls.from_tensors(cfg, {k: nc.parameter(np.array(arrays[k], dtype=dtype)) for k in expected})

    @classmethod
    def from_tensors(cls, cfg: ModelConfig, t: dict[str, Tensor]) -> "ModelParams":
        """Assemble params around existing tensors (shared, not copied)."""
        layers = []
        for i in range(cfg.n_layers):
            p = f"layers.{i}."
            att = AttentionParams(*(t[p + "attention." + w] for w in ("Wq", "Wk", "Wv", "Wo")))
            layers.append(
                EncoderLayerParams(
                    att,
                    t[p + "ff_in"],
                    t[p + "ff_in_b"],
                    t[p + "ff_out"],
                    t[p + "ff_out_b"],
                    t[p + "norm1_gamma"],
                    t[p + "norm1_beta"],
                    t[p + "norm2_gamma"],
                    t[p + "norm2_beta"],
                )
            )
        positional = positional_encoding(cfg.bin_config.max_pad, cfg.d_model).astype(t["embedding"].dtype)
        return cls(cfg, t["embedding"], positional, layers, t["classifier_W"], t["classifier_b"])


def init_params(cfg: ModelConfig, seed: int = 0, dtype=np.float64) -> ModelParams:
    """Uniform(+-sqrt(6 / (fan_in + fan_out))) matrices, zero biases, unit norm gains."""
    rng = np.random.default_rng(seed)
    arrays = {}
    for name, shape in _param_shapes(cfg):
        if name.endswith("_gamma"):
            arrays[name] = np.ones(shape)
        elif len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / (shape[0] + shape[1]))
            arrays[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams.from_arrays(cfg, arrays, dtype=dtype)


def positional_encoding(max_len: int, d_model: int) -> np.ndarray:
    if d_model % 2:
        raise ConfigError(f"positional encoding needs an even d_model, got {d_model}")
    pos = np.arange(max_len, dtype=np.float64)[:, None]
    freq = 10000.0 ** (-np.arange(0, d_model, 2, dtype=np.float64) / d_model)
    table = np.empty((max_len, d_model))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


def embed(ids: np.ndarray, mask: np.ndarray, params: ModelParams) -> Tensor:
    """Token rows scaled by ``sqrt(d_model)`` plus the positional rows; padding is embedded too."""
    ids = np.asarray(ids)
    seq = ids.shape[-1]
    if seq > params.positional.shape[0]:
        raise DataError(f"sequence length {seq} exceeds positional table length {params.positional.shape[0]}")
    x = nc.scale(nc.embedding(params.embedding, ids), np.sqrt(params.config.d_model))
    return nc.add_constant(x, params.positional[:seq])


def _key_bias(mask: np.ndarray, dtype) -> np.ndarray:
    mask = np.asarray(mask)
    return ((1 - mask.astype(dtype)) * dtype.type(MASK_BIAS))[:, None, None, :]


def scaled_dot_product_attention(Q: Tensor, K: Tensor, V: Tensor, mask: np.ndarray | None = None):
    """``softmax(Q K^T / sqrt(d_k) + bias) V`` for ``[batch, h, seq, d_k]`` inputs.

    ``mask`` is ``[batch, seq]`` with 1 at valid key positions. Returns
    ``(output, weights)``.
    """
    if Q.ndim != 4 or Q.shape != K.shape or K.shape != V.shape:
        raise DimensionError(f"attention expects equal [batch, h, seq, d_k] shapes, got Q{Q.shape} K{K.shape} V{V.shape}")
    d_k = Q.shape[-1]
    scores = nc.matmul(nc.scale(Q, 1.0 / np.sqrt(d_k)), nc.transpose(K, (0, 1, 3, 2)))
    if mask is not None:
        if np.shape(mask) != (Q.shape[0], Q.shape[2]):
            raise DimensionError(f"mask shape {np.shape(mask)} does not match batch/seq of {Q.shape}")
        scores = nc.add_constant(scores, _key_bias(mask, Q.dtype))
    weights = nc.softmax(scores, axis=-1)
    return nc.matmul(weights, V), weights


def _split_heads(x: Tensor, h: int) -> Tensor:
    b, s, d = x.shape
    return nc.transpose(nc.reshape(x, (b, s, h, d // h)), (0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    b, h, s, dk = x.shape
    return nc.reshape(nc.transpose(x, (0, 2, 1, 3)), (b, s, h * dk))


def multi_head_attention(x: Tensor, h: int, p: AttentionParams, mask: np.ndarray | None = None) -> Tensor:
    d_model = x.shape[-1]
    if h < 1 or d_model % h:
        raise ConfigError(f"d_model={d_model} cannot be split into {h} heads")
    q = _split_heads(nc.linear(x, p.Wq), h)
    k = _split_heads(nc.linear(x, p.Wk), h)
    v = _split_heads(nc.linear(x, p.Wv), h)
    heads, _ = scaled_dot_product_attention(q, k, v, mask)
    return nc.linear(_merge_heads(heads), p.Wo)


def encoder_layer(x: Tensor, h: int, p: EncoderLayerParams, mask: np.ndarray | None = None) -> Tensor:
    """Post-norm block: attention and feed-forward, each wrapped in residual + layer norm."""
    y1 = nc.layer_norm(nc.add(x, multi_head_attention(x, h, p.attention, mask)), p.norm1_gamma, p.norm1_beta, LN_EPS)
    ff = nc.linear(nc.relu(nc.linear(y1, p.ff_in, p.ff_in_b)), p.ff_out, p.ff_out_b)
    return nc.layer_norm(nc.add(y1, ff), p.norm2_gamma, p.norm2_beta, LN_EPS)


def masked_mean_pool(x: Tensor, mask: np.ndarray) -> Tensor:
    return nc.masked_mean(x, mask)


def encode(ids: np.ndarray, mask: np.ndarray, h: int, params: ModelParams) -> Tensor:
    """Encoder stack output ``[batch, seq, d_model]``."""
    x = embed(ids, mask, params)
    for layer in params.layers:
        x = encoder_layer(x, h, layer, mask)
    return x


def logits(ids: np.ndarray, mask: np.ndarray, h: int, params: ModelParams) -> Tensor:
    pooled = masked_mean_pool(encode(ids, mask, h, params), mask)
    return nc.linear(pooled, params.classifier_W, params.classifier_b)


@dataclass
class Prediction:
    logits: Tensor
    probs: Tensor

    @property
    def predicted_label(self) -> np.ndarray:
        # argmax returns the first maximum, so ties resolve to label 0
        return np.argmax(self.probs.data, axis=-1)


def predict_ids(ids: np.ndarray, mask: np.ndarray, h: int, params: ModelParams) -> Prediction:
    z = logits(ids, mask, h, params)
    return Prediction(z, nc.softmax(z, axis=-1))


def forward(batch, params: ModelParams) -> Prediction:
    """Classify one bin-homogeneous batch with the head count of its bin."""
    bins = params.config.bin_config
    expected = bins.heads_for(LengthBin(batch.bin))
    if batch.head_count != expected:
        raise ContractError(
            f"batch head_count={batch.head_count} but bin {LengthBin(batch.bin).label} uses {expected} heads"
        )
    return predict_ids(batch.ids, batch.mask, batch.head_count, params)
