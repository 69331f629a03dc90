"""Differentiable tensor operations.

Every op computes its forward value with numpy and hands ``make_node`` a
closure returning one gradient per parent (``None`` for untracked inputs).
Broadcasting is limited to leading batch dimensions.
"""

from __future__ import annotations

import numpy as np

from adaptattn.errors import DataError, DimensionError
from adaptattn.numcore.tensor import Tensor, make_node


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after leading-dimension broadcasting."""
    if g.shape == shape:
        return g
    lead = g.ndim - len(shape)
    if lead > 0:
        g = g.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_trailing(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape == b.shape:
        return
    try:
        out = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        out = None
    big = a.shape if a.ndim >= b.ndim else b.shape
    if out != big:
        raise DimensionError(f"{what}: cannot combine shapes {a.shape} and {b.shape}")


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_trailing(a, b, "add")
    sa, sb = a.shape, b.shape

    def back(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return make_node(a.data + b.data, (a, b), back)


def sub(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_trailing(a, b, "sub")
    sa, sb = a.shape, b.shape

    def back(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return make_node(a.data - b.data, (a, b), back)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _check_trailing(a, b, "mul")
    ad, bd = a.data, b.data

    def back(g):
        return (
            _unbroadcast(g * bd, ad.shape) if a.requires_grad else None,
            _unbroadcast(g * ad, bd.shape) if b.requires_grad else None,
        )

    return make_node(ad * bd, (a, b), back)


def scale(x: Tensor, c: float) -> Tensor:
    c = x.data.dtype.type(c)
    return make_node(x.data * c, (x,), lambda g: (g * c,))


def add_constant(x: Tensor, c: np.ndarray) -> Tensor:
    """``x + c`` where ``c`` is untracked and broadcasts against ``x``."""
    c = np.asarray(c, dtype=x.dtype)
    out = x.data + c
    if out.shape != x.shape:
        raise DimensionError(f"add_constant: constant shape {c.shape} would change {x.shape}")
    return make_node(out, (x,), lambda g: (g,))


def matmul(a, b) -> Tensor:
    """Batched matrix product ``a @ b`` over matching or broadcast leading dims."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner dimensions of {a.shape} and {b.shape} disagree")
    ad, bd = a.data, b.data
    try:
        out = ad @ bd
    except ValueError as exc:
        raise DimensionError(f"matmul: cannot batch {a.shape} with {b.shape}") from exc

    def back(g):
        ga = _unbroadcast(g @ np.swapaxes(bd, -1, -2), ad.shape) if a.requires_grad else None
        gb = _unbroadcast(np.swapaxes(ad, -1, -2) @ g, bd.shape) if b.requires_grad else None
        return ga, gb

    return make_node(out, (a, b), back)


def linear(x, W, b=None) -> Tensor:
    """``x @ W + b`` batched over the leading dimensions of ``x``."""
    x, W = _as_tensor(x), _as_tensor(W)
    if W.ndim != 2 or x.ndim < 1 or x.shape[-1] != W.shape[0]:
        raise DimensionError(f"linear: x shape {list(x.shape)} incompatible with W shape {list(W.shape)}")
    n, m = W.shape
    if b is not None:
        b = _as_tensor(b)
        if b.shape != (m,):
            raise DimensionError(f"linear: bias shape {list(b.shape)} does not match W shape {list(W.shape)}")
    lead = x.shape[:-1]
    x2 = x.data.reshape(-1, n)
    out = x2 @ W.data
    if b is not None:
        out += b.data
    out = out.reshape(*lead, m)
    Wd = W.data

    def back(g):
        g2 = g.reshape(-1, m)
        gx = (g2 @ Wd.T).reshape(*lead, n) if x.requires_grad else None
        gW = x2.T @ g2 if W.requires_grad else None
        if b is None:
            return gx, gW
        return gx, gW, g2.sum(axis=0)

    parents = (x, W) if b is None else (x, W, b)
    return make_node(out, parents, back)


def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {src} as {tuple(shape)}") from exc
    return make_node(out, (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def _check_axis(x: Tensor, axis: int) -> int:
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"axis {axis} invalid for shape {x.shape}")
    return axis % x.ndim


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    axis = _check_axis(x, axis)
    y = x.data - x.data.max(axis=axis, keepdims=True)
    np.exp(y, out=y)
    y /= y.sum(axis=axis, keepdims=True)

    def back(g):
        gx = g * y
        gx -= y * gx.sum(axis=axis, keepdims=True)
        return (gx,)

    return make_node(y, (x,), back)


def relu(x: Tensor) -> Tensor:
    positive = x.data > 0
    return make_node(np.where(positive, x.data, 0).astype(x.dtype), (x,), lambda g: (g * positive,))


def log(x: Tensor, floor: float | None = None) -> Tensor:
    """Natural log; with ``floor`` the input is clamped below and the clamped entries get zero gradient."""
    xd = x.data
    if floor is None:
        clipped, live = xd, None
    else:
        live = ~(xd < floor)  # NaN stays NaN so callers can detect it
        clipped = np.where(live, xd, floor).astype(x.dtype)

    def back(g):
        gx = g / clipped
        return (gx if live is None else gx * live,)

    return make_node(np.log(clipped), (x,), back)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(
            f"layer_norm: gamma {gamma.shape} / beta {beta.shape} do not match last dimension of {x.shape}"
        )
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    centered = xd - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    out = xhat * gamma.data + beta.data
    lead = tuple(range(xd.ndim - 1))

    def back(g):
        gx = None
        if x.requires_grad:
            gxhat = g * gamma.data
            gx = inv_std * (
                gxhat
                - gxhat.mean(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True)
            )
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return make_node(out, (x, gamma, beta), back)


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors numpy naming
    shape, dtype = x.shape, x.dtype
    return make_node(np.asarray(x.data.sum()), (x,), lambda g: (np.full(shape, g, dtype=dtype),))


def mean(x: Tensor) -> Tensor:
    shape, dtype, n = x.shape, x.dtype, x.data.size
    return make_node(np.asarray(x.data.mean()), (x,), lambda g: (np.full(shape, g / n, dtype=dtype),))


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]``; out-of-range ids raise :class:`DataError`."""
    ids = np.asarray(ids)
    if ids.dtype.kind not in "iu":
        raise DataError(f"embedding ids must be integers, got dtype {ids.dtype}")
    n_rows = table.shape[0]
    if ids.size:
        bad = ids[(ids < 0) | (ids >= n_rows)]
        if bad.size:
            raise DataError(f"token id {int(bad.flat[0])} out of range for vocabulary of size {n_rows}")
    flat = ids.reshape(-1)

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, flat, g.reshape(flat.size, -1))
        return (gt,)

    return make_node(table.data[ids], (table,), back)


def masked_mean(x: Tensor, mask: np.ndarray) -> Tensor:
    """Mean of ``x[b, s, :]`` over positions with ``mask[b, s] == 1``."""
    mask = np.asarray(mask)
    if x.ndim != 3 or mask.shape != x.shape[:2]:
        raise DimensionError(f"masked_mean: mask shape {mask.shape} does not match x shape {x.shape}")
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        row = int(np.flatnonzero(counts == 0)[0])
        raise DataError(f"batch item {row} has no valid positions (empty document)")
    weights = (mask / counts[:, None]).astype(x.dtype)[:, :, None]
    out = (x.data * weights).sum(axis=1)
    return make_node(out, (x,), lambda g: (g[:, None, :] * weights,))


def take_along(x: Tensor, index: np.ndarray) -> Tensor:
    """Pick ``x[i, index[i]]`` for a 2-D ``x``."""
    index = np.asarray(index, dtype=np.int64)
    if x.ndim != 2 or index.shape != (x.shape[0],):
        raise DimensionError(f"take_along: index shape {index.shape} does not fit x shape {x.shape}")
    rows = np.arange(x.shape[0])
    shape, dtype = x.shape, x.dtype

    def back(g):
        gx = np.zeros(shape, dtype=dtype)
        gx[rows, index] = g
        return (gx,)

    return make_node(x.data[rows, index], (x,), back)
