from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from adaptattn.numcore.tensor import GradTape, Tensor


def grad_check(
    f: Callable[..., Tensor],
    point: Sequence[np.ndarray],
    eps: float = 1e-3,
) -> float:
    """Max relative error between backward gradients and central differences.

    ``f`` receives one leaf :class:`Tensor` per array in ``point`` and must
    return a scalar tensor. Every coordinate is perturbed, so keep inputs small.
    Relative error uses ``max(|a|, |b|, 1e-8)`` as the denominator.
    """
    base = [np.array(p, dtype=np.float64, copy=True) for p in point]

    leaves = [Tensor(p.copy(), requires_grad=True) for p in base]
    with GradTape() as tape:
        loss = f(*leaves)
    tape.backward(loss)
    analytic = [leaf.grad for leaf in leaves]

    def value(arrays):
        return float(f(*[Tensor(a) for a in arrays]).data)

    worst = 0.0
    for k, p in enumerate(base):
        for idx in np.ndindex(p.shape):
            shifted = [a.copy() for a in base]
            shifted[k][idx] = p[idx] + eps
            up = value(shifted)
            shifted[k][idx] = p[idx] - eps
            down = value(shifted)
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[k][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
