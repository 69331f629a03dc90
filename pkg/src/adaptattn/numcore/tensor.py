"""Tensor values and the gradient tape.

Operations append nodes to the active :class:`GradTape` in creation order, which
is already a topological order, so ``backward`` is a single reverse sweep.
With no tape active nothing is recorded and forward passes keep no closures.
"""

from __future__ import annotations

import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from adaptattn.errors import ContractError

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]

_local = threading.local()


def _tape_stack() -> list["GradTape"]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def active_tape() -> "GradTape | None":
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense row-major array plus the bookkeeping reverse mode needs.

    Leaves created with ``requires_grad=True`` own a ``grad`` array that
    accumulates across backward calls until :meth:`zero_grad`.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_node_grad")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype.kind != "f":
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self._node_grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # operator sugar; the real work lives in numcore.ops
    def __add__(self, other):
        from adaptattn.numcore import ops

        return ops.add(self, other)

    def __mul__(self, other):
        from adaptattn.numcore import ops

        return ops.mul(self, other)

    def __matmul__(self, other):
        from adaptattn.numcore import ops

        return ops.matmul(self, other)


def make_node(data: np.ndarray, parents: Iterable[Tensor], backward: BackwardFn) -> Tensor:
    """Wrap an op result, recording it on the active tape when any parent is tracked."""
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._node_grad = None
    out._parents = ()
    out._backward = None
    parents = tuple(parents)
    tape = active_tape()
    tracked = tape is not None and any(p.requires_grad for p in parents)
    out.requires_grad = tracked
    if tracked:
        out._parents = parents
        out._backward = backward
        tape._record(out)
    return out


class GradTape:
    """Records operations while entered; ``backward`` walks them in reverse.

    A tape belongs to one thread. Calling ``backward`` twice on the same tape
    adds the gradients twice (accumulation is explicit, see ``Tensor.zero_grad``).
    """

    def __init__(self):
        self._nodes: list[Tensor] = []

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def _record(self, node: Tensor) -> None:
        self._nodes.append(node)

    def __len__(self) -> int:
        return len(self._nodes)

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not loss.requires_grad:
            return
        seed = np.ones_like(loss.data)
        if loss.is_leaf:
            loss.grad += seed
            return
        loss._node_grad = seed
        try:
            for node in reversed(self._nodes):
                g = node._node_grad
                if g is None:
                    continue
                node._node_grad = None
                parent_grads = node._backward(g)
                for parent, pg in zip(node._parents, parent_grads):
                    if pg is None or not parent.requires_grad:
                        continue
                    if parent.is_leaf:
                        parent.grad += pg
                    elif parent._node_grad is None:
                        parent._node_grad = pg
                    else:
                        parent._node_grad = parent._node_grad + pg
        finally:
            for node in self._nodes:
                node._node_grad = None


def backward(loss: Tensor, tape: GradTape) -> None:
    """Propagate d(loss)/d(leaf) into every tracked leaf's ``grad``."""
    tape.backward(loss)


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


def constant(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=False, dtype=dtype)
