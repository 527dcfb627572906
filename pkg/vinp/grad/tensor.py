"""Dense tensors and the computation tape behind reverse-mode differentiation.

Every differentiable op builds its output with `record`, handing the tape a
closure that maps the output gradient to one gradient per input (`None` for
inputs that need none). `backward` replays the tape in reverse order.

Storage is float32 unless a tensor is built from float64 data, in which case
every op downstream keeps float64 (used by the finite-difference checks).
"""
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from vinp.errors import ContractError

BackwardFn = Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "is_leaf", "name")

    def __init__(self, data, requires_grad: bool = False, name: str = ""):
        arr = np.asarray(data)
        if arr.dtype != np.float32 and arr.dtype != np.float64:
            arr = arr.astype(np.float32)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.is_leaf = True
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError("item", f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, keep_tape: bool = False) -> None:
        backward(self, keep_tape=keep_tape)

    def __add__(self, other) -> "Tensor":
        return add(self, other)

    def __radd__(self, other) -> "Tensor":
        return add(self, other)

    def __sub__(self, other) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other) -> "Tensor":
        return sub(as_tensor(other, like=self), self)

    def __mul__(self, other) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other) -> "Tensor":
        return mul(self, other)

    def __neg__(self) -> "Tensor":
        return scale(self, -1.0)

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"


@dataclass
class TapeEntry:
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class ComputationTape:
    """Ordered record of the differentiable ops applied since the last backward."""

    def __init__(self):
        self.entries: list[TapeEntry] = []
        self.enabled = True

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward: BackwardFn) -> None:
        if not self.enabled or not any(t.requires_grad for t in inputs):
            return
        output.requires_grad = True
        output.is_leaf = False
        self.entries.append(TapeEntry(tuple(inputs), output, backward))

    def clear(self) -> None:
        self.entries = []

    def __len__(self) -> int:
        return len(self.entries)


_TAPE = ComputationTape()


def get_tape() -> ComputationTape:
    return _TAPE


@contextmanager
def no_grad() -> Iterator[None]:
    """Suspends recording; ops inside produce constants."""
    prev = _TAPE.enabled
    _TAPE.enabled = False
    try:
        yield
    finally:
        _TAPE.enabled = prev


def record(data: np.ndarray, inputs: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    out = Tensor(data)
    _TAPE.record(inputs, out, backward_fn)
    return out


def as_tensor(value, like: Tensor = None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    arr = np.asarray(value)
    if like is not None:
        arr = arr.astype(like.dtype)
    return Tensor(arr)


def backward(loss: Tensor, keep_tape: bool = False) -> None:
    """Populates `.grad` of every requires_grad leaf reachable from `loss`.

    Leaf gradients accumulate onto existing `.grad` values; callers zero them
    between steps. The tape is cleared afterwards unless `keep_tape` is set,
    which lets a second objective be differentiated over the same graph.

    Raises:
        ContractError: If loss is not a scalar.
    """
    if loss.size != 1:
        raise ContractError("backward", f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    if loss.is_leaf and loss.requires_grad:
        leaves[id(loss)] = loss

    for entry in reversed(_TAPE.entries):
        g = grads.pop(id(entry.output), None)
        if g is None:
            continue
        in_grads = entry.backward(g)
        for inp, ig in zip(entry.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            ig = np.asarray(ig, dtype=inp.dtype).reshape(inp.shape)
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + ig
            else:
                grads[key] = ig
            if inp.is_leaf:
                leaves[key] = inp

    for key, leaf in leaves.items():
        g = grads[key]
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g

    if not keep_tape:
        _TAPE.clear()


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data + b.data

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record(out.astype(a.dtype, copy=False), (a, b), _backward)


def sub(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data - b.data

    def _backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return record(out.astype(a.dtype, copy=False), (a, b), _backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, like=a)
    out = a.data * b.data

    def _backward(g):
        ga = _unbroadcast(g * b.data, a.shape) if a.requires_grad else None
        gb = _unbroadcast(g * a.data, b.shape) if b.requires_grad else None
        return ga, gb

    return record(out.astype(a.dtype, copy=False), (a, b), _backward)


def scale(a: Tensor, k: float) -> Tensor:
    def _backward(g):
        return (g * k,)

    return record((a.data * k).astype(a.dtype, copy=False), (a,), _backward)


def shift(a: Tensor, k: float) -> Tensor:
    def _backward(g):
        return (g,)

    return record((a.data + k).astype(a.dtype, copy=False), (a,), _backward)
