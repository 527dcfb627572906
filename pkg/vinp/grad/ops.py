"""Elementwise, reduction, reshaping and dense ops over `Tensor`."""
from typing import Sequence

import numpy as np

from vinp.enums import Activation
from vinp.errors import ContractError
from vinp.grad.tensor import Tensor, record


def sum(a: Tensor) -> Tensor:
    out = np.sum(a.data, dtype=np.float64).astype(a.dtype)

    def _backward(g):
        return (np.broadcast_to(g, a.shape),)

    return record(out, (a,), _backward)


def mean(a: Tensor) -> Tensor:
    n = a.size
    out = (np.sum(a.data, dtype=np.float64) / n).astype(a.dtype)

    def _backward(g):
        return (np.broadcast_to(g / n, a.shape),)

    return record(out, (a,), _backward)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = a.data.reshape(shape)

    def _backward(g):
        return (g.reshape(a.shape),)

    return record(out, (a,), _backward)


def flatten(a: Tensor) -> Tensor:
    """Collapses every axis after the batch axis."""
    return reshape(a, (a.shape[0], -1))


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ContractError("stack", "no tensors to stack")
    shape = tensors[0].shape
    for t in tensors:
        if t.shape != shape:
            raise ContractError("stack", f"shape {t.shape} differs from {shape}")
    out = np.stack([t.data for t in tensors], axis=axis)

    def _backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return record(out, tuple(tensors), _backward)


def log(a: Tensor) -> Tensor:
    def _backward(g):
        return (g / a.data,)

    return record(np.log(a.data), (a,), _backward)


def abs(a: Tensor) -> Tensor:
    def _backward(g):
        return (g * np.sign(a.data),)

    return record(np.abs(a.data), (a,), _backward)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clips values to [lo, hi]; gradient passes only where no clipping happened."""
    inside = (a.data >= lo) & (a.data <= hi)

    def _backward(g):
        return (g * inside,)

    return record(np.clip(a.data, lo, hi).astype(a.dtype, copy=False), (a,), _backward)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def _backward(g):
        return (g * mask,)

    return record(np.where(mask, a.data, 0).astype(a.dtype, copy=False), (a,), _backward)


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)

    def _backward(g):
        return (g * (1 - y * y),)

    return record(y, (a,), _backward)


def sigmoid(a: Tensor) -> Tensor:
    # tanh form keeps sigmoid(0) == 0.5 exactly and stays finite for large |x|
    y = (0.5 * (1 + np.tanh(0.5 * a.data))).astype(a.dtype, copy=False)

    def _backward(g):
        return (g * y * (1 - y),)

    return record(y, (a,), _backward)


_ACTIVATIONS = {
    Activation.RELU: relu,
    Activation.TANH: tanh,
    Activation.SIGMOID: sigmoid,
}


def activation(a: Tensor, kind: Activation) -> Tensor:
    return _ACTIVATIONS[Activation(kind)](a)


def linear(x: Tensor, weight: Tensor, bias: Tensor = None) -> Tensor:
    """Affine map `x @ weight.T + bias` for x of shape [N, F_in].

    Raises:
        ContractError: If x is not 2-D or F_in does not match weight.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise ContractError("linear", f"input {x.shape} incompatible with weight {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ContractError("linear", f"bias {bias.shape} does not match weight {weight.shape}")
    x64 = x.data.astype(np.float64)
    w64 = weight.data.astype(np.float64)
    out = x64 @ w64.T
    if bias is not None:
        out = out + bias.data
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def _backward(g):
        g64 = g.astype(np.float64)
        gx = g64 @ w64 if x.requires_grad else None
        gw = g64.T @ x64 if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g64.sum(axis=0)

    return record(out.astype(x.dtype), inputs, _backward)


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer `labels` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ContractError("softmax_cross_entropy", f"logits {logits.shape} vs labels {labels.shape}")
    z = logits.data.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = labels.shape[0]
    rows = np.arange(n)
    out = -logp[rows, labels].sum() / n

    def _backward(g):
        p = np.exp(logp)
        p[rows, labels] -= 1.0
        return (g * p / n,)

    return record(np.asarray(out, dtype=logits.dtype), (logits,), _backward)
