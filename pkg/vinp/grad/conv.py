"""Strided N-d convolution (k = 2 or 3) and its exact transpose.

Both ops go through one im2col layout: rows are output positions, columns are
(input channel, kernel offset) with the kernel offset innermost. Products are
accumulated in float64 and stored back in the input dtype.
"""
import itertools
from math import prod

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from vinp.errors import ContractError
from vinp.grad.tensor import Tensor, record


def out_extent(n: int, kernel: int, stride: int, pad: int) -> int:
    return (n + 2 * pad - kernel) // stride + 1


def _im2col(x: np.ndarray, kernel: int, stride: int, pad: int) -> tuple[np.ndarray, tuple[int, ...]]:
    nd = x.ndim - 2
    n, c = x.shape[:2]
    xp = np.pad(x, [(0, 0), (0, 0)] + [(pad, pad)] * nd)
    win = sliding_window_view(xp, (kernel,) * nd, axis=tuple(range(2, 2 + nd)))
    win = win[(slice(None), slice(None)) + (slice(None, None, stride),) * nd]
    out_sp = win.shape[2:2 + nd]
    # (N, C, *O, *K) -> (N, *O, C, *K)
    perm = (0,) + tuple(range(2, 2 + nd)) + (1,) + tuple(range(2 + nd, 2 + 2 * nd))
    cols = np.ascontiguousarray(win.transpose(perm), dtype=np.float64)
    return cols.reshape(n * prod(out_sp), c * kernel ** nd), out_sp


def _col2im(cols: np.ndarray, x_shape: tuple[int, ...], kernel: int, stride: int, pad: int,
            out_sp: tuple[int, ...]) -> np.ndarray:
    nd = len(x_shape) - 2
    n, c = x_shape[:2]
    dxp = np.zeros((n, c) + tuple(s + 2 * pad for s in x_shape[2:]), dtype=np.float64)
    blocks = cols.reshape((n,) + tuple(out_sp) + (c,) + (kernel,) * nd)
    # (N, *O, C, *K) -> (N, C, *O, *K)
    perm = (0, nd + 1) + tuple(range(1, nd + 1)) + tuple(range(nd + 2, 2 * nd + 2))
    blocks = blocks.transpose(perm)
    for offs in itertools.product(range(kernel), repeat=nd):
        dst = (slice(None), slice(None)) + tuple(
            slice(o, o + stride * (m - 1) + 1, stride) for o, m in zip(offs, out_sp))
        dxp[dst] += blocks[(Ellipsis,) + offs]
    crop = (slice(None), slice(None)) + tuple(slice(pad, pad + s) for s in x_shape[2:])
    return dxp[crop]


def _check(op: str, x: Tensor, weight: Tensor, bias: Tensor | None, in_axis: int) -> int:
    nd = x.ndim - 2
    if nd not in (2, 3):
        raise ContractError(op, f"expected a [N, C, 2-D or 3-D] input, got shape {x.shape}")
    if weight.ndim != x.ndim:
        raise ContractError(op, f"weight rank {weight.ndim} does not match input rank {x.ndim}")
    kernel = weight.shape[2]
    if any(k != kernel for k in weight.shape[2:]):
        raise ContractError(op, f"kernel must be cubic, got {weight.shape[2:]}")
    if weight.shape[in_axis] != x.shape[1]:
        raise ContractError(op, f"weight C_in {weight.shape[in_axis]} does not match input C_in {x.shape[1]}")
    c_out = weight.shape[1 - in_axis]
    if bias is not None and bias.shape != (c_out,):
        raise ContractError(op, f"bias {bias.shape} does not match {c_out} output channels")
    return kernel


def conv_nd(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 2, pad: int = 2) -> Tensor:
    """Cross-correlation with zero padding.

    Args:
        x: Input of shape [N, C_in, D1..Dk].
        weight: Kernel of shape [C_out, C_in, K..K].
        bias: Per-output-channel bias or None.

    Returns:
        Output of shape [N, C_out, (Di + 2*pad - K)//stride + 1 ..]; with K=5,
        pad=2, stride=2 every extent becomes ceil(Di/2).

    Raises:
        ContractError: On rank, channel or kernel mismatch.
    """
    kernel = _check("conv_nd", x, weight, bias, in_axis=1)
    n = x.shape[0]
    c_out = weight.shape[0]
    if any(out_extent(s, kernel, stride, pad) < 1 for s in x.shape[2:]):
        raise ContractError("conv_nd", f"input extents {x.shape[2:]} too small for kernel {kernel}")
    cols, out_sp = _im2col(x.data, kernel, stride, pad)
    w2 = weight.data.reshape(c_out, -1).astype(np.float64)
    y2 = cols @ w2.T
    if bias is not None:
        y2 += bias.data
    y = np.moveaxis(y2.reshape((n,) + tuple(out_sp) + (c_out,)), -1, 1)
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def _backward(g):
        g2 = np.moveaxis(g, 1, -1).reshape(-1, c_out).astype(np.float64)
        gx = _col2im(g2 @ w2, x.shape, kernel, stride, pad, out_sp) if x.requires_grad else None
        gw = (g2.T @ cols).reshape(weight.shape) if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g2.sum(axis=0)

    return record(np.ascontiguousarray(y, dtype=x.dtype), inputs, _backward)


def conv_transpose_nd(x: Tensor, weight: Tensor, bias: Tensor | None, stride: int = 2, pad: int = 2) -> Tensor:
    """Transposed convolution, the linear adjoint of `conv_nd` for the same weight.

    Args:
        x: Input of shape [N, C_in, D1..Dk].
        weight: Kernel of shape [C_in, C_out, K..K] (the layout `conv_nd`
            uses for a C_out -> C_in convolution).
        bias: Per-output-channel bias or None.

    Returns:
        Output of shape [N, C_out, D1*stride ..].

    Raises:
        ContractError: On rank/channel mismatch or when a stride-times output
            would not convolve back to the input extent.
    """
    kernel = _check("conv_transpose_nd", x, weight, bias, in_axis=0)
    n, c_in = x.shape[:2]
    c_out = weight.shape[1]
    in_sp = x.shape[2:]
    out_sp = tuple(s * stride for s in in_sp)
    for s, o in zip(in_sp, out_sp):
        if out_extent(o, kernel, stride, pad) != s:
            raise ContractError("conv_transpose_nd",
                                f"pad {pad} does not map extent {o} back to {s} with kernel {kernel}")
    x2 = np.moveaxis(x.data, 1, -1).reshape(-1, c_in).astype(np.float64)
    w2 = weight.data.reshape(c_in, -1).astype(np.float64)
    y = _col2im(x2 @ w2, (n, c_out) + out_sp, kernel, stride, pad, in_sp)
    if bias is not None:
        y += bias.data.reshape((1, c_out) + (1,) * len(out_sp))
    inputs = (x, weight) if bias is None else (x, weight, bias)

    def _backward(g):
        gcols, _ = _im2col(g, kernel, stride, pad)
        gx = None
        if x.requires_grad:
            gx = np.moveaxis((gcols @ w2.T).reshape((n,) + tuple(in_sp) + (c_in,)), -1, 1)
        gw = (x2.T @ gcols).reshape(weight.shape) if weight.requires_grad else None
        if bias is None:
            return gx, gw
        return gx, gw, g.astype(np.float64).sum(axis=(0,) + tuple(range(2, g.ndim)))

    return record(np.ascontiguousarray(y, dtype=x.dtype), inputs, _backward)
