from dataclasses import dataclass

import numpy as np

from vinp.enums import BnMode
from vinp.errors import ContractError, StatsUninitializedError
from vinp.grad.tensor import Tensor, record


@dataclass
class BatchNormState:
    """Running statistics of one batch-norm layer.

    The first train-mode update copies the batch statistics; later updates
    blend them in with `momentum`.
    """
    running_mean: np.ndarray | None = None
    running_var: np.ndarray | None = None
    momentum: float = 0.1
    updates: int = 0

    def initialized(self) -> bool:
        return self.running_mean is not None and self.running_var is not None

    def update(self, mean: np.ndarray, var: np.ndarray) -> None:
        if not self.initialized():
            self.running_mean = mean.copy()
            self.running_var = var.copy()
        else:
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * mean
            self.running_var = (1 - m) * self.running_var + m * var
        self.updates += 1

    def copy(self) -> "BatchNormState":
        return BatchNormState(
            running_mean=None if self.running_mean is None else self.running_mean.copy(),
            running_var=None if self.running_var is None else self.running_var.copy(),
            momentum=self.momentum,
            updates=self.updates,
        )


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, mode: BnMode, state: BatchNormState,
               eps: float = 1e-5, layer: str = "") -> Tensor:
    """Per-channel normalization over the batch and spatial axes.

    Train mode normalizes by the batch statistics and updates `state`; eval
    mode reads `state` only.

    Raises:
        ContractError: On channel mismatch or eps <= 0.
        StatsUninitializedError: In eval mode before any train-mode update.
    """
    if eps <= 0:
        raise ContractError("batch_norm", f"eps must be positive, got {eps}")
    if x.ndim < 2 or gamma.shape != (x.shape[1],) or beta.shape != (x.shape[1],):
        raise ContractError("batch_norm", f"input {x.shape} vs gamma {gamma.shape} beta {beta.shape}")
    c = x.shape[1]
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)
    xd = x.data.astype(np.float64)
    train = BnMode(mode) == BnMode.TRAIN
    if train:
        mean = xd.mean(axis=axes)
        var = xd.var(axis=axes)
        state.update(mean, var)
    else:
        if not state.initialized():
            raise StatsUninitializedError(layer)
        mean, var = state.running_mean, state.running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xd - mean.reshape(bshape)) * inv.reshape(bshape)
    g64 = gamma.data.astype(np.float64).reshape(bshape)
    y = g64 * xhat + beta.data.astype(np.float64).reshape(bshape)
    count = x.size // c

    def _backward(g):
        gd = g.astype(np.float64)
        dgamma = (gd * xhat).sum(axis=axes)
        dbeta = gd.sum(axis=axes)
        dxhat = gd * g64
        if train:
            dx = (inv.reshape(bshape) / count) * (
                count * dxhat
                - dxhat.sum(axis=axes, keepdims=True)
                - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True))
        else:
            dx = dxhat * inv.reshape(bshape)
        return dx, dgamma, dbeta

    return record(y.astype(x.dtype), (x, gamma, beta), _backward)
