from typing import Mapping

import numpy as np

from vinp.errors import ContractError
from vinp.grad.params import ModelParams


def adam_step(params: ModelParams,
              grads: Mapping[str, np.ndarray | None] = None,
              *,
              lr: float,
              beta1: float = 0.5,
              beta2: float = 0.999,
              eps: float = 1e-8,
              t: int = None) -> ModelParams:
    """Applies one bias-corrected Adam update in place.

    Args:
        params: Parameters and their moment state; moments start at zero.
        grads: Gradient per parameter name; defaults to each tensor's `.grad`.
            Missing or None entries count as zero.
        lr: Step size, must be positive.
        beta1: First-moment decay (0.5 for every training stage).
        beta2: Second-moment decay.
        eps: Denominator guard.
        t: Step index (>= 1); defaults to the stored counter plus one.

    Returns:
        The same `params`, updated, with `params.t` set to the step index.

    Raises:
        ContractError: If lr <= 0 or t < 1.
    """
    if lr <= 0:
        raise ContractError("adam_step", f"lr must be positive, got {lr}")
    step = params.t + 1 if t is None else t
    if step < 1:
        raise ContractError("adam_step", f"step index must be >= 1, got {step}")
    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step

    for name, p in params.tensors.items():
        g = p.grad if grads is None else grads.get(name)
        g = np.zeros(p.shape, dtype=np.float64) if g is None else np.asarray(g, dtype=np.float64)
        m = params.m1.get(name)
        v = params.m2.get(name)
        if m is None:
            m = np.zeros(p.shape, dtype=p.dtype)
            v = np.zeros(p.shape, dtype=p.dtype)
        # moments are kept in the parameter dtype so checkpoints round-trip exactly
        m = (beta1 * m.astype(np.float64) + (1.0 - beta1) * g).astype(p.dtype)
        v = (beta2 * v.astype(np.float64) + (1.0 - beta2) * (g * g)).astype(p.dtype)
        params.m1[name] = m
        params.m2[name] = v
        update = lr * (m.astype(np.float64) / bc1) / (np.sqrt(v.astype(np.float64) / bc2) + eps)
        p.data = (p.data.astype(np.float64) - update).astype(p.dtype)

    params.t = step
    return params
