from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from vinp.errors import ContractError
from vinp.grad.tensor import Tensor, backward, get_tape, no_grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    checked: int
    per_input: dict[str, float] = field(default_factory=dict)

    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def grad_check(build: Callable[[], Tensor],
               wrt: Mapping[str, Tensor],
               tolerance: float = 1e-3,
               *,
               h: float = 1e-3,
               sample: int = None,
               seed: int = 0,
               floor: float = 1e-6) -> GradCheckReport:
    """Compares analytic gradients against central differences.

    Args:
        build: Recomputes the scalar graph output from the current values of
            the `wrt` tensors.
        wrt: Leaf tensors to check, ideally float64.
        tolerance: Pass threshold on the max relative error.
        h: Central-difference step.
        sample: If set, check at most this many randomly chosen entries per
            tensor instead of all of them.
        seed: Seed of the entry sampler.
        floor: Lower bound on the relative-error denominator.

    Returns:
        A report with the max relative error |a - n| / max(|a|, |n|, floor).
    """
    for name, t in wrt.items():
        if not t.requires_grad:
            raise ContractError("grad_check", f"{name} does not require grad")
        t.grad = None
    get_tape().clear()
    loss = build()
    backward(loss)
    analytic = {name: (np.zeros(t.shape) if t.grad is None else t.grad.astype(np.float64))
                for name, t in wrt.items()}

    rng = np.random.default_rng(seed)
    report = GradCheckReport(max_rel_error=0.0, tolerance=tolerance, checked=0)
    for name, t in wrt.items():
        t.data = np.ascontiguousarray(t.data)
        flat = t.data.reshape(-1)
        if sample is None or sample >= flat.size:
            indices = np.arange(flat.size)
        else:
            indices = np.sort(rng.choice(flat.size, size=sample, replace=False))
        worst = 0.0
        for i in indices:
            orig = flat[i]
            with no_grad():
                flat[i] = orig + h
                f_plus = float(np.sum(build().data, dtype=np.float64))
                flat[i] = orig - h
                f_minus = float(np.sum(build().data, dtype=np.float64))
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * h)
            a = float(analytic[name].reshape(-1)[i])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, rel)
        report.per_input[name] = worst
        report.max_rel_error = max(report.max_rel_error, worst)
        report.checked += len(indices)
    return report
