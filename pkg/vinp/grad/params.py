import hashlib
from typing import Iterator

import numpy as np

from vinp.errors import ContractError
from vinp.grad.norm import BatchNormState
from vinp.grad.tensor import Tensor


class ModelParams:
    """Named parameters of one network, their Adam moments and batch-norm state.

    Lookup of an undeclared name raises, so a forward pass can only touch
    what its builder declared.
    """

    def __init__(self, network: str = ""):
        self.network = network
        self.tensors: dict[str, Tensor] = {}
        self.m1: dict[str, np.ndarray] = {}
        self.m2: dict[str, np.ndarray] = {}
        self.t = 0
        self.bn: dict[str, BatchNormState] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self.tensors:
            raise ContractError("ModelParams.add", f"duplicate parameter {name!r}")
        t = Tensor(data, requires_grad=True, name=name)
        self.tensors[name] = t
        return t

    def add_bn_state(self, name: str, momentum: float = 0.1) -> BatchNormState:
        if name in self.bn:
            raise ContractError("ModelParams.add_bn_state", f"duplicate batch-norm state {name!r}")
        self.bn[name] = BatchNormState(momentum=momentum)
        return self.bn[name]

    def __getitem__(self, name: str) -> Tensor:
        try:
            return self.tensors[name]
        except KeyError:
            raise ContractError("ModelParams", f"undeclared parameter {name!r} in {self.network or 'params'}")

    def bn_state(self, name: str) -> BatchNormState:
        try:
            return self.bn[name]
        except KeyError:
            raise ContractError("ModelParams", f"undeclared batch-norm state {name!r} in {self.network or 'params'}")

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    def count(self) -> int:
        """Total number of scalar parameters."""
        return int(sum(t.size for t in self.tensors.values()))

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray | None]:
        return {name: None if t.grad is None else t.grad.copy() for name, t in self.tensors.items()}

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.tensors.items()}

    def copy(self) -> "ModelParams":
        out = ModelParams(self.network)
        for name, t in self.tensors.items():
            out.add(name, t.data.copy())
        out.m1 = {k: v.copy() for k, v in self.m1.items()}
        out.m2 = {k: v.copy() for k, v in self.m2.items()}
        out.t = self.t
        out.bn = {k: v.copy() for k, v in self.bn.items()}
        return out

    def astype(self, dtype) -> "ModelParams":
        out = self.copy()
        for t in out.tensors.values():
            t.data = t.data.astype(dtype)
        return out

    def digest(self) -> str:
        """SHA-256 over names and raw parameter bytes, in declaration order."""
        h = hashlib.sha256()
        for name, t in self.tensors.items():
            h.update(name.encode())
            h.update(np.ascontiguousarray(t.data).tobytes())
        return h.hexdigest()

    def max_delta(self, before: dict[str, np.ndarray]) -> float:
        """Largest absolute change of any parameter against a snapshot from `arrays()`."""
        delta = 0.0
        for name, t in self.tensors.items():
            if t.size:
                delta = max(delta, float(np.max(np.abs(t.data.astype(np.float64) - before[name]))))
        return delta

    def bn_snapshot(self) -> dict[str, BatchNormState]:
        return {k: v.copy() for k, v in self.bn.items()}

    def restore_bn(self, snapshot: dict[str, BatchNormState]) -> None:
        """Puts back running statistics saved by `bn_snapshot()`."""
        self.bn = {k: v.copy() for k, v in snapshot.items()}
