"""The two corruption protocols: random deletion and single-view scanning.

Both only ever clear voxels, so a corrupted grid is a subset of its source.
"""
from dataclasses import dataclass

import numpy as np

from vinp.enums import CorruptionKind, ViewDirection
from vinp.errors import ContractError
from vinp.vox.grid import VoxelGrid

SCAN_THICKNESS = 2


@dataclass(frozen=True)
class CorruptionSpec:
    kind: CorruptionKind
    noise_fraction: float = 0.0
    view_direction: ViewDirection = ViewDirection.POS_X
    seed: int = 0
    thickness: int = SCAN_THICKNESS

    def __post_init__(self):
        object.__setattr__(self, "kind", CorruptionKind(self.kind))
        object.__setattr__(self, "view_direction", ViewDirection(self.view_direction))
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ContractError("CorruptionSpec", f"noise_fraction {self.noise_fraction} outside [0, 1]")
        if self.thickness < 1:
            raise ContractError("CorruptionSpec", f"scan thickness must be >= 1, got {self.thickness}")

    def with_seed(self, seed: int) -> "CorruptionSpec":
        return CorruptionSpec(self.kind, self.noise_fraction, self.view_direction, seed, self.thickness)

    def descriptor(self) -> str:
        if self.kind == CorruptionKind.RANDOM_DELETION:
            return f"{self.kind.value}:p={self.noise_fraction:g}:seed={self.seed}"
        return f"{self.kind.value}:{self.view_direction.value}:t={self.thickness}"


def parse_descriptor(text: str) -> CorruptionSpec:
    parts = text.split(":")
    try:
        kind = CorruptionKind(parts[0])
        if kind == CorruptionKind.RANDOM_DELETION:
            fields = dict(p.split("=", 1) for p in parts[1:])
            return CorruptionSpec(kind, noise_fraction=float(fields["p"]), seed=int(fields["seed"]))
        return CorruptionSpec(kind, view_direction=ViewDirection(parts[1]),
                              thickness=int(parts[2].split("=", 1)[1]))
    except (ValueError, KeyError, IndexError):
        raise ContractError("parse_descriptor", f"bad corruption descriptor {text!r}")


def inject_random_noise(grid: VoxelGrid, fraction: float, seed: int) -> VoxelGrid:
    """Deletes each occupied voxel independently with probability `fraction`.

    Raises:
        ContractError: If fraction is outside [0, 1].
    """
    if not 0.0 <= fraction <= 1.0:
        raise ContractError("inject_random_noise", f"fraction {fraction} outside [0, 1]")
    rng = np.random.default_rng(seed)
    drop = rng.random(grid.occupancy.shape) < fraction
    return VoxelGrid(grid.resolution, grid.occupancy & ~drop,
                     f"random_deletion:p={fraction:g}:seed={seed}")


def simulate_scan(grid: VoxelGrid, direction: ViewDirection, thickness: int = SCAN_THICKNESS) -> VoxelGrid:
    """Orthographic single-view capture.

    Along every ray parallel to `direction` keeps the first `thickness`
    occupied voxels met, in ray order, and clears the rest.

    Raises:
        ContractError: On an empty grid.
    """
    if grid.count() == 0:
        raise ContractError("simulate_scan", "grid is empty")
    direction = ViewDirection(direction)
    occ = grid.occupancy
    axis = direction.axis()
    if direction.reversed():
        occ = np.flip(occ, axis=axis)
    seen = np.cumsum(occ, axis=axis)
    kept = occ & (seen <= thickness)
    if direction.reversed():
        kept = np.flip(kept, axis=axis)
    return VoxelGrid(grid.resolution, kept, f"single_view_scan:{direction.value}:t={thickness}")


def apply_corruption(grid: VoxelGrid, spec: CorruptionSpec) -> VoxelGrid:
    if spec.kind == CorruptionKind.RANDOM_DELETION:
        return inject_random_noise(grid, spec.noise_fraction, spec.seed)
    return simulate_scan(grid, spec.view_direction, spec.thickness)
