"""Principal-axis alignment of occupancy grids.

Eigenvectors of the occupied-voxel covariance, in descending eigenvalue order,
become the rows of the rotation. Each row's sign makes the third central
moment along it non-negative; when that moment nearly vanishes the sign
favours the row's dominant component being positive. Near-equal eigenvalues
share a subspace whose basis is taken closest to the coordinate axes, lowest
axis first, so a grid already aligned within that subspace stays put.
"""
import logging
from dataclasses import dataclass

import numpy as np

from vinp.errors import AlignmentError
from vinp.vox.grid import VoxelGrid

NEAR_EQUAL_NOTE = "pca:near-equal-eigenvalues"

# eigenvalue gaps below this fraction of the trace are tied and flagged
_NEAR_EQUAL_RTOL = 5e-2
_COLLINEAR_RTOL = 1e-9
_MOMENT_RTOL = 1e-2
# rotations within this max-abs distance of identity are treated as identity
_SNAP_ATOL = 5e-2


@dataclass(frozen=True)
class Alignment:
    grid: VoxelGrid
    rotation: np.ndarray
    centroid: np.ndarray
    eigenvalues: np.ndarray


def _axis_nearest_basis(basis: np.ndarray) -> list[np.ndarray]:
    # orthonormal basis of span(basis) built from projected coordinate axes
    proj = basis @ basis.T
    k = basis.shape[1]
    picked = []
    for j in np.argsort(-np.linalg.norm(proj, axis=0), kind="stable"):
        u = proj[:, j].copy()
        for _, o in picked:
            u -= (u @ o) * o
        norm = float(np.linalg.norm(u))
        if norm > 1e-6:
            picked.append((int(j), u / norm))
        if len(picked) == k:
            break
    return [u for _, u in sorted(picked, key=lambda p: p[0])]


def principal_axes(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (rotation rows, eigenvalues descending, centroid) of a point set."""
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered / len(points)
    w, v = np.linalg.eigh(cov)
    desc = np.argsort(-w, kind="stable")
    w, v = w[desc], v[:, desc]
    trace = max(float(w.sum()), 1e-300)

    groups, start = [], 0
    for i in range(1, 4):
        if i == 3 or (w[i - 1] - w[i]) / trace >= _NEAR_EQUAL_RTOL:
            groups.append(list(range(start, i)))
            start = i

    rows = []
    for group in groups:
        axes = [v[:, group[0]]] if len(group) == 1 else _axis_nearest_basis(v[:, group])
        for e in axes:
            e = e.copy()
            proj = centered @ e
            moment = float(np.mean(proj ** 3))
            spread = float(np.mean(np.abs(proj) ** 3)) or 1.0
            if abs(moment) <= _MOMENT_RTOL * spread:
                if e[int(np.argmax(np.abs(e)))] < 0:
                    e = -e
            elif moment < 0:
                e = -e
            rows.append(e)
    return np.array(rows), w, centroid


def rotate_grid(grid: VoxelGrid, rotation: np.ndarray, centroid: np.ndarray, meta: str = None) -> VoxelGrid:
    """Nearest-voxel resampling of a grid rotated about `centroid`.

    Output voxel q samples source floor(R^T (q - c) + c + 1/2); sources outside the
    cube read as empty.
    """
    d = grid.resolution
    q = np.stack(np.meshgrid(*(np.arange(d),) * 3, indexing="ij"), axis=-1).reshape(-1, 3).astype(np.float64)
    src = np.floor((q - centroid) @ rotation + centroid + 0.5).astype(np.int64)
    inside = np.all((src >= 0) & (src < d), axis=1)
    occ = np.zeros(d ** 3, dtype=bool)
    s = src[inside]
    occ[inside] = grid.occupancy[s[:, 0], s[:, 1], s[:, 2]]
    return VoxelGrid(d, occ.reshape(d, d, d), grid.meta if meta is None else meta)


def scale_centroid(centroid: np.ndarray, factor: float) -> np.ndarray:
    """Maps a voxel-center coordinate to the same point at `factor` times the resolution."""
    return (np.asarray(centroid, dtype=np.float64) + 0.5) * factor - 0.5


def pca_align(grid: VoxelGrid) -> Alignment:
    """Rotates a grid so its principal axes map to +x, +y, +z.

    The grid is re-rasterized by nearest-voxel resampling about the centroid
    of its occupied voxels; voxels mapped outside the cube are dropped.

    Raises:
        AlignmentError: With fewer than 3 occupied voxels or when they are collinear.
    """
    points = np.argwhere(grid.occupancy).astype(np.float64)
    if len(points) < 3:
        raise AlignmentError(len(points))
    rotation, eigenvalues, centroid = principal_axes(points)
    trace = float(eigenvalues.sum())
    if eigenvalues[1] <= _COLLINEAR_RTOL * trace:
        raise AlignmentError(len(points), "occupied voxels are collinear")

    meta = grid.meta
    gaps = np.abs(np.diff(eigenvalues)) / trace
    if np.any(gaps < _NEAR_EQUAL_RTOL):
        logging.debug(f"vinp: pca_align eigenvalues {eigenvalues.round(4).tolist()} nearly equal, axis choice unstable")
        meta = f"{meta};{NEAR_EQUAL_NOTE}" if meta else NEAR_EQUAL_NOTE

    if np.max(np.abs(rotation - np.eye(3))) <= _SNAP_ATOL:
        return Alignment(grid.with_meta(meta), np.eye(3), centroid, eigenvalues)
    return Alignment(rotate_grid(grid, rotation, centroid, meta), rotation, centroid, eigenvalues)


def canonical_pose(grid: VoxelGrid, max_rounds: int = 4) -> tuple[VoxelGrid, list[Alignment]]:
    """Repeats pca_align until the grid is a fixed point of it.

    Returns the final grid and the alignment applied in each round, so paired
    grids can follow the same rotations.

    Raises:
        AlignmentError: When alignment is undefined or no fixed point is reached.
    """
    steps = []
    for _ in range(max_rounds):
        result = pca_align(grid)
        if result.grid == grid:
            return result.grid, steps
        steps.append(result)
        grid = result.grid
    raise AlignmentError(grid.count(), f"no fixed pose after {max_rounds} rounds")


def follow_pose(grid: VoxelGrid, steps: list[Alignment], factor: float = 1.0) -> VoxelGrid:
    """Applies the rotations recorded by canonical_pose to a paired grid at `factor` times the resolution."""
    for step in steps:
        grid = rotate_grid(grid, step.rotation, scale_centroid(step.centroid, factor))
    return grid
