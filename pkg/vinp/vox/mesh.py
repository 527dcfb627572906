"""Triangle meshes in a minimal OFF-style text format and their voxelization.

Format: an optional `OFF` line, then `<vertex count> <face count> [edges]`,
one `x y z` line per vertex, one face line per face (`3 a b c`, `a b c`, or
`k i1 .. ik` for a polygon, fan-triangulated). `#` starts a comment.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from vinp.enums import FillMode
from vinp.errors import ContractError, MeshParseError
from vinp.vox.grid import VoxelGrid

# inset keeps faces that land on voxel boundary planes inside one voxel layer
_INSET = 1e-6


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray
    faces: np.ndarray

    def __len__(self) -> int:
        return len(self.faces)


def parse_mesh(text: str, path: str = None) -> TriangleMesh:
    """Parses OFF-style mesh text.

    Raises:
        MeshParseError: With the offending line number, or for an empty mesh.
    """
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            lines.append((lineno, body.split()))
    if lines and lines[0][1] == ["OFF"]:
        lines = lines[1:]
    if not lines:
        raise MeshParseError("empty mesh", path=path)

    lineno, head = lines[0]
    try:
        nv, nf = int(head[0]), int(head[1])
    except (ValueError, IndexError):
        raise MeshParseError(f"expected '<vertices> <faces>', got {' '.join(head)!r}", lineno, path)
    if nv <= 0 or nf <= 0:
        raise MeshParseError("empty mesh", lineno, path)
    if len(lines) < 1 + nv + nf:
        last = lines[-1][0]
        raise MeshParseError(f"expected {nv} vertex and {nf} face lines, file ends early", last, path)

    vertices = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        lineno, tokens = lines[1 + i]
        try:
            xyz = [float(tok) for tok in tokens[:3]]
        except ValueError:
            raise MeshParseError(f"bad vertex {' '.join(tokens)!r}", lineno, path)
        if len(tokens) < 3 or not np.all(np.isfinite(xyz)):
            raise MeshParseError(f"bad vertex {' '.join(tokens)!r}", lineno, path)
        vertices[i] = xyz

    faces = []
    for i in range(nf):
        lineno, tokens = lines[1 + nv + i]
        try:
            idx = [int(tok) for tok in tokens]
        except ValueError:
            raise MeshParseError(f"bad face {' '.join(tokens)!r}", lineno, path)
        if len(idx) == 3:
            poly = idx
        elif len(idx) >= 4 and idx[0] == len(idx) - 1:
            poly = idx[1:]
        else:
            raise MeshParseError(f"bad face {' '.join(tokens)!r}", lineno, path)
        if any(j < 0 or j >= nv for j in poly):
            raise MeshParseError(f"face index out of range in {' '.join(tokens)!r}", lineno, path)
        for k in range(1, len(poly) - 1):
            faces.append((poly[0], poly[k], poly[k + 1]))

    return TriangleMesh(vertices, np.asarray(faces, dtype=np.int64))


def read_mesh(path: str | Path) -> TriangleMesh:
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as e:
        raise MeshParseError(f"unreadable: {e}", path=str(path))
    return parse_mesh(text, str(path))


def _fit_to_grid(vertices: np.ndarray, resolution: int) -> np.ndarray:
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0:
        raise ContractError("voxelize_mesh", "mesh bounding box is degenerate")
    scale = (resolution - 2) / extent * (1 - _INSET)
    return (vertices - (lo + hi) / 2) * scale + resolution / 2


def _axis_separates(axis: np.ndarray, v0, v1, v2, half: float) -> np.ndarray:
    p0 = v0 @ axis
    p1 = v1 @ axis
    p2 = v2 @ axis
    r = half * np.abs(axis).sum()
    return (np.minimum(np.minimum(p0, p1), p2) > r) | (np.maximum(np.maximum(p0, p1), p2) < -r)


def triangle_box_overlap(tri: np.ndarray, centers: np.ndarray, half: float = 0.5) -> np.ndarray:
    """Separating-axis test of one triangle against many axis-aligned cubes.

    Args:
        tri: Triangle vertices, shape [3, 3].
        centers: Cube centers, shape [M, 3].
        half: Cube half-size.

    Returns:
        Boolean mask of shape [M], True where the cube touches the triangle.
    """
    v0 = tri[0] - centers
    v1 = tri[1] - centers
    v2 = tri[2] - centers
    separated = np.zeros(len(centers), dtype=bool)

    for ax in range(3):
        lo = np.minimum(np.minimum(v0[:, ax], v1[:, ax]), v2[:, ax])
        hi = np.maximum(np.maximum(v0[:, ax], v1[:, ax]), v2[:, ax])
        separated |= (lo > half) | (hi < -half)

    edges = (tri[1] - tri[0], tri[2] - tri[1], tri[0] - tri[2])
    normal = np.cross(edges[0], edges[1])
    separated |= np.abs(v0 @ normal) > half * np.abs(normal).sum()

    for unit in np.eye(3):
        for edge in edges:
            axis = np.cross(unit, edge)
            if np.any(axis):
                separated |= _axis_separates(axis, v0, v1, v2, half)
    return ~separated


def voxelize_mesh(mesh: TriangleMesh, resolution: int, fill: FillMode = FillMode.SOLID) -> VoxelGrid:
    """Rasterizes a mesh scaled uniformly into [0, d] with a one-voxel margin.

    Surface mode marks every voxel cube touched by a triangle; solid mode
    also fills whatever the exterior flood fill cannot reach.

    Raises:
        MeshParseError: If the mesh has no faces.
        ContractError: If its bounding box is degenerate.
    """
    if len(mesh) == 0:
        raise MeshParseError("empty mesh")
    verts = _fit_to_grid(mesh.vertices, resolution)
    occ = np.zeros((resolution,) * 3, dtype=bool)
    for face in mesh.faces:
        tri = verts[face]
        lo = np.clip(np.floor(tri.min(axis=0)).astype(int), 0, resolution - 1)
        hi = np.clip(np.floor(tri.max(axis=0)).astype(int), 0, resolution - 1)
        axes = [np.arange(lo[i], hi[i] + 1) for i in range(3)]
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        hit = triangle_box_overlap(tri, idx + 0.5)
        occ[idx[hit, 0], idx[hit, 1], idx[hit, 2]] = True

    if FillMode(fill) == FillMode.SOLID:
        occ = fill_interior(occ)
    logging.debug(f"vinp: voxelized {len(mesh)} triangles at {resolution}^3 ({fill}), {int(occ.sum())} voxels")
    return VoxelGrid(resolution, occ, f"mesh:{FillMode(fill).value}")


def fill_interior(surface: np.ndarray) -> np.ndarray:
    """Complement of the empty region connected (6-neighbourhood) to the grid boundary."""
    labels, _ = ndimage.label(~surface)
    border = np.concatenate([
        labels[0].ravel(), labels[-1].ravel(),
        labels[:, 0].ravel(), labels[:, -1].ravel(),
        labels[:, :, 0].ravel(), labels[:, :, -1].ravel(),
    ])
    exterior = np.setdiff1d(np.unique(border), [0])
    return ~np.isin(labels, exterior)
