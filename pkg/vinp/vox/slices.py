"""Slice sequences feeding the recurrent upsampler.

Step t of a d_h-step sequence looks at the c low-resolution slices centred on
floor(t / (d_h / d_l)) along +x; slices outside [0, d_l) are zero.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from vinp.errors import ContractError
from vinp.vox.grid import VoxelGrid


@dataclass(frozen=True)
class SliceStep:
    center: int
    indices: tuple[int, ...]
    # [d_l, d_l, c], thickness last
    slices: np.ndarray


@dataclass(frozen=True)
class SliceSequence:
    steps: tuple[SliceStep, ...]
    axis: str = "+x"

    def __len__(self) -> int:
        return len(self.steps)

    def __getitem__(self, t: int) -> SliceStep:
        return self.steps[t]


def _check(d_l: int, d_h: int, c: int) -> int:
    if d_h % d_l != 0:
        raise ContractError("slice_volume", f"d_h={d_h} is not divisible by d_l={d_l}")
    if c < 1 or c % 2 == 0:
        raise ContractError("slice_volume", f"c must be odd and positive, got {c}")
    return d_h // d_l


def slice_indices(t: int, d_l: int, d_h: int, c: int = 5) -> tuple[int, ...]:
    factor = _check(d_l, d_h, c)
    center = t // factor
    half = c // 2
    return tuple(range(center - half, center + half + 1))


def thin_volumes(volumes: np.ndarray, t: int, d_h: int, c: int = 5) -> np.ndarray:
    """Step-t inputs for a batch of aligned volumes.

    Args:
        volumes: Array [N, d_l, d_l, d_l] indexed [n, x, y, z].
        t: Step index in [0, d_h).

    Returns:
        Float32 array [N, 1, d_l, d_l, c]: the (y, z) slices at the step's x
        indices, zero where an index falls outside the volume.
    """
    n, d_l = volumes.shape[:2]
    out = np.zeros((n, 1, d_l, d_l, c), dtype=np.float32)
    for j, i in enumerate(slice_indices(t, d_l, d_h, c)):
        if 0 <= i < d_l:
            out[:, 0, :, :, j] = volumes[:, i]
    return out


def slice_volume(grid: VoxelGrid, d_h: int, c: int = 5) -> SliceSequence:
    """Builds the d_h-step slice sequence of a PCA-aligned grid.

    Raises:
        ContractError: If d_h is not a multiple of the grid resolution or c is even.
    """
    d_l = grid.resolution
    _check(d_l, d_h, c)
    vol = grid.occupancy[np.newaxis]
    steps = []
    for t in range(d_h):
        idx = slice_indices(t, d_l, d_h, c)
        slices = thin_volumes(vol, t, d_h, c)[0, 0].astype(bool)
        slices.flags.writeable = False
        steps.append(SliceStep(center=idx[c // 2], indices=idx, slices=slices))
    return SliceSequence(tuple(steps))


def assemble_slices(images: Sequence[np.ndarray]) -> np.ndarray:
    """Stacks d_h images of d_h x d_h along +x: volume[t, i, j] = images[t][i, j].

    Raises:
        ContractError: On count or extent mismatch.
    """
    d_h = len(images)
    if d_h == 0:
        raise ContractError("assemble_slices", "no images")
    for t, img in enumerate(images):
        if np.shape(img) != (d_h, d_h):
            raise ContractError("assemble_slices", f"image {t} has shape {np.shape(img)}, expected ({d_h}, {d_h})")
    return np.stack([np.asarray(img, dtype=np.float32) for img in images], axis=0)


def format_pgm(image: np.ndarray, maxval: int = 255) -> str:
    """Plain (P2) graymap text of a 2-D image with values in [0, 1]; row i is image[i, :]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ContractError("format_pgm", f"expected a 2-D image, got shape {img.shape}")
    levels = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(int)
    rows = [" ".join(map(str, row)) for row in levels]
    return f"P2\n{img.shape[1]} {img.shape[0]}\n{maxval}\n" + "\n".join(rows) + "\n"


def write_slices(out_dir: str | Path, volume: np.ndarray, prefix: str = "slice") -> list[Path]:
    """Writes volume[t] for every t as `<prefix>_<t>.pgm`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, image in enumerate(np.asarray(volume)):
        path = out / f"{prefix}_{t:04d}.pgm"
        path.write_text(format_pgm(image))
        paths.append(path)
    return paths
