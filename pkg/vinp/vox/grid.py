"""Binary occupancy grids and their on-disk format.

File layout (little-endian):

    0..3    magic b"VOXG"
    4..7    version, uint32 (= 1)
    8..11   resolution d, uint32
    12..15  reserved, zero
    16..    ceil(d^3 / 8) bytes of occupancy bits

Voxel (x, y, z) has index v = x + d * (y + d * z) and lives at byte v // 8,
bit v % 8 (LSB first).
"""
import logging
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from vinp.errors import (
    BadMagicError,
    ContractError,
    FormatError,
    ResolutionOverflowError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)

MAGIC = b"VOXG"
VERSION = 1
HEADER = struct.Struct("<4sIII")
MAX_RESOLUTION = 1024


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    resolution: int
    occupancy: np.ndarray
    meta: str = ""

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        d = self.resolution
        if d < 1 or occ.shape != (d, d, d):
            raise ContractError("VoxelGrid", f"occupancy shape {occ.shape} does not match resolution {d}")
        occ = occ.copy()
        occ.flags.writeable = False
        object.__setattr__(self, "occupancy", occ)

    @classmethod
    def empty(cls, resolution: int, meta: str = "") -> "VoxelGrid":
        return cls(resolution, np.zeros((resolution,) * 3, dtype=bool), meta)

    def count(self) -> int:
        return int(self.occupancy.sum())

    def with_meta(self, meta: str) -> "VoxelGrid":
        return VoxelGrid(self.resolution, self.occupancy, meta)

    def append_meta(self, note: str) -> "VoxelGrid":
        return self.with_meta(f"{self.meta};{note}" if self.meta else note)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.occupancy, other.occupancy)

    def __hash__(self) -> int:
        return hash((self.resolution, self.occupancy.tobytes()))

    def __str__(self) -> str:
        return f"grid-{self.resolution}-{self.count()}"


def payload_size(resolution: int) -> int:
    return (resolution ** 3 + 7) // 8


def encode_grid(grid: VoxelGrid) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, grid.resolution, 0)
    # Fortran order walks x fastest, matching v = x + d * (y + d * z)
    bits = np.packbits(grid.occupancy.ravel(order="F"), bitorder="little")
    return header + bits.tobytes()


def decode_grid(blob: bytes, path: str = None) -> VoxelGrid:
    """Parses a voxel file image.

    Raises:
        TruncatedPayloadError: Header or payload shorter than declared.
        BadMagicError: First four bytes are not b"VOXG".
        UnsupportedVersionError: Version other than 1.
        ResolutionOverflowError: Resolution 0 or above MAX_RESOLUTION.
        FormatError: Reserved field set or trailing bytes.
    """
    if len(blob) < HEADER.size:
        raise TruncatedPayloadError(f"header needs {HEADER.size} bytes, got {len(blob)}", path)
    magic, version, d, reserved = HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}", path)
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}", path)
    if d == 0 or d > MAX_RESOLUTION:
        raise ResolutionOverflowError(f"resolution {d} outside [1, {MAX_RESOLUTION}]", path)
    if reserved != 0:
        raise FormatError(f"reserved header field is {reserved}, expected 0", path)
    need = payload_size(d)
    have = len(blob) - HEADER.size
    if have < need:
        raise TruncatedPayloadError(f"payload has {have} bytes, resolution {d} needs {need}", path)
    if have > need:
        raise FormatError(f"{have - need} trailing bytes after payload", path)
    bits = np.unpackbits(np.frombuffer(blob, dtype=np.uint8, offset=HEADER.size), bitorder="little")
    occ = bits[:d ** 3].astype(bool).reshape((d, d, d), order="F")
    return VoxelGrid(d, occ)


def write_grid(path: str | Path, grid: VoxelGrid) -> None:
    Path(path).write_bytes(encode_grid(grid))


def read_grid(path: str | Path) -> VoxelGrid:
    blob = Path(path).read_bytes()
    grid = decode_grid(blob, str(path))
    logging.debug(f"vinp: read {grid} from {path}")
    return grid


def upsample_nearest(grid: VoxelGrid, factor: int) -> VoxelGrid:
    """Replicates every voxel factor^3 times."""
    if factor < 1:
        raise ContractError("upsample_nearest", f"factor must be >= 1, got {factor}")
    occ = grid.occupancy
    for axis in range(3):
        occ = np.repeat(occ, factor, axis=axis)
    return VoxelGrid(grid.resolution * factor, occ, grid.meta)


def binarize(volume: np.ndarray, threshold: float = 0.5, meta: str = "") -> VoxelGrid:
    """Thresholds a cubic probability volume; values above `threshold` are occupied."""
    volume = np.asarray(volume)
    return VoxelGrid(volume.shape[0], volume > threshold, meta)
