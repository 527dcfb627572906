"""Procedural dataset builds and their manifests.

A manifest is tab-separated text next to the voxel files it references:

    # vinp-manifest 1
    # settings n=10 d_l=16 d_h=64 data_seed=0 split_seed=0 corruption=...
    # range box sx=9..13 sy=4..8 sz=4..8
    <id> <category> <split> <clean_low> <clean_high> <corrupted> <corruption>

Paths are relative to the manifest's directory. No timestamps are written, so
equal settings produce byte-identical manifests.
"""
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from vinp.data.corrupt import CorruptionSpec, apply_corruption
from vinp.data.shapes import CATEGORY_RANGES, generate_shape, sample_recipe
from vinp.enums import SHAPE_CATEGORIES, ShapeCategory, Split
from vinp.errors import AlignmentError, ContractError, DatasetError, FormatError
from vinp.vox.align import canonical_pose, follow_pose
from vinp.vox.grid import VoxelGrid, read_grid, write_grid

MANIFEST_NAME = "manifest.tsv"
MANIFEST_VERSION = 1
TRAIN_FRACTION = 0.8
MAX_POSE_ATTEMPTS = 20


@dataclass(frozen=True)
class Sample:
    id: str
    category: ShapeCategory
    split: Split
    clean_low: Path
    clean_high: Path
    corrupted: Path
    corruption: str

    def load_clean_low(self) -> VoxelGrid:
        return read_grid(self.clean_low)

    def load_clean_high(self) -> VoxelGrid:
        return read_grid(self.clean_high)

    def load_corrupted(self) -> VoxelGrid:
        return read_grid(self.corrupted)


@dataclass
class Manifest:
    path: Path
    samples: list[Sample] = field(default_factory=list)
    settings: dict[str, str] = field(default_factory=dict)

    def split(self, split: Split) -> list[Sample]:
        return [s for s in self.samples if s.split == Split(split)]

    @property
    def train(self) -> list[Sample]:
        return self.split(Split.TRAIN)

    @property
    def test(self) -> list[Sample]:
        return self.split(Split.TEST)

    def __len__(self) -> int:
        return len(self.samples)


def recipe_seed(data_seed: int, index: int, attempt: int = 0) -> int:
    entropy = [data_seed, index] if attempt == 0 else [data_seed, index, attempt]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)[0])


def split_order(seeds: Sequence[int], split_seed: int) -> list[int]:
    """Indices sorted by a hash of (split_seed, recipe seed)."""
    def key(i):
        return hashlib.sha256(f"{split_seed}:{seeds[i]}".encode()).hexdigest()
    return sorted(range(len(seeds)), key=key)


def _write(path: Path, grid: VoxelGrid):
    try:
        write_grid(path, grid)
    except OSError as e:
        logging.error(f"vinp: cannot write {path}: {e}")
        raise DatasetError("write failed", str(path), e)


def _aligned_sample(category: ShapeCategory, index: int, d_l: int, d_h: int,
                    corruption: CorruptionSpec, data_seed: int):
    # the corrupted input is brought to a pca_align fixed point; both truths follow its rotations
    for attempt in range(MAX_POSE_ATTEMPTS):
        seed = recipe_seed(data_seed, index, attempt)
        recipe = sample_recipe(category, seed)
        low = generate_shape(recipe, d_l)
        spec = corruption.with_seed(corruption.seed ^ seed)
        try:
            bad, steps = canonical_pose(apply_corruption(low, spec))
        except AlignmentError as e:
            logging.warning(f"vinp: sample {index} attempt {attempt}: {e}, drawing another shape")
            continue
        low = follow_pose(low, steps)
        high = follow_pose(generate_shape(recipe, d_h), steps, d_h / d_l)
        return seed, spec, low, high, bad
    raise DatasetError(f"sample {index} has no stable pose after {MAX_POSE_ATTEMPTS} shapes")


def build_dataset(out_dir: str | Path,
                  n: int,
                  categories: Sequence[ShapeCategory] = SHAPE_CATEGORIES,
                  d_l: int = 16,
                  d_h: int = 64,
                  corruption: CorruptionSpec = None,
                  data_seed: int = 0,
                  split_seed: int = 0) -> Manifest:
    """Generates n procedural samples and writes their files plus a manifest.

    Categories are cycled in the given order. Each sample gets a clean
    low-resolution grid, its clean high-resolution reference and a corrupted
    low-resolution input; random deletion reseeds per sample from the corruption's
    seed and the recipe seed. Corrupted inputs are stored PCA-aligned, as a
    fixed point of pca_align, with both clean grids rotated alongside; a shape
    whose input has no stable pose is redrawn from the next seed. The first
    floor(0.8 n) samples in hash order form the training split.

    Args:
        out_dir: Directory receiving `manifest.tsv` and the voxel files.
        n: Sample count, at least 5.
        corruption: Corruption applied to inputs; random deletion at 0.5 if omitted.

    Returns:
        The manifest that was written.

    Raises:
        ContractError: For n < 5, no categories, or d_h not a multiple of d_l.
        DatasetError: If a file cannot be written or a sample never reaches a stable pose.
    """
    if n < 5:
        raise ContractError("build_dataset", f"n must be >= 5, got {n}")
    categories = [ShapeCategory(c) for c in categories]
    if not categories:
        raise ContractError("build_dataset", "no categories")
    if d_h % d_l != 0:
        raise ContractError("build_dataset", f"d_h={d_h} is not divisible by d_l={d_l}")
    corruption = corruption or CorruptionSpec("random_deletion", noise_fraction=0.5)

    out = Path(out_dir)
    try:
        (out / "voxels").mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise DatasetError("cannot create directory", str(out), e)

    built = [_aligned_sample(categories[i % len(categories)], i, d_l, d_h, corruption, data_seed)
             for i in range(n)]
    order = split_order([b[0] for b in built], split_seed)
    n_train = int(n * TRAIN_FRACTION)
    splits = {}
    for rank, i in enumerate(order):
        splits[i] = Split.TRAIN if rank < n_train else Split.TEST

    manifest = Manifest(out / MANIFEST_NAME)
    manifest.settings = {
        "n": str(n), "d_l": str(d_l), "d_h": str(d_h),
        "data_seed": str(data_seed), "split_seed": str(split_seed),
        "corruption": corruption.descriptor(),
    }
    for i, (_, spec, low, high, bad) in enumerate(built):
        category = categories[i % len(categories)]
        sid = f"{category.value}-{i:04d}"
        rel = {kind: Path("voxels") / f"{sid}_{kind}.vox" for kind in ("low", "high", "corrupt")}
        _write(out / rel["low"], low)
        _write(out / rel["high"], high)
        _write(out / rel["corrupt"], bad)
        manifest.samples.append(Sample(sid, category, splits[i], out / rel["low"], out / rel["high"],
                                       out / rel["corrupt"], spec.descriptor()))

    write_manifest(manifest)
    logging.info(f"vinp: built {n} samples ({n_train} train, {n - n_train} test) in {out}")
    return manifest


def _relative(path: Path, root: Path) -> str:
    return Path(path).relative_to(root).as_posix()


def write_manifest(manifest: Manifest):
    root = manifest.path.parent
    lines = [f"# vinp-manifest {MANIFEST_VERSION}",
             "# settings " + " ".join(f"{k}={v}" for k, v in manifest.settings.items())]
    cats = sorted({s.category for s in manifest.samples}, key=SHAPE_CATEGORIES.index)
    for cat in cats:
        ranges = " ".join(f"{k}={lo}..{hi}" for k, (lo, hi) in CATEGORY_RANGES[cat].items())
        lines.append(f"# range {cat.value} {ranges}")
    for s in manifest.samples:
        lines.append("\t".join([s.id, s.category.value, s.split.value,
                                _relative(s.clean_low, root), _relative(s.clean_high, root),
                                _relative(s.corrupted, root), s.corruption]))
    try:
        manifest.path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise DatasetError("write failed", str(manifest.path), e)


def load_manifest(path: str | Path) -> Manifest:
    """Reads a manifest, accepting either its path or its directory.

    Raises:
        DatasetError: If it is unreadable, malformed, empty, or references a missing file.
    """
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    try:
        text = path.read_text()
    except OSError as e:
        raise DatasetError("manifest unreadable", str(path), e)

    root = path.parent
    manifest = Manifest(path)
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("# settings "):
            manifest.settings = dict(kv.split("=", 1) for kv in line[len("# settings "):].split())
            continue
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 7:
            raise DatasetError(f"line {lineno}: expected 7 fields, got {len(cols)}", str(path))
        sid, cat, split, low, high, bad, corruption = cols
        try:
            sample = Sample(sid, ShapeCategory(cat), Split(split), root / low, root / high, root / bad, corruption)
        except ValueError as e:
            raise DatasetError(f"line {lineno}: {e}", str(path))
        for p in (sample.clean_low, sample.clean_high, sample.corrupted):
            if not p.is_file():
                raise DatasetError(f"line {lineno}: missing file {p.name}", str(path))
        manifest.samples.append(sample)
    if not manifest.samples:
        raise DatasetError("manifest lists no samples", str(path))
    return manifest


def load_arrays(samples: Sequence[Sample], corrupted: bool = True) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stacks (input low, clean low, clean high) float32 volumes of shape [N, d, d, d].

    Raises:
        DatasetError: For an empty sample list or an unreadable voxel file.
    """
    if not samples:
        raise DatasetError("empty dataset")
    xs, lows, highs = [], [], []
    for s in samples:
        try:
            low = s.load_clean_low()
            xs.append((s.load_corrupted() if corrupted else low).occupancy)
            lows.append(low.occupancy)
            highs.append(s.load_clean_high().occupancy)
        except (OSError, FormatError) as e:
            raise DatasetError(f"sample {s.id}: {e}", getattr(e, "path", None), e)
    return (np.stack(xs).astype(np.float32), np.stack(lows).astype(np.float32),
            np.stack(highs).astype(np.float32))
