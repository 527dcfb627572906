"""Procedural solids standing in for shape-collection categories.

Every size is an integer on a 16-voxel reference lattice with one voxel of
margin on each side; a resolution-d rendering scales coordinates by d / 16,
so renderings at d and 4d agree exactly.
"""
from dataclasses import dataclass, field

import numpy as np

from vinp.enums import ShapeCategory
from vinp.errors import ContractError
from vinp.vox.grid import VoxelGrid

LATTICE = 16
MARGIN = 1

# inclusive integer ranges per category, in lattice units
CATEGORY_RANGES: dict[ShapeCategory, dict[str, tuple[int, int]]] = {
    ShapeCategory.BOX: {"sx": (9, 13), "sy": (4, 8), "sz": (4, 8)},
    ShapeCategory.TABLE: {"width": (10, 14), "depth": (6, 10), "height": (6, 10), "top": (1, 2), "leg": (1, 2)},
    ShapeCategory.CHAIR: {"width": (6, 8), "depth": (6, 8), "seat": (4, 6), "back": (4, 7), "leg": (1, 2)},
    ShapeCategory.LSHAPE: {"arm_x": (8, 13), "arm_z": (6, 10), "thick": (3, 5)},
    ShapeCategory.LAMP: {"base": (6, 9), "pole": (6, 9), "shade": (4, 7), "shade_h": (2, 4)},
}

Box = tuple[tuple[int, int, int], tuple[int, int, int]]


@dataclass(frozen=True)
class ShapeRecipe:
    category: ShapeCategory
    params: dict[str, int] = field(default_factory=dict)
    seed: int = 0

    def describe(self) -> str:
        sizes = " ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{ShapeCategory(self.category).value} {sizes}"


def sample_recipe(category: ShapeCategory, seed: int) -> ShapeRecipe:
    """Draws every size of a category uniformly from its range."""
    category = ShapeCategory(category)
    rng = np.random.default_rng(seed)
    params = {name: int(rng.integers(lo, hi + 1)) for name, (lo, hi) in CATEGORY_RANGES[category].items()}
    return ShapeRecipe(category, params, seed)


def _centered(extent: tuple[int, int, int]) -> tuple[int, int, int]:
    return tuple((LATTICE - e) // 2 for e in extent)


def _boxes_box(p: dict[str, int]) -> list[Box]:
    ext = (p["sx"], p["sy"], p["sz"])
    o = _centered(ext)
    return [(o, tuple(a + b for a, b in zip(o, ext)))]


def _boxes_table(p: dict[str, int]) -> list[Box]:
    w, dp, h, top, leg = p["width"], p["depth"], p["height"], p["top"], p["leg"]
    x0, y0, z0 = _centered((w, dp, h))
    boxes = [((x0, y0, z0 + h - top), (x0 + w, y0 + dp, z0 + h))]
    for lx in (x0, x0 + w - leg):
        for ly in (y0, y0 + dp - leg):
            boxes.append(((lx, ly, z0), (lx + leg, ly + leg, z0 + h - top)))
    return boxes


def _boxes_chair(p: dict[str, int]) -> list[Box]:
    w, dp, seat, back, leg = p["width"], p["depth"], p["seat"], p["back"], p["leg"]
    h = seat + back
    x0, y0, z0 = _centered((w, dp, h))
    boxes = [
        ((x0, y0, z0 + seat - 1), (x0 + w, y0 + dp, z0 + seat)),
        ((x0, y0 + dp - 1, z0 + seat), (x0 + w, y0 + dp, z0 + h)),
    ]
    for lx in (x0, x0 + w - leg):
        for ly in (y0, y0 + dp - leg):
            boxes.append(((lx, ly, z0), (lx + leg, ly + leg, z0 + seat - 1)))
    return boxes


def _boxes_lshape(p: dict[str, int]) -> list[Box]:
    ax, az, t = p["arm_x"], p["arm_z"], p["thick"]
    x0, y0, z0 = _centered((ax, t, az))
    return [
        ((x0, y0, z0), (x0 + ax, y0 + t, z0 + t)),
        ((x0, y0, z0 + t), (x0 + t, y0 + t, z0 + az)),
    ]


def _boxes_lamp(p: dict[str, int]) -> list[Box]:
    base, pole, shade, shade_h = p["base"], p["pole"], p["shade"], p["shade_h"]
    h = 1 + pole + shade_h
    x0, y0, z0 = _centered((base, base, h))
    cx = x0 + base // 2
    cy = y0 + base // 2
    sx = cx - shade // 2
    sy = cy - shade // 2
    return [
        ((x0, y0, z0), (x0 + base, y0 + base, z0 + 1)),
        ((cx - 1, cy - 1, z0 + 1), (cx + 1, cy + 1, z0 + 1 + pole)),
        ((sx, sy, z0 + 1 + pole), (sx + shade, sy + shade, z0 + h)),
    ]


_BUILDERS = {
    ShapeCategory.BOX: _boxes_box,
    ShapeCategory.TABLE: _boxes_table,
    ShapeCategory.CHAIR: _boxes_chair,
    ShapeCategory.LSHAPE: _boxes_lshape,
    ShapeCategory.LAMP: _boxes_lamp,
}


def shape_boxes(recipe: ShapeRecipe) -> list[Box]:
    """Lattice-unit boxes [lo, hi) making up a recipe's solid.

    Raises:
        ContractError: If a size is missing or any box leaves the margin.
    """
    try:
        boxes = _BUILDERS[ShapeCategory(recipe.category)](recipe.params)
    except KeyError as e:
        raise ContractError("generate_shape", f"{recipe.category} recipe missing size {e}")
    for lo, hi in boxes:
        if any(a < MARGIN or b > LATTICE - MARGIN or a >= b for a, b in zip(lo, hi)):
            raise ContractError("generate_shape", f"{recipe.describe()} exceeds the grid with box {lo}..{hi}")
    return boxes


def generate_shape(recipe: ShapeRecipe, resolution: int) -> VoxelGrid:
    """Renders a recipe at resolution d >= 16.

    Raises:
        ContractError: For d < 16 or sizes exceeding the grid.
    """
    if resolution < LATTICE:
        raise ContractError("generate_shape", f"resolution must be >= {LATTICE}, got {resolution}")
    s = resolution / LATTICE
    occ = np.zeros((resolution,) * 3, dtype=bool)
    for lo, hi in shape_boxes(recipe):
        a = [int(round(v * s)) for v in lo]
        b = [int(round(v * s)) for v in hi]
        occ[a[0]:b[0], a[1]:b[1], a[2]:b[2]] = True
    return VoxelGrid(resolution, occ, f"shape:{ShapeCategory(recipe.category).value}:seed={recipe.seed}")
