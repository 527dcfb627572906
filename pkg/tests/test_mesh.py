import numpy as np
import pytest

from vinp.enums import FillMode
from vinp.errors import ContractError, MeshParseError
from vinp.vox.mesh import fill_interior, parse_mesh, read_mesh, triangle_box_overlap, voxelize_mesh

CUBE = """OFF
# unit cube
8 6 12
0 0 0
1 0 0
1 1 0
0 1 0
0 0 1
1 0 1
1 1 1
0 1 1
4 0 3 2 1
4 4 5 6 7
4 0 1 5 4
4 2 3 7 6
4 1 2 6 5
4 0 4 7 3
"""


def test_parse_cube_fan_triangulates_quads():
    mesh = parse_mesh(CUBE)
    assert mesh.vertices.shape == (8, 3)
    assert len(mesh) == 12


def test_bare_triangles_without_header_keyword():
    mesh = parse_mesh("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n")
    assert mesh.faces.tolist() == [[0, 1, 2]]


@pytest.mark.parametrize("text,line", [
    ("OFF\n3 1 0\n0 0 0\n1 x 0\n0 1 0\n3 0 1 2\n", 4),
    ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n", 6),
    ("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n5 0 1 2\n", 6),
    ("OFF\nthree one\n", 2),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(MeshParseError) as e:
        parse_mesh(text)
    assert e.value.line == line


def test_empty_mesh_rejected(tmp_path):
    with pytest.raises(MeshParseError):
        parse_mesh("")
    with pytest.raises(MeshParseError):
        parse_mesh("OFF\n0 0 0\n")
    with pytest.raises(MeshParseError):
        read_mesh(tmp_path / "missing.off")


def test_triangle_box_overlap():
    tri = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    centers = np.array([[0.5, 0.5, 0.0], [0.5, 0.5, 0.6], [3.0, 3.0, 0.0], [1.4, 1.4, 0.0], [1.6, 1.6, 0.0]])
    assert triangle_box_overlap(tri, centers).tolist() == [True, False, False, True, False]


def test_cube_surface_and_solid():
    mesh = parse_mesh(CUBE)
    surface = voxelize_mesh(mesh, 8, FillMode.SURFACE)
    solid = voxelize_mesh(mesh, 8, FillMode.SOLID)
    # the cube spans voxels 1..6 on every axis
    assert surface.count() == 6 ** 3 - 4 ** 3
    assert solid.count() == 6 ** 3
    assert not np.any(surface.occupancy & ~solid.occupancy)
    assert solid.meta == "mesh:solid"


def test_degenerate_mesh():
    flat = parse_mesh("3 1\n1 1 1\n1 1 1\n1 1 1\n0 1 2\n")
    with pytest.raises(ContractError):
        voxelize_mesh(flat, 8)


def test_fill_interior_keeps_open_shells_hollow():
    shell = np.zeros((5, 5, 5), dtype=bool)
    shell[1:4, 1:4, 1:4] = True
    shell[2, 2, 2] = False
    assert fill_interior(shell).sum() == 27
    shell[2, 2, 1] = False
    assert fill_interior(shell).sum() == 25
