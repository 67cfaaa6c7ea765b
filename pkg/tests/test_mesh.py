import math

import numpy as np
import pytest

from isoflow import MeshError, build_torus_mesh, read_mesh, validate_mesh, write_mesh
from isoflow.mesh import TriangulatedSurface, rot90

SQRT3 = math.sqrt(3.0)


@pytest.mark.parametrize("n", list(range(1, 33)))
def test_torus_counts_and_areas(n):
    m = build_torus_mesh(n)
    assert (m.num_vertices, m.num_edges, m.num_facets) == (n * n, 3 * n * n, 2 * n * n)
    assert m.num_vertices - m.num_edges + m.num_facets == 0
    np.testing.assert_allclose(m.facet_area, SQRT3 / (4 * n * n), rtol=1e-13)
    assert abs(m.total_area - SQRT3 / 2) <= 1e-12


def test_torus_examples():
    m1 = build_torus_mesh(1)
    assert (m1.num_vertices, m1.num_edges, m1.num_facets) == (1, 3, 2)
    assert abs(m1.total_area - SQRT3 / 2) <= 1e-15
    m4 = build_torus_mesh(4)
    assert (m4.num_vertices, m4.num_edges, m4.num_facets) == (16, 48, 32)
    np.testing.assert_allclose(m4.facet_area, SQRT3 / 64, rtol=1e-14)


def test_rejects_zero_refinement():
    with pytest.raises(MeshError):
        build_torus_mesh(0)


def test_builder_output_is_valid():
    assert validate_mesh(build_torus_mesh(3)) == []


def test_facet_frame_rotation_convention():
    # J^2 = -id on chart vectors and unit signed area on the oriented frame
    v = np.array([0.3, -1.2])
    np.testing.assert_allclose(rot90(rot90(v)), -v, atol=0)
    e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    np.testing.assert_allclose(rot90(e1), e2, atol=0)
    assert float(np.cross(e1, e2)) == 1.0


def _rebuild(mesh, facets=None, corners=None):
    return TriangulatedSurface(
        mesh.vertices.copy(),
        facets if facets is not None else mesh.facets.copy(),
        corners if corners is not None else mesh.corners.copy(),
        euler_char=mesh.euler_char,
        gluing=[(f1, s1, f2, s2) for (f1, s1), (f2, s2) in mesh.edge_sides],
        lattice=mesh.lattice,
    )


def test_swapped_corner_order_reports_orientation(torus4):
    facets = torus4.facets.copy()
    corners = torus4.corners.copy()
    facets[5] = facets[5][[0, 2, 1]]
    corners[5] = corners[5][[0, 2, 1]]
    bad = _rebuild(torus4, facets=facets, corners=corners)
    violations = validate_mesh(bad)
    assert any("facet 5" in v and "oriented" in v for v in violations)


def test_perturbed_corner_reports_edge_length_mismatch(torus4):
    corners = torus4.corners.copy()
    corners[7, 1, 0] += 1e-3
    bad = _rebuild(torus4, corners=corners)
    violations = validate_mesh(bad)
    assert any("edge length mismatch" in v and "facet 7" in v for v in violations)


def test_euler_mismatch_reported(torus2):
    bad = TriangulatedSurface(
        torus2.vertices.copy(), torus2.facets.copy(), torus2.corners.copy(),
        euler_char=2,
        gluing=[(f1, s1, f2, s2) for (f1, s1), (f2, s2) in torus2.edge_sides],
    )
    assert any("Euler characteristic" in v for v in validate_mesh(bad))


def test_derived_gluing_matches_builder(torus4):
    derived = TriangulatedSurface(
        torus4.vertices.copy(), torus4.facets.copy(), torus4.corners.copy(),
        euler_char=0,
    )
    assert derived.num_edges == torus4.num_edges
    assert validate_mesh(derived) == []


def test_derived_gluing_rejects_quotient_ambiguity(torus1):
    with pytest.raises(MeshError, match="ambiguous|unmatched"):
        TriangulatedSurface(
            torus1.vertices.copy(), torus1.facets.copy(), torus1.corners.copy(),
            euler_char=0,
        )


def test_unclosed_surface_rejected(torus4):
    gluing = [(f1, s1, f2, s2) for (f1, s1), (f2, s2) in torus4.edge_sides]
    with pytest.raises(MeshError, match="not closed"):
        TriangulatedSurface(
            torus4.vertices.copy(), torus4.facets.copy(), torus4.corners.copy(),
            euler_char=0, gluing=gluing[:-1],
        )


def test_spanning_tree_structure(torus4):
    tree = torus4.spanning_tree
    assert tree.root == 0
    assert sorted(tree.order.tolist()) == list(range(torus4.num_vertices))
    assert len(tree.cotree_edges) == torus4.num_edges - (torus4.num_vertices - 1)


def test_mesh_file_round_trip_lattice(tmp_path, torus4):
    path = tmp_path / "t4.mesh.txt"
    write_mesh(torus4, path)
    back = read_mesh(path)
    np.testing.assert_array_equal(back.vertices, torus4.vertices)
    np.testing.assert_array_equal(back.facets, torus4.facets)
    np.testing.assert_allclose(back.corners, torus4.corners, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(back.edge_sides, torus4.edge_sides)
    assert back.euler_char == 0
    assert back.lattice is not None and back.lattice.n == 4
    assert validate_mesh(back) == []


def test_mesh_file_round_trip_float_mode(tmp_path, torus2):
    plain = TriangulatedSurface(
        torus2.vertices.copy(), torus2.facets.copy(), torus2.corners.copy(),
        euler_char=0,
        gluing=[(f1, s1, f2, s2) for (f1, s1), (f2, s2) in torus2.edge_sides],
        lattice=None,
    )
    path = tmp_path / "plain.mesh.txt"
    write_mesh(plain, path)
    back = read_mesh(path)
    assert back.lattice is None
    np.testing.assert_array_equal(back.corners, plain.corners)
    assert validate_mesh(back) == []


def test_read_mesh_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not a mesh\n")
    with pytest.raises(MeshError):
        read_mesh(path)


def test_mesh_arrays_immutable(torus4):
    with pytest.raises(ValueError):
        torus4.facet_area[0] = 1.0
    with pytest.raises(ValueError):
        torus4.corners[0, 0, 0] = 1.0
