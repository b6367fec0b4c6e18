import numpy as np
import pytest

from dmpfem.mesh import (
    Mesh,
    MeshError,
    build_interval_mesh,
    build_square_with_hole_mesh,
    build_unit_square_quad_mesh,
    build_unit_square_tri_mesh,
    format_mesh,
    load_mesh,
    perturb_interior_nodes,
    save_mesh,
)


def test_interval_mesh_four_elements():
    m = build_interval_mesh(4, 0.0, 1.0)
    assert m.n_nodes == 5 and m.n_elements == 4
    np.testing.assert_allclose(m.nodes[:, 0], [0, 0.25, 0.5, 0.75, 1.0])
    assert m.kind == "Line2"
    assert m.boundary_nodes["left"].tolist() == [0]
    assert m.boundary_nodes["right"].tolist() == [4]


def test_interval_mesh_minimal_and_scaled():
    m = build_interval_mesh(1, 0.0, 1.0)
    assert (m.n_nodes, m.n_elements) == (2, 1)
    assert m.measures()[0] == pytest.approx(1.0)
    m = build_interval_mesh(8, 0.0, 2.0)
    assert m.n_nodes == 9
    np.testing.assert_allclose(m.measures(), 0.25)


@pytest.mark.parametrize("bad", [0, -3])
def test_interval_rejects_nonpositive(bad):
    with pytest.raises(MeshError):
        build_interval_mesh(bad)


def test_quad_mesh_counts():
    m = build_unit_square_quad_mesh(12, 12)
    assert (m.n_nodes, m.n_elements) == (169, 144)
    m = build_unit_square_quad_mesh(1, 1)
    assert (m.n_nodes, m.n_elements) == (4, 1)
    m = build_unit_square_quad_mesh(6, 6)
    assert m.n_nodes == 49
    assert m.all_boundary_nodes().size == 24


@pytest.mark.parametrize("diagonal", ["NE", "NW"])
def test_tri_mesh_counts(diagonal):
    m = build_unit_square_tri_mesh(4, 4, diagonal)
    assert (m.n_nodes, m.n_elements) == (25, 32)
    m = build_unit_square_tri_mesh(16, 16, diagonal)
    assert (m.n_nodes, m.n_elements) == (289, 512)
    m = build_unit_square_tri_mesh(1, 1, diagonal)
    assert (m.n_nodes, m.n_elements) == (4, 2)
    np.testing.assert_allclose(m.measures(), 0.5)


def test_tri_mesh_rejects_unknown_diagonal():
    with pytest.raises(MeshError):
        build_unit_square_tri_mesh(2, 2, "SW")


@pytest.mark.parametrize("builder", [
    lambda: build_unit_square_tri_mesh(7, 5, "NE"),
    lambda: build_unit_square_tri_mesh(7, 5, "NW"),
    lambda: build_unit_square_quad_mesh(3, 8),
])
def test_square_measure_and_orientation(builder):
    m = builder()
    assert m.measures().sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(m.corner_jacobians() > 0)


def test_square_segments_cover_boundary_with_shared_corners():
    nx, ny = 5, 3
    m = build_unit_square_quad_mesh(nx, ny)
    seg = m.boundary_nodes
    assert set(seg) == {"bottom", "right", "top", "left"}
    assert len(seg["bottom"]) == nx + 1 and len(seg["left"]) == ny + 1
    all_ids = np.concatenate(list(seg.values()))
    # each corner appears in the two segments that meet there
    corners = [0, nx, (nx + 1) * (ny + 1) - 1, (nx + 1) * ny]
    for c in corners:
        assert np.count_nonzero(all_ids == c) == 2
    assert np.unique(all_ids).size == 2 * (nx + ny)
    y = m.nodes[:, 1]
    assert np.all(y[seg["bottom"]] == 0.0) and np.all(y[seg["top"]] == 1.0)


def test_hole_mesh_single_band():
    m = build_square_with_hole_mesh(1)
    assert m.n_elements == 160
    # 9x9 cells minus the hole; nodes: 100 grid nodes, none removed
    assert m.n_nodes == 100
    assert m.measures().sum() == pytest.approx(1 - 1 / 81, abs=1e-12)
    assert len(m.boundary_nodes["inner"]) == 4
    assert len(m.boundary_nodes["outer"]) == 36


def test_hole_mesh_inner_segment_two_bands():
    m = build_square_with_hole_mesh(2)
    assert len(m.boundary_nodes["inner"]) == 8
    assert m.measures().sum() == pytest.approx(1 - 1 / 81, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hole_mesh_has_no_node_in_open_hole(n):
    m = build_square_with_hole_mesh(n)
    x, y = m.nodes.T
    inside = (x > 4 / 9 + 1e-14) & (x < 5 / 9 - 1e-14) & (y > 4 / 9 + 1e-14) & (y < 5 / 9 - 1e-14)
    assert not inside.any()
    assert np.all(m.corner_jacobians() > 0)
    inner = m.nodes[m.boundary_nodes["inner"]]
    on_square = np.isclose(inner, 4 / 9) | np.isclose(inner, 5 / 9)
    assert np.all(on_square.any(axis=1))


def test_perturbation_zero_is_identity():
    m = build_unit_square_tri_mesh(6, 6)
    assert perturb_interior_nodes(m, 0.0, seed=5) is m


def test_perturbation_is_deterministic_and_pins_boundary():
    m = build_unit_square_tri_mesh(10, 10)
    a = perturb_interior_nodes(m, 0.2, seed=42)
    b = perturb_interior_nodes(m, 0.2, seed=42)
    assert a.nodes.tobytes() == b.nodes.tobytes()
    c = perturb_interior_nodes(m, 0.3, seed=1)
    bnd = m.all_boundary_nodes()
    np.testing.assert_array_equal(c.nodes[bnd], m.nodes[bnd])
    interior = np.setdiff1d(np.arange(m.n_nodes), bnd)
    assert np.any(c.nodes[interior] != m.nodes[interior])
    assert np.all(c.corner_jacobians() > 0)
    assert c.measures().sum() == pytest.approx(1.0, abs=1e-12)


def test_perturbation_offsets_depend_only_on_node_id():
    # the same node gets the same offset on a windowed and an unwindowed run
    m = build_unit_square_quad_mesh(8, 8)
    full = perturb_interior_nodes(m, 0.1, seed=3)
    part = perturb_interior_nodes(m, 0.1, seed=3, window=(0.0, 0.5, 0.0, 1.0))
    moved = np.flatnonzero(np.any(part.nodes != m.nodes, axis=1))
    assert moved.size > 0
    assert np.all(m.nodes[moved, 0] <= 0.5)
    np.testing.assert_array_equal(part.nodes[moved], full.nodes[moved])


def test_perturbation_magnitude_range():
    m = build_unit_square_tri_mesh(4, 4)
    with pytest.raises(MeshError):
        perturb_interior_nodes(m, 0.5)
    with pytest.raises(MeshError):
        perturb_interior_nodes(m, -0.1)


def test_validate_rejects_inverted_element():
    nodes = [[0, 0], [1, 0], [0, 1]]
    with pytest.raises(MeshError):
        Mesh(nodes, [[0, 2, 1]], "Tri3").validate()


def test_validate_rejects_duplicate_nodes():
    nodes = [[0, 0], [1, 0], [0, 1], [1, 0]]
    with pytest.raises(MeshError):
        Mesh(nodes, [[0, 1, 2]], "Tri3").validate()


def test_validate_rejects_interior_boundary_node():
    m = build_unit_square_tri_mesh(2, 2)
    with pytest.raises(MeshError):
        Mesh(m.nodes, m.elements, m.kind, {"bad": np.array([4])}).validate()


@pytest.mark.parametrize("mesh", [
    build_interval_mesh(5, -1.0, 2.0),
    build_unit_square_tri_mesh(3, 4),
    build_unit_square_quad_mesh(2, 3),
    build_square_with_hole_mesh(1),
])
def test_mesh_file_round_trip(tmp_path, mesh):
    path = tmp_path / "m.txt"
    save_mesh(mesh, path)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.nodes, mesh.nodes)
    np.testing.assert_array_equal(back.elements, mesh.elements)
    assert back.kind == mesh.kind
    assert set(back.boundary_nodes) == set(mesh.boundary_nodes)
    for k in mesh.boundary_nodes:
        np.testing.assert_array_equal(back.boundary_nodes[k], mesh.boundary_nodes[k])
    assert sorted(back.boundary_edges) == sorted(mesh.boundary_edges)
    assert format_mesh(back) == format_mesh(mesh)


def test_mesh_file_comments_and_errors(tmp_path):
    text = """# two triangles
2 4 2 1
0 0 0
1 1 0   # trailing comment
2 1 1
3 0 1
0 Tri3 0 1 2
1 Tri3 0 2 3
wall 0 1 2 3
"""
    p = tmp_path / "a.txt"
    p.write_text(text)
    m = load_mesh(p)
    assert m.n_elements == 2 and m.measures().sum() == pytest.approx(1.0)
    p.write_text(text.replace("1 Tri3 0 2 3", "1 Quad4 0 2 3 1"))
    with pytest.raises(MeshError):
        load_mesh(p)
    p.write_text("2 4 2 1\n0 0 0\n")
    with pytest.raises(MeshError):
        load_mesh(p)
