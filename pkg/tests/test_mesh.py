import numpy as np
import pytest

from crbc.mesh import (Mesh, MeshError, MeshFormatError, read_mesh,
                       refine_uniform, structured_unit_square, write_mesh)


def test_structured_counts_n1():
    m = structured_unit_square(1)
    assert (m.n_vertices, m.n_triangles, m.n_edges, m.n_boundary_edges) == (4, 2, 5, 4)


def test_structured_counts_n2_hand_enumeration():
    # 2x2 grid: 9 vertices, 2 per cell = 8 triangles, Euler gives 16 edges,
    # 4n = 8 boundary edges
    m = structured_unit_square(2)
    assert m.n_triangles == 8
    assert m.n_edges == 16
    assert m.n_boundary_edges == 8
    assert m.n_vertices - m.n_edges + m.n_triangles == 1


def test_structured_h_max():
    m = structured_unit_square(4)
    assert m.h_max == pytest.approx(np.sqrt(2.0) / 4.0, rel=1e-15)


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_structured_rejects_bad_n(bad):
    with pytest.raises(ValueError):
        structured_unit_square(bad)


def test_euler_relation_various():
    for n in (1, 2, 3, 5):
        m = structured_unit_square(n)
        assert m.n_vertices - m.n_edges + m.n_triangles == 1


def test_area_sum():
    for m in (structured_unit_square(3), refine_uniform(structured_unit_square(3))):
        assert abs(m.areas.sum() - 1.0) <= 1e-12


def test_refine_counts_and_h():
    m = structured_unit_square(2)
    f = refine_uniform(m)
    assert f.n_triangles == 4 * m.n_triangles
    assert f.n_boundary_edges == 2 * m.n_boundary_edges
    assert abs(f.h_max - m.h_max / 2.0) <= 1e-14 * m.h_max
    assert f.n_vertices - f.n_edges + f.n_triangles == 1


def test_refine_two_triangles():
    m = structured_unit_square(1)
    assert refine_uniform(m).n_triangles == 8


def test_refine_min_angle_preserved():
    m = structured_unit_square(3)
    f = refine_uniform(m)
    assert abs(f.min_angle - m.min_angle) <= 1e-12


def test_refined_isomorphic_to_structured():
    # refine(2x2) and 4x4 have identical connectivity up to reindexing:
    # compare the multisets of triangle coordinate triples
    a = refine_uniform(structured_unit_square(2))
    b = structured_unit_square(4)
    ca = np.sort(a.vertices[a.triangles].reshape(-1))
    cb = np.sort(b.vertices[b.triangles].reshape(-1))
    assert np.array_equal(ca, cb)
    key_a = sorted(tuple(sorted(map(tuple, tri))) for tri in a.vertices[a.triangles])
    key_b = sorted(tuple(sorted(map(tuple, tri))) for tri in b.vertices[b.triangles])
    assert key_a == key_b


def test_refine_parent_maps():
    m = structured_unit_square(2)
    f = refine_uniform(m)
    assert f.parent is m
    assert np.array_equal(f.parent_tri, np.repeat(np.arange(m.n_triangles), 4))
    # sub-edges point at a coarse edge containing them; inner edges at -1
    sub = f.parent_edge >= 0
    mids = f.edge_midpoints[sub]
    pe = f.parent_edge[sub]
    a = m.vertices[m.edges[pe, 0]]
    b = m.vertices[m.edges[pe, 1]]
    # midpoint of a half-edge lies on the segment [a, b]
    cross = (b - a)[:, 0] * (mids - a)[:, 1] - (b - a)[:, 1] * (mids - a)[:, 0]
    assert np.abs(cross).max() <= 1e-14


def test_boundary_loop_structure():
    m = structured_unit_square(3)
    ids = m.boundary_edge_ids
    # closed loop: consecutive edges share exactly one vertex
    for k in range(len(ids)):
        e1 = set(m.edges[ids[k]])
        e2 = set(m.edges[ids[(k + 1) % len(ids)]])
        assert len(e1 & e2) == 1
    # starts at the lexicographically smallest boundary vertex: (0, 0)
    first = m.edges[ids[0]]
    assert any(np.array_equal(m.vertices[v], [0.0, 0.0]) for v in first)
    # counter-clockwise: outward normals point away from the centroid
    mids = m.edge_midpoints[ids]
    outward = np.sum(m.boundary_normals * (mids - [0.5, 0.5]), axis=1)
    assert np.all(outward > 0)


def test_edge_incidence_counts():
    m = structured_unit_square(3)
    interior = m.edge_tris[:, 1] >= 0
    assert np.all(m.boundary_pos[interior] < 0)
    assert np.all(m.boundary_pos[~interior] >= 0)
    assert interior.sum() + m.n_boundary_edges == m.n_edges


def test_write_read_roundtrip():
    m = structured_unit_square(2)
    m2 = read_mesh(write_mesh(m))
    assert np.array_equal(m.vertices, m2.vertices)
    assert np.array_equal(m.triangles, m2.triangles)
    assert np.array_equal(m.edges, m2.edges)
    assert np.array_equal(m.boundary_edge_ids, m2.boundary_edge_ids)


def test_read_clockwise_triangle_names_index():
    text = "crmesh 1\nvertices 4\n0 0\n1 0\n0 1\n1 1\ntriangles 2\n0 1 3\n0 1 2\n"
    # second triangle is fine; flip the first
    bad = "crmesh 1\nvertices 4\n0 0\n1 0\n0 1\n1 1\ntriangles 2\n0 3 1\n0 3 2\n"
    read_mesh(text.replace("0 1 2", "0 3 2"))  # sanity: valid variant parses
    with pytest.raises(MeshError, match="triangle 0"):
        read_mesh(bad)


def test_read_malformed_line_number():
    text = "crmesh 1\nvertices 2\n0 0\noops\n"
    with pytest.raises(MeshFormatError, match="line 4"):
        read_mesh(text)


def test_read_bad_header():
    with pytest.raises(MeshFormatError, match="line 1"):
        read_mesh("mesh 2\n")


def test_read_trailing_garbage():
    m = structured_unit_square(1)
    with pytest.raises(MeshFormatError, match="trailing"):
        read_mesh(write_mesh(m) + "extra\n")


def test_nonconforming_edge_sharing():
    # three triangles sharing the edge (0, 1)
    vertices = [(0, 0), (1, 0), (0, 1), (0.5, -1), (1, 1)]
    triangles = [(0, 1, 2), (0, 3, 1), (0, 1, 4)]
    with pytest.raises(MeshError, match="non-conforming"):
        Mesh(vertices, triangles)


def test_hanging_node_detected():
    # vertex 4 sits on the edge (1, 3) of the left triangle: conformity broken
    vertices = [(0, 0), (1, 0), (2, 0), (1, 1.5), (1.5, 0.75)]
    triangles = [(0, 1, 3), (1, 2, 4), (4, 2, 3)]
    with pytest.raises(MeshError):
        Mesh(vertices, triangles)


def test_min_angle_floor():
    with pytest.raises(MeshError, match="shape-regularity"):
        Mesh([(0, 0), (1, 0), (1, 0.01)], [(0, 1, 2)])


def test_duplicate_vertices_rejected():
    with pytest.raises(MeshError, match="duplicate"):
        Mesh([(0, 0), (1, 0), (0, 1), (1, 0)], [(0, 1, 2), (1, 3, 2)])


def test_mesh_arrays_immutable():
    m = structured_unit_square(2)
    with pytest.raises(ValueError):
        m.vertices[0, 0] = 5.0
    with pytest.raises(ValueError):
        m.triangles[0, 0] = 2
