import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from immersed_rt.exceptions import AssumptionViolation, TopologyError
from immersed_rt.geometry import (build_uniform_mesh, circle, classify_mesh, empty_interface, make_cut,
                                  mesh_from_triangles, polygon_area, polyline_interface, rotate_clockwise)


@pytest.mark.parametrize("N, nt, ne, nv", [(1, 2, 5, 4), (2, 8, 16, 9)])
def test_uniform_mesh_counts(N, nt, ne, nv):
    m = build_uniform_mesh(N)
    assert (m.n_triangles, m.n_edges, m.n_vertices) == (nt, ne, nv)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 24))
def test_uniform_mesh_count_formulas(N):
    m = build_uniform_mesh(N)
    assert m.n_triangles == 2 * N * N
    assert m.n_edges == 3 * N * N + 2 * N
    assert m.n_vertices == (N + 1) ** 2
    assert m.boundary.sum() == 4 * N


def test_mesh_invariants():
    m = build_uniform_mesh(4)
    np.testing.assert_allclose(np.linalg.norm(m.edge_normals, axis=1), 1.0)
    assert m.areas.sum() == pytest.approx(4.0)
    assert m.h == pytest.approx(math.sqrt(2) * 0.5)
    # counterclockwise triangles, all with a right angle
    X = m.coords()
    cross = (X[:, 1, 0] - X[:, 0, 0]) * (X[:, 2, 1] - X[:, 0, 1]) - (X[:, 1, 1] - X[:, 0, 1]) * (X[:, 2, 0] - X[:, 0, 0])
    assert np.all(cross > 0)
    np.testing.assert_allclose(m.max_angles(), np.pi / 2)
    # boundary edges point out of the domain
    mid = m.vertices[m.edges[m.boundary]].mean(axis=1)
    assert np.all(np.einsum("ij,ij->i", m.edge_normals[m.boundary], mid) > 0)
    # canonical normal is exterior to the first incident triangle
    out = m.outward_normals()
    for e in range(m.n_edges):
        t = m.edge_to_elements[e, 0]
        i = list(m.tri_edges[t]).index(e)
        np.testing.assert_allclose(out[t, i], m.edge_normals[e])


def test_diagonal_direction():
    m = build_uniform_mesh(1)
    diag = m.edges[~m.boundary][0]
    np.testing.assert_allclose(sorted(map(tuple, m.vertices[diag])), [(-1.0, 1.0), (1.0, -1.0)])


def test_rotate_clockwise():
    np.testing.assert_allclose(rotate_clockwise([0.0, 1.0]), [1.0, 0.0])


def test_circle_level_set():
    ls = circle(0.5)
    x = np.array([[0.3, 0.4], [1.0, 0.0]])
    np.testing.assert_allclose(ls(x), [0.0, 0.5])
    np.testing.assert_allclose(np.linalg.norm(ls.normal(x), axis=1), 1.0)
    np.testing.assert_allclose(ls.tangent(x)[0], rotate_clockwise(ls.normal(x)[0]))


def test_single_triangle_cut_point():
    V = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75]])
    m = mesh_from_triangles(V, [[0, 1, 2]])
    # the lone triangle has only boundary edges; classify the geometry directly
    cls_pts = []
    ls = circle(0.5)
    for e in range(3):
        a, b = m.vertices[m.edges[e]]
        if np.sign(ls(a)) != np.sign(ls(b)):
            s = np.linspace(0, 1, 200001)
            vals = ls(a + s[:, None] * (b - a))
            k = np.flatnonzero(np.diff(np.sign(vals)))[0]
            cls_pts.append(a + s[k] * (b - a))
    assert any(abs(p[1] - 0.25) < 1e-12 and abs(p[0] - math.sqrt(0.1875)) < 1e-5 for p in cls_pts)


def test_interior_triangle_cut_point_bisection():
    # a uniform mesh with cell size 0.5 contains the triangle as a lower cell triangle
    m = build_uniform_mesh(5, (-1.25, 1.25, -1.25, 1.25))
    target = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75]])
    t = [k for k in range(m.n_triangles) if np.allclose(m.coords(k), target)][0]
    cls = classify_mesh(m, circle(0.5))
    assert t in cls.cuts
    bottom = [e for e in m.tri_edges[t] if np.allclose(m.vertices[m.edges[e]][:, 1], 0.25)][0]
    assert cls.edge_cut[bottom]
    assert cls.edge_points[bottom] == pytest.approx([math.sqrt(0.1875), 0.25], abs=1e-13)


def test_far_triangle_is_not_interface():
    m = build_uniform_mesh(8)
    cls = classify_mesh(m, circle(0.5))
    far = np.flatnonzero(np.linalg.norm(m.coords(), axis=2).min(axis=1) > 0.6)
    assert len(far) and np.all(cls.element_side[far] == 1)
    assert not set(far.tolist()) & set(cls.cuts)


def test_classification_N8():
    m = build_uniform_mesh(8)
    cls = classify_mesh(m, circle(0.5))
    assert len(cls.cuts) == len(cls.interface_elements) > 0
    for t, cut in cls.cuts.items():
        assert len(cut.cut_edge_local_ids) == 2 and cut.cut_edge_local_ids[0] != cut.cut_edge_local_ids[1]
        total = abs(polygon_area(cut.plus_polygon)) + abs(polygon_area(cut.minus_polygon))
        assert total == pytest.approx(m.areas[t], rel=1e-12)
        assert np.linalg.norm(cut.n_h) == pytest.approx(1.0)
        np.testing.assert_allclose(cut.t_h, rotate_clockwise(cut.n_h))
        np.testing.assert_allclose(cut.x_T, 0.5 * (cut.D + cut.E))
        for P in (cut.D, cut.E):
            # each point lies on the closed local edge
            i = cut.cut_edge_local_ids[0] if P is cut.D else cut.cut_edge_local_ids[1]
            a, b = cut.vertices[[(i + 1) % 3, (i + 2) % 3]]
            s = np.dot(P - a, b - a) / np.dot(b - a, b - a)
            assert -1e-14 <= s <= 1 + 1e-14
            d, q = b - a, P - a
            assert abs(d[0] * q[1] - d[1] * q[0]) < 1e-14
        # n_h points into the plus side
        for tri in cut.sub_triangles_plus:
            assert (tri.mean(axis=0) - cut.D) @ cut.n_h > 0


def test_interface_through_vertices():
    # with N divisible by 4 the circle of radius 0.5 passes through the vertices (+-0.5, 0), (0, +-0.5)
    m = build_uniform_mesh(8)
    cls = classify_mesh(m, circle(0.5))
    on = np.flatnonzero(cls.vertex_sides == 0)
    np.testing.assert_allclose(np.sort(np.abs(m.vertices[on]).sum(axis=1)), [0.5] * 4)
    through = [c for c in cls.cuts.values() if any(np.any(np.all(c.vertices == P, axis=1)) for P in (c.D, c.E))]
    assert through
    with pytest.raises(AssumptionViolation, match="lie on the interface"):
        classify_mesh(m, circle(0.5), on_vertex="error")


@pytest.mark.parametrize("N", [8, 16, 32])
def test_centroid_sides_match_level_set(N):
    m = build_uniform_mesh(N)
    ls = circle(0.5)
    cls = classify_mesh(m, ls)
    for cut in cls.cuts.values():
        for tri in cut.sub_triangles_plus:
            assert ls(tri.mean(axis=0)) > 0
        for tri in cut.sub_triangles_minus:
            assert ls(tri.mean(axis=0)) < 0


def test_polyline_closed_and_converges():
    ls = circle(0.5)
    dist = []
    for N in (8, 16, 32, 64):
        cls = classify_mesh(build_uniform_mesh(N), ls)
        line = polyline_interface(cls)
        assert len(line.loops) == 1 and line.n_segments == len(cls.cuts)
        np.testing.assert_allclose(line.loops[0][0], line.loops[0][-1])
        dist.append(line.max_distance(ls))
    ratios = np.array(dist[:-1]) / np.array(dist[1:])
    assert np.all((ratios > 3.0) & (ratios < 5.0))


def test_no_interface():
    cls = classify_mesh(build_uniform_mesh(4), empty_interface())
    assert not cls.cuts and np.all(cls.element_side == 1)
    with pytest.raises(TopologyError):
        polyline_interface(cls)


def test_interface_leaving_domain():
    with pytest.raises(AssumptionViolation, match="boundary"):
        classify_mesh(build_uniform_mesh(8), circle(1.2))


def test_edge_cut_twice():
    # the single diagonal of N=1 passes through the small circle
    with pytest.raises(AssumptionViolation, match="more than once"):
        classify_mesh(build_uniform_mesh(1), circle(0.5))


def test_obtuse_interface_element_rejected():
    V = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-0.6, 0.0], [0.6, 0.0], [0.0, 0.1]])
    tris = [[4, 5, 6], [0, 1, 5], [0, 5, 4], [0, 4, 3], [1, 2, 5], [5, 2, 6], [6, 2, 3], [4, 6, 3]]
    with pytest.raises(AssumptionViolation, match="maximum angle"):
        classify_mesh(mesh_from_triangles(V, tris), circle(0.05, center=(0.0, 0.12)))


def test_random_center_perturbations():
    rng = np.random.default_rng(7)
    m = build_uniform_mesh(32)
    for _ in range(20):
        c = rng.uniform(-1e-3, 1e-3, size=2)
        cls = classify_mesh(m, circle(0.5, center=c))
        assert len(cls.cuts) > 0
        polyline_interface(cls)


def test_make_cut_lone_minus():
    T = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    cut = make_cut(3, T, [-1, 1, 1], {2: np.array([0.4, 0.0]), 1: np.array([0.0, 0.3])})
    assert cut.lone_vertex == 0
    assert abs(polygon_area(cut.minus_polygon)) == pytest.approx(0.06)
    assert cut.side_of(np.array([0.05, 0.05])) == -1
    assert cut.side_of(np.array([0.5, 0.4])) == 1
    with pytest.raises(AssumptionViolation):
        make_cut(3, T, [-1, 1, 1], {2: np.array([0.4, 0.0])})
