import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derhamnet import generators
from derhamnet.generators import generate
from derhamnet.mesh import (DegenerateCellError, Mesh, MeshError, SubsimplexIndex, adjacency, barycentric_forms,
                            boundary_faces, build_patch, cell_geometry, check, edges, face_normal, faces,
                            load_mesh, patch_is_convex, save_mesh, shape_regularity, validate, vertex)

from conftest import reference_tet, reference_triangle, two_triangle_square


def test_valid_pair_sharing_an_edge():
    assert validate(two_triangle_square()) == []


def test_repeated_vertex_is_degenerate():
    m = Mesh(2, np.array([[0.0, 0], [1, 0], [0, 1]]), np.array([[0, 1, 1]]))
    problems = validate(m)
    assert problems and "degenerate" in problems[0]


def test_collinear_cell_is_degenerate():
    m = Mesh(2, np.array([[0.0, 0], [1, 0], [2, 0]]), np.array([[0, 1, 2]]))
    assert any("degenerate" in p for p in validate(m))


def test_hanging_node_is_reported():
    # the second triangle's edge covers only half of the first triangle's bottom edge
    verts = np.array([[0.0, 0], [2, 0], [0, 1], [1, 0], [1, -1]])
    m = Mesh(2, verts, np.array([[0, 1, 2], [0, 3, 4]]))
    assert validate(m)
    with pytest.raises(MeshError):
        check(m)


def test_overlapping_cells_are_reported():
    verts = np.array([[0.0, 0], [1, 0], [0, 1], [0.2, 0.2]])
    m = Mesh(2, verts, np.array([[0, 1, 2], [0, 1, 3]]))
    assert validate(m)


@pytest.mark.parametrize("domain,n", [("square-crisscross", 2), ("square-diag", 2), ("lshape", 2),
                                      ("cube-kuhn", 2), ("fichera", 1), ("lshape-prism", 1)])
def test_generators_are_valid(domain, n):
    assert validate(generate(domain, n)) == []


def test_generator_counts():
    m = generate("square-crisscross", 1)
    assert (m.n_cells, m.n_vertices) == (4, 5)
    assert generate("cube-kuhn", 1).n_cells == 6
    assert generate("lshape", 1).n_cells == 6
    assert generate("hypercube", 1, dim=4).n_cells == 24


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        generate("square-diag", 0)
    with pytest.raises(ValueError):
        generate("torus", 1)


def test_single_triangle_subsimplices():
    m = reference_triangle()
    assert len(faces(m)) == 3 and len(edges(m)) == 3 and len(boundary_faces(m)) == 3


def test_two_triangle_square_faces():
    m = two_triangle_square()
    assert len(faces(m)) == 5
    assert len(faces(m)) - len(boundary_faces(m)) == 1


def test_kuhn_cube_counts_by_brute_enumeration():
    m = generate("cube-kuhn", 1)
    tris = {tuple(sorted(t)) for cell in m.cells.tolist() for t in itertools.combinations(cell, 3)}
    segs = {tuple(sorted(t)) for cell in m.cells.tolist() for t in itertools.combinations(cell, 2)}
    assert [f.vertex_ids for f in faces(m)] == sorted(tris)
    assert [e.vertex_ids for e in edges(m)] == sorted(segs)
    per_face = {t: sum(set(t) <= set(c) for c in m.cells.tolist()) for t in tris}
    assert len(boundary_faces(m)) == sum(v == 1 for v in per_face.values())


def test_adjacency():
    m = two_triangle_square()
    interior = [f for f in faces(m) if f not in boundary_faces(m)][0]
    assert len(adjacency(m, interior)) == 2
    assert len(adjacency(m, boundary_faces(m)[0])) == 1
    cc = generate("square-crisscross", 1)
    center = int(np.flatnonzero(np.all(cc.vertices == 0.5, axis=1))[0])
    assert len(adjacency(cc, vertex(center))) == 4
    with pytest.raises(MeshError):
        adjacency(m, SubsimplexIndex("face", (0, 99)))


def test_reference_triangle_geometry():
    geo = cell_geometry(reference_triangle(), 0)
    assert geo.volume == pytest.approx(0.5)
    A, b = barycentric_forms(reference_triangle().cell_points(0))
    # form of vertex (0,0) is 1 - x1 - x2
    np.testing.assert_allclose(A[0], [-1.0, -1.0], atol=1e-15)
    assert b[0] == pytest.approx(1.0)
    np.testing.assert_allclose(geo.inradius, 2 * 0.5 / (2 + np.sqrt(2)))


@pytest.mark.parametrize("m", [reference_triangle(), reference_tet(), generate("fichera", 1)])
def test_barycentric_forms_are_nodal(m):
    for c in range(m.n_cells):
        pts = m.cell_points(c)
        A, b = barycentric_forms(pts)
        vals = pts @ A.T + b
        np.testing.assert_allclose(vals, np.eye(m.dim + 1), atol=1e-13)


def test_degenerate_cell_geometry_raises():
    with pytest.raises(DegenerateCellError):
        barycentric_forms(np.array([[0.0, 0], [1, 1], [2, 2]]))


def test_shape_regularity_uniform_crisscross():
    # every criss-cross triangle is a right isosceles triangle with legs h/sqrt(2)
    m = generate("square-crisscross", 3)
    leg = (1 / 3) / np.sqrt(2)
    ratio = (1 / 3) / (leg * leg / (2 * leg + 1 / 3))
    ratios = [cell_geometry(m, c).diameter / cell_geometry(m, c).inradius for c in range(m.n_cells)]
    np.testing.assert_allclose(ratios, ratio, rtol=1e-12)
    assert shape_regularity(m) == pytest.approx(ratio)


def test_face_normal_is_unit_and_orthogonal():
    m = generate("cube-kuhn", 1)
    for f in faces(m):
        n = face_normal(m, f)
        pts = m.vertices[list(f.vertex_ids)]
        assert np.linalg.norm(n) == pytest.approx(1.0)
        np.testing.assert_allclose((pts[1:] - pts[0]) @ n, 0.0, atol=1e-14)


def _forms_at(mesh, cell, x):
    A, b = barycentric_forms(mesh.cell_points(cell))
    return A @ x + b


def test_patch_star_points_on_crisscross():
    m = generate("square-crisscross", 1)
    center = int(np.flatnonzero(np.all(m.vertices == 0.5, axis=1))[0])
    patch = build_patch(m, center)
    assert len(patch.cells) == 4
    for q in patch.star_points:
        for c in patch.cells:
            # q lies strictly on p's side of each hyperplane opposite p
            k = m.cells[c].tolist().index(center)
            assert _forms_at(m, c, q)[k] > 0


def test_patch_single_cell_corner():
    m = two_triangle_square()
    corner = [p for p in range(m.n_vertices) if len(adjacency(m, vertex(p))) == 1][0]
    patch = build_patch(m, corner)
    # the first sub-simplex is the cell itself, listed with the center first
    first = patch.sub_simplices[0, 0]
    np.testing.assert_array_equal(first[0], m.vertices[corner])
    assert sorted(map(tuple, first)) == sorted(map(tuple, m.cell_points(patch.cells[0])))


def test_patch_reentrant_corner_contains_cells():
    m = generate("lshape", 1)
    corner = int(np.flatnonzero(np.all(m.vertices == 0.0, axis=1))[0])
    patch = build_patch(m, corner)
    assert len(patch.cells) == 6
    for j, c in enumerate(patch.cells):
        big = patch.enlarged_simplex(j)
        A, b = barycentric_forms(big)
        lam = m.cell_points(c) @ A.T + b
        assert np.all(lam >= -1e-12)


def test_patch_convexity():
    cc = generate("square-crisscross", 1)
    center = int(np.flatnonzero(np.all(cc.vertices == 0.5, axis=1))[0])
    assert patch_is_convex(cc, center)
    ls = generate("lshape", 1)
    corner = int(np.flatnonzero(np.all(ls.vertices == 0.0, axis=1))[0])
    assert not patch_is_convex(ls, corner)
    sq = two_triangle_square()
    corner = [p for p in range(sq.n_vertices) if len(adjacency(sq, vertex(p))) == 1][0]
    assert patch_is_convex(sq, corner)


def test_fichera_has_nonconvex_patch():
    m = generate("fichera", 1)
    assert not all(patch_is_convex(m, p) for p in range(m.n_vertices))


def test_mesh_json_roundtrip(tmp_path):
    m = generate("lshape", 2)
    path = tmp_path / "m.json"
    save_mesh(m, path)
    back = load_mesh(path)
    np.testing.assert_array_equal(back.vertices, m.vertices)
    np.testing.assert_array_equal(back.cells, m.cells)
    assert set(json.loads(path.read_text())) == {"dim", "vertices", "cells"}


def test_subsimplex_json_roundtrip():
    s = SubsimplexIndex("edge", (3, 7))
    assert SubsimplexIndex.from_json(s.to_json()) == s


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(2, 3))
def test_kuhn_grids_are_regular(n, dim):
    m = generators.hypercube(n, dim) if n <= 2 or dim == 2 else generators.hypercube(1, dim)
    assert validate(m) == []
    total = sum(cell_geometry(m, c).volume for c in range(m.n_cells))
    assert total == pytest.approx(1.0)
