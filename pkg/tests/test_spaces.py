import json

import numpy as np
import pytest

from derhamnet.generators import generate
from derhamnet.mesh import MeshError
from derhamnet.network import BISU, evaluate, layers_equal
from derhamnet.spaces import (basis_artifact, basis_net, check_supported, dof_order, face_charts, function_artifact,
                              function_net, load_artifact_network, load_coefficients, net_linear_combine,
                              trace_coefficients, trace_net)
from derhamnet.verify.checks import SamplePlan, interior_samples
from derhamnet.verify.oracle import Oracle, oracle_eval

from conftest import two_triangle_square

KINDS_2D = ["S0", "S1", "S1_ReLU_only", "RT0", "N0", "CR0"]


@pytest.fixture(scope="module")
def crisscross():
    return generate("square-crisscross", 2)


@pytest.fixture(scope="module")
def cube():
    return generate("cube-kuhn", 1)


def samples(mesh, seed=0, count=5):
    x, _ = interior_samples(mesh, SamplePlan(per_element_count=count, seed=seed))
    return x


def test_s0_basis_on_two_triangles():
    m = two_triangle_square()
    b = basis_net(m, "S0")
    assert b.net.output_dim == 2 and b.net.depth == 3
    # dofs follow sorted vertex tuples, not cell storage order
    x = np.array([m.vertices[list(s.vertex_ids)].mean(axis=0) for s in b.dof_order])
    np.testing.assert_array_equal(b(x), np.eye(2))


def test_s1_partition_of_unity(crisscross):
    b = basis_net(crisscross, "S1")
    x = np.random.default_rng(0).uniform(0, 1, size=(100, 2))
    np.testing.assert_allclose(b(x).sum(axis=1), 1.0, atol=1e-13)


@pytest.mark.parametrize("kind", KINDS_2D)
def test_basis_matches_oracle(crisscross, kind):
    b = basis_net(crisscross, kind)
    x = samples(crisscross)
    np.testing.assert_allclose(b(x), Oracle(crisscross, kind).basis_values(x), atol=1e-12)
    assert [s for s in b.dof_order] == dof_order(crisscross, kind)


def test_vector_output_layout(cube):
    b = basis_net(cube, "RT0")
    x = samples(cube, count=2)
    flat = evaluate(b.net, x)
    assert flat.shape == (len(x), 3 * len(b.dof_order))
    np.testing.assert_array_equal(b(x)[:, 1, :], flat[:, 3:6])


def test_depths(crisscross):
    for kind, L in [("S0", 3), ("S1", 5), ("RT0", 5), ("N0", 5), ("CR0", 5)]:
        assert basis_net(crisscross, kind).net.depth == L
    relu = basis_net(crisscross, "S1_ReLU_only")
    assert relu.net.count_acts(BISU) == 0
    # padded to one depth by identity nets, within the general hat bound
    assert relu.net.depth <= 8 + 3 + 2


def test_relu_basis_on_lshape_has_no_bisu():
    b = basis_net(generate("lshape", 1), "S1_ReLU_only")
    assert b.net.count_acts(BISU) == 0


def test_n0_excluded_above_three_dimensions():
    with pytest.raises(MeshError, match="excluded if d > 3"):
        check_supported(generate("hypercube", 1, dim=4), "N0")
    with pytest.raises(MeshError):
        basis_net(generate("hypercube", 1, dim=4), "N0")


def test_zero_coefficients(crisscross):
    b = basis_net(crisscross, "RT0")
    f = function_net(crisscross, "RT0", np.zeros(len(b.dof_order)), basis=b)
    assert layers_equal(f.net.layers[:-1], b.net.layers[:-1])
    np.testing.assert_array_equal(f(samples(crisscross)), 0.0)


@pytest.mark.parametrize("kind", ["S1", "RT0", "CR0"])
def test_unit_coefficient_is_shape_function(crisscross, kind):
    b = basis_net(crisscross, kind)
    x = samples(crisscross, count=20)
    i = len(b.dof_order) // 2
    e = np.zeros(len(b.dof_order))
    e[i] = 1.0
    f = function_net(crisscross, kind, e, basis=b)
    ref = evaluate(b.shape_nets[i].net, x)
    np.testing.assert_allclose(f(x).reshape(ref.shape), ref, atol=1e-14)


def test_random_s1_matches_oracle(crisscross):
    rng = np.random.default_rng(4)
    coeffs = rng.normal(size=crisscross.n_vertices)
    f = function_net(crisscross, "S1", coeffs)
    x = samples(crisscross, seed=5, count=13)[:100]
    np.testing.assert_allclose(f(x), oracle_eval(crisscross, "S1", coeffs, x), rtol=1e-9, atol=1e-9)


def test_wrong_coefficient_length(crisscross):
    with pytest.raises(ValueError):
        function_net(crisscross, "S1", np.zeros(3))


def test_linear_combination(crisscross):
    b = basis_net(crisscross, "N0")
    rng = np.random.default_rng(6)
    n = len(b.dof_order)
    u, v, w = (function_net(crisscross, "N0", rng.normal(size=n), basis=b) for _ in range(3))
    np.testing.assert_array_equal(net_linear_combine(u, -1.0, u).coefficients, 0.0)
    x = samples(crisscross, seed=7)
    np.testing.assert_allclose(net_linear_combine(u, 2.5, v)(x), u(x) + 2.5 * v(x), atol=1e-12)
    left = net_linear_combine(net_linear_combine(u, 1.0, v), 1.0, w)
    right = net_linear_combine(u, 1.0, net_linear_combine(v, 1.0, w))
    np.testing.assert_allclose(left.coefficients, right.coefficients, rtol=0, atol=1e-15)
    assert layers_equal(left.net.layers[:-1], b.net.layers[:-1])


def test_linear_combination_rejects_other_space(crisscross):
    a = function_net(crisscross, "S1", np.ones(crisscross.n_vertices))
    c = function_net(crisscross, "CR0", np.ones(len(dof_order(crisscross, "CR0"))))
    with pytest.raises(ValueError):
        net_linear_combine(a, 1.0, c)


def test_artifacts_roundtrip(crisscross):
    b = basis_net(crisscross, "S1")
    obj = json.loads(json.dumps(basis_artifact(b)))
    assert [tuple(s) for s in (d["vertex_ids"] for d in obj["dof_order"])] == [s.vertex_ids for s in b.dof_order]
    x = samples(crisscross)
    assert evaluate(load_artifact_network(obj), x).tobytes() == evaluate(b.net, x).tobytes()
    f = function_net(crisscross, "S1", np.linspace(-1, 1, crisscross.n_vertices), basis=b)
    fobj = json.loads(json.dumps(function_artifact(f)))
    np.testing.assert_array_equal(load_coefficients(json.dumps(fobj)), f.coefficients)


# charts and traces ------------------------------------------------------------------


def test_cube_charts(cube):
    charts = face_charts(cube)
    assert len(charts) == 6
    for ch in charts:
        assert ch.param_mesh.n_cells == 2
        J = ch.jacobian
        np.testing.assert_allclose(J.T @ J, np.eye(2), atol=1e-14)
        np.testing.assert_allclose(np.cross(ch.frame[0], ch.frame[1]), ch.normal, atol=1e-14)
        # the outward normal points away from the cube center
        assert (ch.origin - 0.5) @ ch.normal > 0


def test_lshape_prism_charts():
    assert len(face_charts(generate("lshape-prism", 1))) == 8


def _param_samples(chart, rng, n=20):
    pm = chart.param_mesh
    c = rng.integers(0, pm.n_cells, size=n)
    lam = rng.dirichlet(np.ones(3), size=n) * 0.98 + 0.02 / 3
    return np.einsum("nk,nkd->nd", lam, pm.vertices[pm.cells[c]])


def test_s1_trace_of_hat_is_planar_hat(cube, rng):
    for ch in face_charts(cube):
        p3 = ch.vertex_ids[0]
        coeffs = np.zeros(cube.n_vertices)
        coeffs[p3] = 1.0
        c2 = trace_coefficients(cube, ch, "S1", coeffs)
        tr = trace_net(cube, ch, "S1", c2)
        u = _param_samples(ch, rng)
        ref2 = Oracle(ch.param_mesh, "S1").basis_values(u)[:, 0]
        ref3 = oracle_eval(cube, "S1", coeffs, ch.to_space(u), closed=True)
        np.testing.assert_allclose(tr(u), ref2, atol=1e-12)
        np.testing.assert_allclose(tr(u), ref3, atol=1e-12)


def test_s0_trace_is_triangle_indicator(cube, rng):
    ch = face_charts(cube)[0]
    tr = trace_net(cube, ch, "S0", [1.0, 0.0])
    u = _param_samples(ch, rng)
    cells, _ = Oracle(ch.param_mesh, "S0").locate(u)
    np.testing.assert_array_equal(tr(u), (cells == 0).astype(float))


def test_rt0_trace_is_tangential_field(cube, rng):
    ch = face_charts(cube)[2]
    n = len(dof_order(ch.param_mesh, "RT0"))
    tr = trace_net(cube, ch, "RT0", np.arange(1.0, n + 1))
    u = _param_samples(ch, rng)
    out = tr(u)
    assert out.shape == (len(u), 3)
    np.testing.assert_allclose(out @ ch.normal, 0.0, atol=1e-13)
    planar = oracle_eval(ch.param_mesh, "RT0", np.arange(1.0, n + 1), u)
    np.testing.assert_allclose(out, planar @ ch.frame, atol=1e-12)


def test_trace_rejects_cr0(cube):
    with pytest.raises(ValueError):
        trace_net(cube, face_charts(cube)[0], "CR0", np.zeros(5))
