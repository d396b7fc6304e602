import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derhamnet.generators import generate
from derhamnet.mesh import adjacency, cell_geometry, face_measure, face_normal
from derhamnet.network import evaluate
from derhamnet.shapes import SpaceKind, n0_net, rt0_net
from derhamnet.spaces import basis_net, function_net
from derhamnet.verify import checks
from derhamnet.verify.checks import (SamplePlan, audit_sizes, check_conformity, check_derham, check_domination,
                                     check_exactness, check_traces, curl_from_jacobian, fd_jacobian, gadget_audit)
from derhamnet.verify.convergence import Target, convergence_study, errors_for, interpolate, observed_rates
from derhamnet.verify.oracle import Oracle, OracleDomainError, bary_gradients, oracle_eval
from derhamnet.verify.quadrature import simplex_rule

from conftest import reference_tet, reference_triangle


# oracle ---------------------------------------------------------------------------


def test_oracle_hat_at_barycenter():
    for m in (generate("square-crisscross", 1), generate("cube-kuhn", 1)):
        o = Oracle(m, "S1")
        for c in range(m.n_cells):
            vals = o.basis_values(m.cell_points(c).mean(axis=0))[0]
            np.testing.assert_allclose(vals[m.cells[c]], 1.0 / (m.dim + 1), atol=1e-15)


def test_oracle_rt0_reference():
    m = reference_triangle()
    i = Oracle(m, "RT0").index[(1, 2)]
    v = Oracle(m, "RT0").basis_values([[0.25, 0.25]])[0, i]
    np.testing.assert_allclose(v, [math.sqrt(2) / 4] * 2, atol=1e-15)


def test_oracle_cr0_face_barycenter():
    m = reference_tet()
    o = Oracle(m, "CR0")
    for face, vals in o.local_basis(0, np.array([[1 / 3, 1 / 3, 1 / 3]])):
        if o.dofs[face].vertex_ids == (1, 2, 3):
            assert vals[0] == pytest.approx(1.0)


def test_oracle_rejects_skeleton_points():
    m = generate("square-diag", 1)
    with pytest.raises(OracleDomainError):
        oracle_eval(m, "RT0", np.ones(5), [[0.5, 0.5]])
    assert oracle_eval(m, "S1", np.ones(4), [[0.5, 0.5]], closed=True)[0] == pytest.approx(1.0)


# exactness and conformity -------------------------------------------------------------


def test_exactness_s0_is_exact_zero():
    r = check_exactness(generate("lshape", 2), "S0")
    assert r.passed and r.max_error == 0.0


def test_exactness_relu_only_on_lshape():
    r = check_exactness(generate("lshape", 1), "S1_ReLU_only")
    assert r.passed and r.max_error <= 1e-9


def test_exactness_rt0_on_cube():
    r = check_exactness(generate("cube-kuhn", 1), "RT0")
    assert r.passed and r.max_error <= 1e-9


@pytest.mark.parametrize("kind", ["S1", "RT0", "N0", "CR0"])
def test_conformity_passes(kind):
    assert check_conformity(generate("square-crisscross", 2), kind).passed


def test_conformity_negative_controls():
    m = generate("square-crisscross", 2)
    # a single element indicator jumps by exactly 1 across its faces
    unit = np.eye(m.n_cells)[0]
    s0 = check_conformity(m, "S0", component="all", coefficients=unit)
    assert not s0.passed and s0.max_error == pytest.approx(1.0)
    assert not check_conformity(m, "RT0", component="tangential").passed


def test_cr0_jump_vanishes_only_at_barycenter():
    m = generate("square-crisscross", 1)
    f = checks.interior_faces(m)[0]
    c = adjacency(m, f)[0]
    # shape function of another face of a cell next to f
    g = next(h for h in m.subsimplices("face") if h != f and set(h.vertex_ids) <= set(m.cells[c].tolist()))
    order = basis_net(m, "CR0").dof_order
    e = np.zeros(len(order))
    e[order.index(g)] = 1.0
    net = function_net(m, "CR0", e).net
    pts = m.vertices[list(f.vertex_ids)]
    n = face_normal(m, f)

    def jump(x):
        return evaluate(net, x + 1e-7 * n)[0] - evaluate(net, x - 1e-7 * n)[0]

    assert abs(jump(pts.mean(axis=0))) < 1e-6
    assert abs(jump(0.8 * pts[0] + 0.2 * pts[1])) > 0.1


# de Rham ----------------------------------------------------------------------------


def test_constant_s1_has_zero_gradient():
    m = generate("square-crisscross", 2)
    f = function_net(m, "S1", np.ones(m.n_vertices))
    x, step, _ = checks.derivative_probes(m, 2, np.random.default_rng(0))
    jac = fd_jacobian(lambda p: evaluate(f.net, p), x, step)
    assert np.abs(jac).max() < 1e-8


def test_n0_curl_matches_whitney_form():
    m = generate("cube-kuhn", 1)
    x, step, cells = checks.derivative_probes(m, 2, np.random.default_rng(1))
    for edge in m.subsimplices("edge")[:8]:
        curl = curl_from_jacobian(fd_jacobian(lambda p: evaluate(n0_net(m, edge).net, p), x, step))
        a, b = edge.vertex_ids
        length = np.linalg.norm(m.vertices[b] - m.vertices[a])
        for k, c in enumerate(cells):
            cell = m.cells[c].tolist()
            if a in cell and b in cell:
                g = bary_gradients(m.cell_points(c))
                ref = 2 * length * np.cross(g[cell.index(a)], g[cell.index(b)])
            else:
                ref = np.zeros(3)
            np.testing.assert_allclose(curl[k], ref, atol=1e-7)


def test_rt0_divergence_per_element():
    m = generate("square-crisscross", 1)
    x, step, cells = checks.derivative_probes(m, 2, np.random.default_rng(2))
    for face in m.subsimplices("face"):
        div = np.trace(fd_jacobian(lambda p: evaluate(rt0_net(m, face).net, p), x, step), axis1=1, axis2=2)
        adj = sorted(adjacency(m, face))
        for k, c in enumerate(cells):
            if c in adj:
                sign = 1.0 if c == adj[0] else -1.0
                ref = sign * face_measure(m, face) / cell_geometry(m, c).volume
            else:
                ref = 0.0
            assert div[k] == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("domain,n", [("square-crisscross", 2), ("cube-kuhn", 1)])
def test_derham_identities(domain, n):
    r = check_derham(generate(domain, n), n_vectors=3)
    assert r.passed, r.details


# sizes, domination, traces ------------------------------------------------------------


def test_gadget_audit():
    rows = {r["item"]: r for r in gadget_audit()}
    assert rows["times_step_net(3) M"]["measured"] == 36
    assert rows["min_net(2) M"]["measured"] == 7
    assert all(r["ok"] for r in rows.values())


@pytest.mark.parametrize("kind", ["S0", "S1", "RT0", "N0", "CR0", "S1_ReLU_only"])
def test_audit_lshape(kind):
    assert audit_sizes(generate("lshape", 1), kind).passed


def test_domination_lshape():
    assert check_domination(generate("lshape", 1), per_pair=20).passed


def test_traces_cube():
    reports = check_traces(generate("cube-kuhn", 1), n_points=5)
    assert reports and all(r.passed for r in reports)


# quadrature and convergence -------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([2, 3]), st.lists(st.integers(0, 4), min_size=3, max_size=4))
def test_quadrature_exact_to_degree_four(d, powers):
    powers = (powers + [0, 0, 0, 0])[: d + 1]
    if sum(powers) > 4:
        powers = [min(p, 1) for p in powers]
    lam, w = simplex_rule(d, 4)
    approx = float(w @ np.prod(lam ** np.array(powers), axis=1))
    # integral of prod lam_i^a_i over the simplex divided by its volume
    exact = math.factorial(d) * math.prod(math.factorial(a) for a in powers) / math.factorial(d + sum(powers))
    assert approx == pytest.approx(exact, rel=1e-12)


def test_linear_target_reproduced():
    target = Target("affine", lambda x: 1 + 2 * x[:, 0] - x[:, 1],
                    lambda x: np.tile([2.0, -1.0], (len(x), 1)))
    rep = convergence_study("square-crisscross", "S1", target=target, levels=(2, 4))
    assert max(rep.errors["L2"]) < 1e-12
    assert max(rep.errors["H1_broken"]) < 1e-7


def test_observed_rates():
    assert observed_rates([0.5, 0.25], [4.0, 1.0]) == [pytest.approx(2.0)]


def test_interpolation_of_constant_field():
    m = generate("square-crisscross", 2)
    const = Target("const", lambda x: np.tile([1.0, 2.0], (len(x), 1)), lambda x: np.zeros(len(x)))
    errs = errors_for(m, SpaceKind.RT0, const, interpolate(m, SpaceKind.RT0, const))
    assert errs["L2"] < 1e-12 and errs["div"] < 1e-7


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("DERHAMNET_SEED", "17")
    assert SamplePlan().seed == 17
    monkeypatch.delenv("DERHAMNET_SEED")
    assert SamplePlan().seed == 0
