"""Exactness, conformity, de Rham, size, domination and trace checks."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .. import calculus as calc
from .. import shapes
from ..mesh import (
    Mesh,
    SubsimplexIndex,
    adjacency,
    boundary_faces,
    boundary_vertices,
    build_patch,
    cell_geometry,
    face_normal,
    patch_is_convex,
    simplex_volume,
    vertex,
)
from ..network import BISU, evaluate, metrics
from ..shapes import SpaceKind
from ..spaces import (
    BasisNet,
    basis_net,
    dof_order,
    face_charts,
    function_net,
    trace_coefficients,
    trace_net,
)
from .oracle import Oracle, barycentric

EXACT_TOL = 1e-9
JUMP_TOL = 1e-8
DERHAM_TOL = 1e-8


def default_seed() -> int:
    return int(os.environ.get("DERHAMNET_SEED", "0"))


@dataclass
class SamplePlan:
    per_element_count: int = 20
    barycentric_margin: float = 1e-3
    seed: int = field(default_factory=default_seed)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass
class Report:
    check: str
    kind: str
    mesh: str
    max_error: float
    threshold: float
    passed: bool
    details: dict = field(default_factory=dict)

    def json(self) -> dict:
        out = {"check": self.check, "kind": self.kind, "mesh": self.mesh, "max_error": self.max_error,
               "threshold": self.threshold, "pass": self.passed}
        if self.details:
            out["details"] = self.details
        return out


def _report(check, kind, mesh_name, err, tol, **details) -> Report:
    err = float(err)
    return Report(check, str(getattr(kind, "value", kind)), mesh_name, err, tol, bool(err <= tol), details)


# sampling -------------------------------------------------------------------


def interior_samples(mesh: Mesh, plan: SamplePlan, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """``plan.per_element_count`` points per cell with all barycentric coordinates >= margin."""
    d = mesh.dim
    margin = plan.barycentric_margin
    if not 0 < margin < 1 / (d + 1):
        raise ValueError(f"margin must lie in (0, 1/{d + 1})")
    rng = rng if rng is not None else plan.rng()
    k = plan.per_element_count
    lam = rng.dirichlet(np.ones(d + 1), size=(mesh.n_cells, k)) * (1 - (d + 1) * margin) + margin
    pts = np.einsum("ckv,cvd->ckd", lam, mesh.vertices[mesh.cells])
    return pts.reshape(-1, d), np.repeat(np.arange(mesh.n_cells), k)


def face_points(mesh: Mesh, per_face: int, rng) -> np.ndarray:
    """Random points in the relative interior of every face."""
    out = []
    for f in mesh.subsimplices("face"):
        w = rng.dirichlet(np.ones(mesh.dim), size=per_face)
        out.append(w @ mesh.vertices[list(f.vertex_ids)])
    return np.vstack(out)


def face_barycenters(mesh: Mesh) -> np.ndarray:
    return np.array([mesh.vertices[list(f.vertex_ids)].mean(axis=0) for f in mesh.subsimplices("face")])


def _relative_error(net_vals: np.ndarray, ref: np.ndarray) -> float:
    if ref.size == 0:
        return 0.0
    return float(np.max(np.abs(net_vals - ref) / (1.0 + np.abs(ref))))


# exactness -----------------------------------------------------------------


def check_exactness(mesh: Mesh, kind, plan: SamplePlan | None = None, mesh_name: str = "",
                    basis: BasisNet | None = None) -> Report:
    """Every basis component against the oracle at interior samples.

    For the pure-ReLU space the check also covers vertices, face barycenters and
    random points on every face, where it must hold as well.
    """
    kind = SpaceKind(kind)
    plan = plan or SamplePlan()
    basis = basis or basis_net(mesh, kind)
    oracle = Oracle(mesh, kind)
    rng = plan.rng()
    x, _ = interior_samples(mesh, plan, rng)
    err = _relative_error(basis(x), oracle.basis_values(x))
    details = {"interior_points": len(x), "dofs": len(basis.dof_order)}
    if kind == SpaceKind.S1_RELU:
        skel = np.vstack([mesh.vertices, face_barycenters(mesh), face_points(mesh, 10, rng)])
        err = max(err, _relative_error(basis(skel), oracle.basis_values(skel, closed=True)))
        details["skeleton_points"] = len(skel)
        details["bisu_neurons"] = basis.net.count_acts(BISU)
        if details["bisu_neurons"]:
            err = math.inf
    return _report("exactness", kind, mesh_name, err, EXACT_TOL, **details)


# conformity ----------------------------------------------------------------


DEFAULT_COMPONENT = {SpaceKind.RT0: "normal", SpaceKind.N0: "tangential", SpaceKind.S1: "value",
                     SpaceKind.S1_RELU: "value", SpaceKind.CR0: "value", SpaceKind.S0: "value"}


def interior_faces(mesh: Mesh) -> list[SubsimplexIndex]:
    return [f for f in mesh.subsimplices("face") if len(adjacency(mesh, f)) == 2]


def face_jumps(mesh: Mesh, func, component: str, rel_offset: float = 1e-6) -> np.ndarray:
    """Jump of ``func`` across each interior face at its barycenter.

    One-sided limits come from linear extrapolation 2 v(eps) - v(2 eps) along the
    normal, which is exact for fields that are affine on each side.  Jumps are
    divided by max(1, size of the one-sided values).
    """
    faces = interior_faces(mesh)
    if not faces:
        return np.zeros(0)
    probes, normals = [], []
    for f in faces:
        m = mesh.vertices[list(f.vertex_ids)].mean(axis=0)
        n = face_normal(mesh, f)
        eps = rel_offset * min(cell_geometry(mesh, c).diameter for c in adjacency(mesh, f))
        probes += [m + eps * n, m + 2 * eps * n, m - eps * n, m - 2 * eps * n]
        normals.append(n)
    vals = np.asarray(func(np.array(probes)))
    vals = vals.reshape(len(faces), 4, -1)
    plus = 2 * vals[:, 0] - vals[:, 1]
    minus = 2 * vals[:, 2] - vals[:, 3]
    jump = plus - minus
    normals = np.array(normals)
    if component == "normal":
        size = np.abs(np.sum(jump * normals, axis=1))
    elif component == "tangential":
        tang = jump - np.sum(jump * normals, axis=1)[:, None] * normals
        size = np.linalg.norm(tang, axis=1)
    else:
        size = np.abs(jump).max(axis=1)
    scale = np.maximum(1.0, np.maximum(np.abs(plus).max(axis=1), np.abs(minus).max(axis=1)))
    return size / scale


def check_conformity(mesh: Mesh, kind, n_vectors: int = 3, seed: int | None = None, mesh_name: str = "",
                     component: str | None = None, coefficients=None, basis: BasisNet | None = None) -> Report:
    """Continuity of the kind's conforming component across interior faces, via the nets."""
    kind = SpaceKind(kind)
    component = component or DEFAULT_COMPONENT[kind]
    basis = basis or basis_net(mesh, kind)
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    vectors = [coefficients] if coefficients is not None else [
        rng.uniform(-1, 1, len(basis.dof_order)) for _ in range(n_vectors)]
    worst = 0.0
    for v in vectors:
        f = function_net(mesh, kind, v, basis)
        jumps = face_jumps(mesh, lambda x: evaluate(f.net, x), component)
        if len(jumps):
            worst = max(worst, float(jumps.max()))
    return _report(f"conformity-{component}", kind, mesh_name, worst, JUMP_TOL, vectors=len(vectors),
                   interior_faces=len(interior_faces(mesh)))


# de Rham ---------------------------------------------------------------------


def _incenter(mesh: Mesh, c: int) -> tuple[np.ndarray, float]:
    pts = mesh.cell_points(c)
    areas = np.array([simplex_volume(np.delete(pts, i, axis=0)) for i in range(len(pts))])
    return areas @ pts / areas.sum(), cell_geometry(mesh, c).inradius


def derivative_probes(mesh: Mesh, per_cell: int, rng):
    """Points well inside each cell, and the finite-difference step that keeps stencils inside."""
    d = mesh.dim
    centers, steps, cells = [], [], []
    for c in range(mesh.n_cells):
        ctr, r = _incenter(mesh, c)
        u = rng.normal(size=(per_cell, d))
        u *= (rng.uniform(0, 1, (per_cell, 1)) ** (1 / d)) / np.linalg.norm(u, axis=1, keepdims=True)
        centers.append(ctr + 0.3 * r * u)
        steps.append(np.full(per_cell, 0.5 * r))
        cells.append(np.full(per_cell, c))
    return np.vstack(centers), np.concatenate(steps), np.concatenate(cells)


def fd_jacobian(func, x: np.ndarray, step: np.ndarray) -> np.ndarray:
    """Central differences; shape (n, m, d) for an R^d -> R^m function (m = 1 for scalars)."""
    n, d = x.shape
    stencil = []
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        stencil += [x + step[:, None] * e, x - step[:, None] * e]
    vals = np.asarray(func(np.vstack(stencil))).reshape(2 * d, n, -1)
    jac = (vals[0::2] - vals[1::2]) / (2 * step[None, :, None])
    return np.transpose(jac, (1, 2, 0))


def curl_from_jacobian(jac: np.ndarray) -> np.ndarray:
    """3D curl (n, 3) or planar scalar rotation (n, 1) from Jacobians (n, d, d)."""
    if jac.shape[-1] == 3:
        return np.stack([jac[:, 2, 1] - jac[:, 1, 2], jac[:, 0, 2] - jac[:, 2, 0], jac[:, 1, 0] - jac[:, 0, 1]], axis=1)
    return (jac[:, 1, 0] - jac[:, 0, 1])[:, None]


def dof_directions(mesh: Mesh, kind: SpaceKind) -> np.ndarray:
    """Unit tangent (N0) or normal (RT0) carrying each dof's unit moment."""
    out = []
    for s in dof_order(mesh, kind):
        if kind == SpaceKind.RT0:
            out.append(face_normal(mesh, s))
        elif mesh.dim == 2:
            out.append(shapes.n0_tangent_2d(mesh, s))
        else:
            p, q = mesh.vertices[list(s.vertex_ids)]
            out.append((q - p) / np.linalg.norm(q - p))
    return np.array(out)


def _cellwise_constant(values: np.ndarray, cells: np.ndarray, n_cells: int) -> tuple[np.ndarray, float]:
    """Mean value per cell and the largest deviation from it."""
    means = np.zeros((n_cells,) + values.shape[1:])
    dev = 0.0
    for c in range(n_cells):
        block = values[cells == c]
        means[c] = block.mean(axis=0)
        dev = max(dev, float(np.abs(block - means[c]).max()))
    return means, dev


def cells_to_s0(mesh: Mesh, cell_values: np.ndarray) -> np.ndarray:
    """Reorder per-cell values (mesh cell order) into S0 dof order."""
    return np.array([cell_values[mesh.cell_index(s.vertex_ids)] for s in dof_order(mesh, SpaceKind.S0)])


def _project_to_dofs(mesh: Mesh, kind: SpaceKind, cell_values: np.ndarray) -> tuple[np.ndarray, float]:
    """Dof coefficients of a piecewise-constant field and the spread between adjacent cells.

    The spread is the jump of the conforming component; zero means the field lies in the space.
    """
    dirs = dof_directions(mesh, kind)
    coeffs, spread = [], 0.0
    for s, t in zip(dof_order(mesh, kind), dirs):
        vals = [float(cell_values[c] @ t) for c in adjacency(mesh, s)]
        coeffs.append(np.mean(vals))
        spread = max(spread, max(vals) - min(vals))
    return np.array(coeffs), spread


def check_derham(mesh: Mesh, n_vectors: int = 10, seed: int | None = None, mesh_name: str = "") -> Report:
    """Discrete de Rham sequence through the nets.

    (a) grad S1 lies in N0, (b) curl N0 lies in RT0 (in 2D: rot N0 in S0 and curl S1 in RT0)
    with zero divergence, (c) div RT0 lies in S0, (d) curl grad = 0 and div curl = 0.
    Derivatives are central differences of the nets inside cells, which are exact
    for cellwise affine realizations up to rounding.
    """
    d = mesh.dim
    if d not in (2, 3):
        raise ValueError("de Rham check needs d in {2, 3}")
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    bases = {k: basis_net(mesh, k) for k in (SpaceKind.S1, SpaceKind.N0, SpaceKind.RT0, SpaceKind.S0)}
    x, step, cells = derivative_probes(mesh, 2, rng)
    nc = mesh.n_cells
    errs = {"a_grad_in_N0": 0.0, "b_curl_in_RT0": 0.0, "c_div_in_S0": 0.0, "d_curl_grad": 0.0, "d_div_curl": 0.0}
    if d == 2:
        errs["b_rot_in_S0"] = 0.0

    def member(kind, coeffs, target) -> float:
        f = function_net(mesh, kind, coeffs, bases[kind])
        vals = np.asarray(evaluate(f.net, x)).reshape(len(x), -1)
        return float(np.abs(vals - target.reshape(len(x), -1)).max()), f

    def bump(key, err, scale):
        errs[key] = max(errs[key], err / (1.0 + scale))

    for _ in range(n_vectors):
        # (a) gradients of S1 functions
        u = function_net(mesh, SpaceKind.S1, rng.uniform(-1, 1, len(bases[SpaceKind.S1].dof_order)),
                         bases[SpaceKind.S1])
        grad = fd_jacobian(lambda p: evaluate(u.net, p), x, step)[:, 0, :]
        g_cell, dev = _cellwise_constant(grad, cells, nc)
        coeffs, spread = _project_to_dofs(mesh, SpaceKind.N0, g_cell)
        err, g_net = member(SpaceKind.N0, coeffs, grad)
        scale = float(np.abs(grad).max())
        bump("a_grad_in_N0", max(dev, spread, err), scale)
        # (d) curl of the gradient field, differentiated through its N0 net
        jac = fd_jacobian(lambda p: evaluate(g_net.net, p), x, step)
        bump("d_curl_grad", float(np.abs(curl_from_jacobian(jac)).max()), scale)

        # (b) curls of N0 functions
        w = function_net(mesh, SpaceKind.N0, rng.uniform(-1, 1, len(bases[SpaceKind.N0].dof_order)),
                         bases[SpaceKind.N0])
        curl = curl_from_jacobian(fd_jacobian(lambda p: evaluate(w.net, p), x, step))
        c_cell, dev = _cellwise_constant(curl, cells, nc)
        scale = float(np.abs(curl).max())
        if d == 3:
            coeffs, spread = _project_to_dofs(mesh, SpaceKind.RT0, c_cell)
            err, c_net = member(SpaceKind.RT0, coeffs, curl)
            bump("b_curl_in_RT0", max(dev, spread, err), scale)
        else:
            err, _ = member(SpaceKind.S0, cells_to_s0(mesh, c_cell[:, 0]), curl)
            bump("b_rot_in_S0", max(dev, err), scale)
            # planar vector curl of the S1 function: (d2 u, -d1 u)
            vcurl = np.stack([grad[:, 1], -grad[:, 0]], axis=1)
            v_cell, dev = _cellwise_constant(vcurl, cells, nc)
            coeffs, spread = _project_to_dofs(mesh, SpaceKind.RT0, v_cell)
            err, c_net = member(SpaceKind.RT0, coeffs, vcurl)
            scale = float(np.abs(vcurl).max())
            bump("b_curl_in_RT0", max(dev, spread, err), scale)
        jac = fd_jacobian(lambda p: evaluate(c_net.net, p), x, step)
        bump("d_div_curl", float(np.abs(np.trace(jac, axis1=1, axis2=2)).max()), scale)

        # (c) divergence of RT0 functions
        r = function_net(mesh, SpaceKind.RT0, rng.uniform(-1, 1, len(bases[SpaceKind.RT0].dof_order)),
                         bases[SpaceKind.RT0])
        div = np.trace(fd_jacobian(lambda p: evaluate(r.net, p), x, step), axis1=1, axis2=2)
        d_cell, dev = _cellwise_constant(div, cells, nc)
        err, _ = member(SpaceKind.S0, cells_to_s0(mesh, d_cell), div)
        bump("c_div_in_S0", max(dev, err), float(np.abs(div).max()))
    worst = max(errs.values())
    return _report("derham", "S1-N0-RT0-S0", mesh_name, worst, DERHAM_TOL, vectors=n_vectors,
                   **{k: v for k, v in errs.items()})


# sizes ------------------------------------------------------------------------

# Constants of the O(.) size bounds, measured once over the generated families
# (d = 2, 3, 4) and frozen; see audit_sizes.
SIZE_CONSTANTS = {
    "S1": 13, "RT0": 20, "CR0": 13, "N0": 120, "RT0_star": 27, "hat_convex": 8, "hat_general": 15,
    "basis_S0": 4, "basis_S1": 12, "basis_RT0": 20, "basis_CR0": 12, "basis_N0": 20, "basis_S1_ReLU_only": 15,
    "identity_pad": 4,
}

EXACT_DEPTH = {SpaceKind.S1: 5, SpaceKind.RT0: 5, SpaceKind.N0: 5, SpaceKind.CR0: 5, SpaceKind.S0: 3}


def _clog2(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def gadget_audit() -> list[dict]:
    """Exact sizes of the gadget networks."""
    rows = []
    for d in (1, 2, 3):
        m = metrics(calc.times_step_net(d, 1.5))
        rows.append(_entry(f"times_step_net({d}) L", m.depth, 2, exact=True))
        rows.append(_entry(f"times_step_net({d}) M", m.size, 12 * d, exact=True))
    for name, net in (("min_net(2)", calc.min_net(2)), ("max_net(2)", calc.max_net(2))):
        rows.append(_entry(f"{name} M", net.size, 7, exact=True))
        rows.append(_entry(f"{name} L", net.depth, 2, exact=True))
    for d, L in ((1, 2), (3, 4), (2, 1)):
        rows.append(_entry(f"identity_net({d},{L}) M", calc.identity_net(d, L).size, 2 * d * L))
    for dd in (2, 3):
        tri = calc.HalfspaceSystem([], [(np.eye(dd)[i], 0.0) for i in range(dd)] + [(-np.ones(dd), 1.0)])
        net = calc.indicator_net(tri)
        rows.append(_entry(f"indicator_net(d={dd}) L", net.depth, 3, exact=True))
        rows.append(_entry(f"indicator_net(d={dd}) M", net.size, (dd + 2) * (dd + 1) + 2))
    return rows


def _entry(item: str, measured: int, bound: int, exact: bool = False) -> dict:
    ok = measured == bound if exact else measured <= bound
    return {"item": item, "measured": int(measured), "bound": int(bound),
            "relation": "==" if exact else "<=", "slack": int(bound - measured), "ok": bool(ok)}


def audit_sizes(mesh: Mesh, kind, mesh_name: str = "", include_star: bool = True) -> Report:
    """Every exact depth and every size bound of the shape and basis nets of one space."""
    kind = SpaceKind(kind)
    d = mesh.dim
    C = SIZE_CONSTANTS
    rows = gadget_audit()
    basis = basis_net(mesh, kind)
    valences = []
    for sn in basis.shape_nets:
        s = len(adjacency(mesh, sn.dof))
        valences.append(s)
        L, M = sn.net.depth, sn.net.size
        tag = f"{kind.value} {sn.dof.vertex_ids}"
        if kind in EXACT_DEPTH:
            rows.append(_entry(f"{tag} L", L, EXACT_DEPTH[kind], exact=True))
        if kind == SpaceKind.S0:
            rows.append(_entry(f"{tag} M", M, (d + 2) * (d + 1) + 2))
        elif kind == SpaceKind.S1:
            rows.append(_entry(f"{tag} M", M, C["S1"] * s * d * d))
        elif kind in (SpaceKind.RT0, SpaceKind.CR0):
            rows.append(_entry(f"{tag} M", M, C[kind.value] * s * d * d))
        elif kind == SpaceKind.N0:
            rows.append(_entry(f"{tag} M", M, C["N0"] * s if d == 3 else C["RT0"] * s * d * d))
        elif kind == SpaceKind.S1_RELU:
            if _is_compact(mesh, sn):
                rows.append(_entry(f"{tag} L", L, 5 + _clog2(s)))
                rows.append(_entry(f"{tag} M", M, C["hat_convex"] * d * s))
            else:
                rows.append(_entry(f"{tag} L", L, 7 + _clog2(s) + _clog2(d + 1)))
                rows.append(_entry(f"{tag} M", M, C["hat_general"] * d * d * s))
    if kind == SpaceKind.RT0 and include_star:
        for f in basis.dof_order:
            net = shapes.rt0_star_net(mesh, f).net
            rows.append(_entry(f"RT0_star {f.vertex_ids} L", net.depth, 6, exact=True))
            rows.append(_entry(f"RT0_star {f.vertex_ids} M", net.size, C["RT0_star"] * d ** 3))
    total = sum(valences)
    bound = C[f"basis_{kind.value}"] * d * d * total
    if kind == SpaceKind.S1_RELU:
        # identity nets padding every hat to the common depth
        bound += C["identity_pad"] * len(valences) * _clog2(max(valences))
    rows.append(_entry(f"basis {kind.value} M", basis.net.size, bound))
    if kind in EXACT_DEPTH:
        rows.append(_entry(f"basis {kind.value} L", basis.net.depth, EXACT_DEPTH[kind], exact=True))
    else:
        smax = max(valences)
        rows.append(_entry(f"basis {kind.value} L", basis.net.depth, 8 + _clog2(smax) + _clog2(d + 1)))
    failures = [r for r in rows if not r["ok"]]
    return Report("audit", kind.value, mesh_name, float(len(failures)), 0.0, not failures,
                  {"entries": rows, "failures": failures})


def _is_compact(mesh: Mesh, sn) -> bool:
    p = sn.dof.vertex_ids[0]
    return p not in boundary_vertices(mesh) and patch_is_convex(mesh, p)


# domination ------------------------------------------------------------------


def check_domination(mesh: Mesh, per_pair: int = 50, seed: int | None = None, mesh_name: str = "") -> Report:
    """0 <= auxiliary hat <= hat at sampled points of the domain, for every vertex and patch cell."""
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    oracle = Oracle(mesh, SpaceKind.S1)
    worst = 0.0
    pairs = 0
    for p in range(mesh.n_vertices):
        aux = shapes.auxiliary_hats(mesh, p)
        patch = build_patch(mesh, p)
        for j, net in enumerate(aux):
            # half the samples in the patch, half anywhere in the domain, plus the patch vertices
            near = rng.choice(patch.cells, per_pair // 2)
            far = rng.integers(0, mesh.n_cells, per_pair - per_pair // 2)
            cells = np.concatenate([near, far])
            lam = rng.dirichlet(np.ones(mesh.dim + 1), size=len(cells))
            x = np.einsum("kv,kvd->kd", lam, mesh.vertices[mesh.cells[cells]])
            theta = oracle.basis_values(x, closed=True)[:, p]
            aux_vals = evaluate(net, x)[:, 0]
            below = np.maximum(0.0, -aux_vals).max()
            above = np.maximum(0.0, aux_vals - theta).max()
            worst = max(worst, below, above)
            pairs += 1
    return _report("domination", "S1_ReLU_only", mesh_name, worst, 1e-12, pairs=pairs)


# traces --------------------------------------------------------------------

TRACE_SOURCES = {
    # planar kind: (3D kind supplying coefficients, 3D quantity restricted to the face)
    SpaceKind.S1: (SpaceKind.S1, "value"),
    SpaceKind.S0: (SpaceKind.RT0, "normal"),
    SpaceKind.N0: (SpaceKind.N0, "tangential"),
    SpaceKind.RT0: (SpaceKind.N0, "cross_normal"),
}


def _restrict(vals: np.ndarray, normal: np.ndarray, how: str) -> np.ndarray:
    if how == "value":
        return vals
    if how == "normal":
        return vals @ normal
    if how == "tangential":
        return vals - np.outer(vals @ normal, normal)
    return np.cross(vals, normal)


def check_traces(mesh: Mesh, n_points: int = 20, seed: int | None = None, mesh_name: str = "") -> list[Report]:
    """Trace nets on every boundary chart against planar oracles and against the 3D oracle."""
    rng = np.random.default_rng(default_seed() if seed is None else seed)
    charts = face_charts(mesh)
    reports = []
    for kind, (kind3, how) in TRACE_SOURCES.items():
        oracle3 = Oracle(mesh, kind3)
        coeffs3 = rng.uniform(-1, 1, len(oracle3.dofs))
        err_planar = err_space = 0.0
        jump = 0.0
        for chart in charts:
            pm = chart.param_mesh
            c2 = trace_coefficients(mesh, chart, kind, coeffs3)
            f = trace_net(mesh, chart, kind, c2)
            cells = rng.integers(0, pm.n_cells, n_points)
            lam = rng.dirichlet(np.ones(3), size=n_points) * (1 - 3e-3) + 1e-3
            u = np.einsum("kv,kvd->kd", lam, pm.vertices[pm.cells[cells]])
            net_vals = np.asarray(evaluate(f.net, u))
            planar = Oracle(pm, kind)(c2, u)
            if kind.is_vector():
                planar = planar @ chart.jacobian.T
            ref = _restrict(oracle3(coeffs3, chart.to_space(u), closed=True), chart.normal, how)
            net_vals = net_vals.reshape(ref.shape) if ref.ndim > 1 else net_vals.reshape(-1)
            err_planar = max(err_planar, _relative_error(net_vals, planar.reshape(net_vals.shape)))
            err_space = max(err_space, _relative_error(net_vals, ref))
            if kind == SpaceKind.RT0:
                jumps = face_jumps(pm, lambda p: evaluate(f.net, p) @ chart.jacobian, "normal")
                if len(jumps):
                    jump = max(jump, float(jumps.max()))
        reports.append(_report("trace", kind, mesh_name, max(err_planar, err_space), EXACT_TOL,
                               charts=len(charts), planar_error=err_planar, space_error=err_space))
        if kind == SpaceKind.RT0:
            reports.append(_report("trace-normal-jump", kind, mesh_name, jump, JUMP_TOL, charts=len(charts)))
    return reports


def boundary_face_count(mesh: Mesh) -> int:
    return len(boundary_faces(mesh))


def patch_containment(mesh: Mesh, p: int) -> float:
    """Smallest barycentric coordinate of patch-cell vertices in their enlarged simplices (>= 0 means contained)."""
    patch = build_patch(mesh, p)
    worst = math.inf
    for j, c in enumerate(patch.cells):
        lam = barycentric(patch.enlarged_simplex(j), mesh.cell_points(c))
        worst = min(worst, float(lam.min()))
    return worst


def vertex_dof(p: int) -> SubsimplexIndex:
    return vertex(p)
