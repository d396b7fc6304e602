"""Basis nets, function nets and boundary-trace nets for whole finite element spaces."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import calculus as calc
from .mesh import (
    Mesh,
    MeshError,
    SubsimplexIndex,
    adjacency,
    boundary_faces,
    boundary_vertices,
    face_normal,
)
from .network import Network, evaluate, layers_equal, network_json, network_from_json
from .shapes import ROTATION, ShapeNet, SpaceKind, n0_tangent_2d, shape_net


def dof_order(mesh: Mesh, kind: SpaceKind) -> list[SubsimplexIndex]:
    kind = SpaceKind(kind)
    return mesh.subsimplices(kind.dof_kind)


def value_dim(mesh: Mesh, kind: SpaceKind) -> int:
    return mesh.dim if SpaceKind(kind).is_vector() else 1


def check_supported(mesh: Mesh, kind: SpaceKind) -> None:
    kind = SpaceKind(kind)
    if kind == SpaceKind.N0 and mesh.dim not in (2, 3):
        raise MeshError(
            f"the Nedelec space N0 is excluded if d > 3 (and for d = 1); got d = {mesh.dim}"
        )
    if kind in (SpaceKind.RT0, SpaceKind.CR0) and mesh.dim < 2:
        raise MeshError(f"{kind.value} needs d >= 2")


@dataclass(frozen=True, eq=False)
class BasisNet:
    kind: SpaceKind
    mesh: Mesh
    net: Network
    dof_order: list[SubsimplexIndex]
    shape_nets: list[ShapeNet] = field(repr=False, default_factory=list)

    @property
    def value_dim(self) -> int:
        return value_dim(self.mesh, self.kind)

    def __call__(self, x) -> np.ndarray:
        """Values of all basis functions, shape (n, #dofs) or (n, #dofs, d) for vector kinds."""
        out = evaluate(self.net, np.atleast_2d(x))
        if self.value_dim > 1:
            return out.reshape(len(out), len(self.dof_order), self.value_dim)
        return out


def shape_nets(mesh: Mesh, kind: SpaceKind) -> list[ShapeNet]:
    kind = SpaceKind(kind)
    check_supported(mesh, kind)
    on_boundary = boundary_vertices(mesh) if kind == SpaceKind.S1_RELU else set()
    return [shape_net(mesh, kind, s, interior=s.vertex_ids[0] not in on_boundary if on_boundary else True)
            for s in dof_order(mesh, kind)]


def equalize_depths(nets: Sequence[Network]) -> list[Network]:
    """Pad each net with an identity net in front of its output so all share one depth."""
    top = max(n.depth for n in nets)
    out = []
    for n in nets:
        pad = calc.identity_net(n.output_dim, 1 + top - n.depth)
        out.append(calc.concat(pad, n))
    return out


def basis_net(mesh: Mesh, kind: SpaceKind) -> BasisNet:
    kind = SpaceKind(kind)
    shapes = shape_nets(mesh, kind)
    nets = [s.net for s in shapes]
    if kind == SpaceKind.S1_RELU:
        nets = equalize_depths(nets)
    net = calc.parallelize(nets)
    return BasisNet(kind, mesh, net, [s.dof for s in shapes], shapes)


@dataclass(frozen=True, eq=False)
class FunctionNet:
    kind: SpaceKind
    coefficients: np.ndarray
    net: Network
    basis: BasisNet = field(repr=False)

    @property
    def mesh(self) -> Mesh:
        return self.basis.mesh

    @property
    def dof_order(self) -> list[SubsimplexIndex]:
        return self.basis.dof_order

    def __call__(self, x) -> np.ndarray:
        out = evaluate(self.net, np.atleast_2d(x))
        return out[:, 0] if out.shape[1] == 1 else out


def specialize(basis: BasisNet, coeffs) -> FunctionNet:
    """Fold the coefficient vector into the output layer; hidden layers are shared untouched."""
    v = np.asarray(coeffs, dtype=float).ravel()
    if len(v) != len(basis.dof_order):
        raise ValueError(f"expected {len(basis.dof_order)} coefficients, got {len(v)}")
    k = basis.value_dim
    combine = sp.kron(sp.csr_matrix(v[None, :]), sp.identity(k), format="csr")
    last = basis.net.layers[-1]
    new_last = calc.Layer.from_sparse(combine @ last.matrix, combine @ last.bias, calc.ID)
    net = Network(basis.net.input_dim, basis.net.layers[:-1] + (new_last,))
    v = v.copy()
    v.setflags(write=False)
    return FunctionNet(basis.kind, v, net, basis)


def function_net(mesh: Mesh, kind: SpaceKind, coeffs, basis: BasisNet | None = None) -> FunctionNet:
    basis = basis if basis is not None else basis_net(mesh, kind)
    if basis.mesh is not mesh or basis.kind != SpaceKind(kind):
        raise ValueError("basis net belongs to a different mesh or space")
    return specialize(basis, coeffs)


def net_linear_combine(f1: FunctionNet, lam: float, f2: FunctionNet) -> FunctionNet:
    """Coefficient-space f1 + lam * f2; the hidden layers stay those of the shared basis net."""
    if f1.basis is not f2.basis and (f1.mesh is not f2.mesh or f1.kind != f2.kind
                                     or not layers_equal(f1.net.layers[:-1], f2.net.layers[:-1])):
        raise ValueError("function nets live on different meshes or spaces")
    return specialize(f1.basis, f1.coefficients + lam * f2.coefficients)


def dof_order_json(order: Sequence[SubsimplexIndex]) -> list:
    return [s.to_json() for s in order]


def basis_artifact(basis: BasisNet) -> dict:
    return {"kind": basis.kind.value, "dof_order": dof_order_json(basis.dof_order),
            "network": network_json(basis.net)}


def function_artifact(f: FunctionNet) -> dict:
    return {"kind": f.kind.value, "dof_order": dof_order_json(f.dof_order),
            "coefficients": [float(c).hex() for c in f.coefficients], "network": network_json(f.net)}


def load_artifact_network(obj: dict) -> Network:
    return network_from_json(obj["network"] if "network" in obj else obj)


def load_coefficients(text: str) -> np.ndarray:
    data = json.loads(text)
    if isinstance(data, dict):
        data = data["coefficients"]
    return np.array([float.fromhex(c) if isinstance(c, str) else float(c) for c in data])


# traces -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FaceChart:
    """Planar piece of the boundary with an orthonormal affine parametrization x = origin + J u."""

    face_id: int
    origin: np.ndarray
    frame: np.ndarray  # rows t1, t2 with t1 x t2 = outward normal
    normal: np.ndarray
    facets: list[SubsimplexIndex]
    vertex_ids: list[int]  # 3D vertex of each parameter-mesh vertex
    param_mesh: Mesh

    @property
    def jacobian(self) -> np.ndarray:
        return self.frame.T

    def to_space(self, u) -> np.ndarray:
        return self.origin + np.atleast_2d(u) @ self.frame

    def to_param(self, x) -> np.ndarray:
        return (np.atleast_2d(x) - self.origin) @ self.frame.T


def _outward_normal(mesh: Mesh, facet: SubsimplexIndex) -> np.ndarray:
    # boundary facets have a single cell; face_normal points out of the lower-index cell
    return face_normal(mesh, facet)


def face_charts(mesh: Mesh, tol: float = 1e-9) -> list[FaceChart]:
    if mesh.dim != 3:
        raise MeshError("face charts need d = 3")
    groups: list[tuple[np.ndarray, float, list[SubsimplexIndex]]] = []
    for f in boundary_faces(mesh):
        n = _outward_normal(mesh, f)
        off = float(n @ mesh.vertices[f.vertex_ids[0]])
        for gn, goff, members in groups:
            if np.all(np.abs(gn - n) <= tol) and abs(goff - off) <= tol:
                members.append(f)
                break
        else:
            groups.append((n, off, [f]))
    charts = []
    for k, (n, _, facets) in enumerate(groups):
        ids = sorted({v for f in facets for v in f.vertex_ids})
        origin = mesh.vertices[ids[0]]
        first = facets[0].vertex_ids
        t1 = mesh.vertices[first[1]] - mesh.vertices[first[0]]
        t1 = t1 - (t1 @ n) * n
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        frame = np.array([t1, t2])
        local = {v: i for i, v in enumerate(ids)}
        verts2 = (mesh.vertices[ids] - origin) @ frame.T
        cells2 = np.array([[local[v] for v in f.vertex_ids] for f in facets])
        charts.append(FaceChart(k, origin, frame, n, facets, ids, Mesh(2, verts2, cells2)))
    return charts


TRACE_KINDS = (SpaceKind.S1, SpaceKind.S1_RELU, SpaceKind.S0, SpaceKind.RT0, SpaceKind.N0)


def trace_net(mesh: Mesh, chart: FaceChart, kind: SpaceKind, coeffs, basis: BasisNet | None = None) -> FunctionNet:
    """Function net on the parameter domain of ``chart``.

    Scalar kinds give v o F directly. For RT0 and N0 the planar net is built
    for the given coefficients and its output layer is multiplied by the chart
    Jacobian, so the output is the tangential 3D field (det J = 1 here).
    """
    kind = SpaceKind(kind)
    if kind not in TRACE_KINDS:
        raise ValueError(f"no trace net for {kind.value}")
    if mesh.dim != 3 or chart.param_mesh.dim != 2:
        raise ValueError("trace nets need a 3D mesh and a planar chart")
    f2 = function_net(chart.param_mesh, kind, coeffs, basis)
    if not kind.is_vector():
        return f2
    net = calc.scale_output(f2.net, chart.jacobian)
    return FunctionNet(kind, f2.coefficients, net, f2.basis)


def trace_coefficients(mesh: Mesh, chart: FaceChart, kind: SpaceKind, coeffs3d) -> np.ndarray:
    """Coefficients on the chart triangulation of the trace of a 3D finite element function.

    S1 -> S1 (vertex values), N0 -> N0 (tangential trace), N0 -> RT0 (v x n),
    RT0 -> S0 (normal trace); ``kind`` names the planar space.  Orientation signs
    relate the planar dof orientation to the 3D one.
    """
    kind = SpaceKind(kind)
    c3 = np.asarray(coeffs3d, dtype=float)
    pm = chart.param_mesh
    ids = chart.vertex_ids
    if kind in (SpaceKind.S1, SpaceKind.S1_RELU):
        pos = {s.vertex_ids[0]: i for i, s in enumerate(dof_order(mesh, SpaceKind.S1))}
        return np.array([c3[pos[ids[s.vertex_ids[0]]]] for s in dof_order(pm, kind)])
    if kind == SpaceKind.S0:
        pos = {s.vertex_ids: i for i, s in enumerate(dof_order(mesh, SpaceKind.RT0))}
        return np.array([c3[pos[tuple(ids[v] for v in s.vertex_ids)]] for s in dof_order(pm, kind)])
    pos = {s.vertex_ids: i for i, s in enumerate(dof_order(mesh, SpaceKind.N0))}
    out = []
    for s in dof_order(pm, kind):
        i3, j3 = ids[s.vertex_ids[0]], ids[s.vertex_ids[1]]
        t3 = mesh.vertices[j3] - mesh.vertices[i3]  # 3D edge orientation, lower to higher id
        if kind == SpaceKind.N0:
            t2 = chart.jacobian @ n0_tangent_2d(pm, s)
            sign = np.sign(t2 @ t3)
        else:
            nu = chart.jacobian @ face_normal(pm, SubsimplexIndex("face", s.vertex_ids))
            sign = np.sign(np.cross(chart.normal, nu) @ t3)
        out.append(sign * c3[pos[(i3, j3)]])
    return np.array(out)
