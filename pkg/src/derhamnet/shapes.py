"""Networks realizing the shape functions of S0, RT0, N0, S1, CR0 and pure-ReLU hat functions."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import calculus as calc
from .calculus import HalfspaceSystem, Piece
from .mesh import (
    DegenerateCellError,
    Mesh,
    MeshError,
    SubsimplexIndex,
    adjacency,
    barycentric_forms,
    build_patch,
    cell_geometry,
    face_measure,
    face_normal,
    face_tangent_frame,
    opposite_vertex,
    patch_is_convex,
    vertex,
)
from .network import ID, RELU, Layer, Network, affine_net


class SpaceKind(str, Enum):
    S1 = "S1"
    S1_RELU = "S1_ReLU_only"
    N0 = "N0"
    RT0 = "RT0"
    S0 = "S0"
    CR0 = "CR0"

    @property
    def dof_kind(self) -> str:
        return {"S1": "vertex", "S1_ReLU_only": "vertex", "N0": "edge", "RT0": "face",
                "S0": "cell", "CR0": "face"}[self.value]

    def is_vector(self) -> bool:
        return self in (SpaceKind.N0, SpaceKind.RT0)


CLI_NAMES = {"s1": SpaceKind.S1, "s1-relu": SpaceKind.S1_RELU, "n0": SpaceKind.N0,
             "rt0": SpaceKind.RT0, "s0": SpaceKind.S0, "cr0": SpaceKind.CR0}


@dataclass(frozen=True)
class ShapeNet:
    net: Network
    dof: SubsimplexIndex
    kind: SpaceKind
    exactness: str  # "a.e." or "everywhere"


# rotation (v1, v2) -> (-v2, v1)
ROTATION = np.array([[0.0, -1.0], [1.0, 0.0]])


def _cell(mesh: Mesh, c: int):
    A, b = mesh.cell_forms(c)
    return mesh.cells[c].tolist(), A, b


def _open_cell(mesh: Mesh, c: int) -> HalfspaceSystem:
    _, A, b = _cell(mesh, c)
    return HalfspaceSystem.open_simplex(A, b)


def _check_face(mesh: Mesh, face: SubsimplexIndex) -> list[int]:
    if face.kind != "face":
        raise MeshError(f"expected a face, got {face.kind}")
    return sorted(adjacency(mesh, face))


# S0 --------------------------------------------------------------------


def s0_net(mesh: Mesh, cell: int) -> ShapeNet:
    ids, A, b = _cell(mesh, cell)
    d = mesh.dim
    net = calc.indicator_net(HalfspaceSystem.open_simplex(A, b))
    calc._assert(net.depth == 3 and net.size <= (d + 2) * (d + 1) + 2, "S0 net size bound")
    return ShapeNet(net, SubsimplexIndex("cell", tuple(ids)), SpaceKind.S0, "a.e.")


# RT0 -------------------------------------------------------------------


def rt0_local_fields(mesh: Mesh, face: SubsimplexIndex) -> list[tuple[int, float, np.ndarray]]:
    """Per adjacent cell: (cell, signed scale c, opposite vertex a) with field c (x - a)."""
    cells = _check_face(mesh, face)
    area = face_measure(mesh, face)
    d = mesh.dim
    out = []
    for i, c in enumerate(cells):
        vol = cell_geometry(mesh, c).volume
        a = mesh.vertices[opposite_vertex(mesh, c, face.vertex_ids)]
        sign = 1.0 if i == 0 else -1.0
        out.append((c, sign * area / (d * vol), a))
    return out


def rt0_pieces(mesh: Mesh, face: SubsimplexIndex) -> list[Piece]:
    d = mesh.dim
    pieces = []
    for c, scale, a in rt0_local_fields(mesh, face):
        pieces.append(Piece(scale * np.eye(d), -scale * a, _open_cell(mesh, c), mesh.cell_points(c)))
    return pieces


def rt0_net(mesh: Mesh, face: SubsimplexIndex) -> ShapeNet:
    net = calc.pwl_net(rt0_pieces(mesh, face))
    return ShapeNet(net, face, SpaceKind.RT0, "a.e.")


def _face_system(mesh: Mesh, face: SubsimplexIndex, cell: int) -> HalfspaceSystem:
    """Relative interior of ``face``: opposite barycentric form = 0, the others > 0."""
    ids, A, b = _cell(mesh, cell)
    k = ids.index(opposite_vertex(mesh, cell, face.vertex_ids))
    others = [i for i in range(len(ids)) if i != k]
    return HalfspaceSystem([(A[k], b[k])], [(A[i], b[i]) for i in others])


def rt0_normal_net(mesh: Mesh, face: SubsimplexIndex) -> ShapeNet:
    """Normal component, exact a.e. and on the relative interior of the face.

    On each adjacent cell the normal component is 1 minus the barycentric
    coordinate of the opposite vertex; the minimum of these forms picks the
    right one on either side and both agree on the face.
    """
    cells = _check_face(mesh, face)
    rows, bias = [], []
    for c in cells:
        ids, A, b = _cell(mesh, c)
        k = ids.index(opposite_vertex(mesh, c, face.vertex_ids))
        rows.append(-A[k])
        bias.append(1.0 - b[k])
    normal = calc.concat(calc.min_net(len(cells)), affine_net(np.array(rows), np.array(bias)))
    indicators = [calc.indicator_net(_open_cell(mesh, c)) for c in cells]
    indicators.append(calc.indicator_net(_face_system(mesh, face, cells[0])))
    support = calc.net_sum(indicators)
    inner = calc.parallelize([normal, support])
    net = calc.concat(calc.times_step_net(1, 1.0), inner)
    calc._assert(net.depth == 5, "normal-component net depth is 5")
    return ShapeNet(net, face, SpaceKind.RT0, "a.e.")


def rt0_tangential_net(mesh: Mesh, face: SubsimplexIndex, j: int) -> ShapeNet:
    """Component along the j-th face tangent (1-based), exact a.e."""
    d = mesh.dim
    if not 1 <= j <= d - 1:
        raise ValueError(f"tangent index {j} out of range 1..{d - 1}")
    t = face_tangent_frame(mesh, face)[j - 1]
    pieces = []
    for c, scale, a in rt0_local_fields(mesh, face):
        pieces.append(Piece(scale * t[None, :], [-scale * (a @ t)], _open_cell(mesh, c), mesh.cell_points(c)))
    return ShapeNet(calc.pwl_net(pieces), face, SpaceKind.RT0, "a.e.")


def rt0_star_net(mesh: Mesh, face: SubsimplexIndex) -> ShapeNet:
    """RT0 shape function recombined from its normal and tangential components; depth 6."""
    d = mesh.dim
    n = face_normal(mesh, face)
    terms = [calc.concat(affine_net(n[:, None], np.zeros(d)), rt0_normal_net(mesh, face).net)]
    for j, t in enumerate(face_tangent_frame(mesh, face), start=1):
        terms.append(calc.concat(affine_net(t[:, None], np.zeros(d)), rt0_tangential_net(mesh, face, j).net))
    net = calc.net_sum(terms)
    calc._assert(net.depth == 6, "recombined RT0 net depth is 6")
    return ShapeNet(net, face, SpaceKind.RT0, "a.e.")


# N0 --------------------------------------------------------------------


def cross_matrix(t: np.ndarray) -> np.ndarray:
    """Matrix K with K x = t x x."""
    return np.array([[0.0, -t[2], t[1]], [t[2], 0.0, -t[0]], [-t[1], t[0], 0.0]])


def n0_local_fields(mesh: Mesh, edge: SubsimplexIndex) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """Per adjacent tetrahedron: (cell, A, b) with field A x + b."""
    if mesh.dim != 3:
        raise MeshError("edge elements via cross products need d = 3")
    if edge.kind != "edge":
        raise MeshError(f"expected an edge, got {edge.kind}")
    cells = sorted(adjacency(mesh, edge))
    i, j = edge.vertex_ids
    pi, pj = mesh.vertices[i], mesh.vertices[j]
    t_e = (pj - pi) / np.linalg.norm(pj - pi)
    m_e = 0.5 * (pi + pj)
    out = []
    for c in cells:
        rest = [v for v in mesh.cells[c].tolist() if v not in edge.vertex_ids]
        qa, qb = mesh.vertices[rest]
        t_far = (qb - qa) / np.linalg.norm(qb - qa)
        m_far = 0.5 * (qa + qb)
        den = t_e @ np.cross(m_e - m_far, t_far)
        scale = float(np.max(np.abs(mesh.cell_points(c))))
        if abs(den) < 1e-14 * max(scale, 1.0):
            raise DegenerateCellError(f"cell {c}: degenerate triple product for edge {edge.vertex_ids}")
        if den < 0:
            t_far, den = -t_far, -den
        A = -cross_matrix(t_far) / den
        b = -np.cross(m_far, t_far) / den
        out.append((c, A, b))
    return out


def n0_net(mesh: Mesh, edge: SubsimplexIndex) -> ShapeNet:
    pieces = [Piece(A, b, _open_cell(mesh, c), mesh.cell_points(c)) for c, A, b in n0_local_fields(mesh, edge)]
    return ShapeNet(calc.pwl_net(pieces), edge, SpaceKind.N0, "a.e.")


def n0_net_2d(mesh: Mesh, face: SubsimplexIndex) -> ShapeNet:
    """Planar edge element: the RT0 shape function of the same edge rotated by 90 degrees."""
    if mesh.dim != 2:
        raise MeshError("rotated RT0 construction needs d = 2")
    rt = rt0_net(mesh, SubsimplexIndex("face", face.vertex_ids))
    net = calc.scale_output(rt.net, ROTATION)
    return ShapeNet(net, SubsimplexIndex("edge", face.vertex_ids), SpaceKind.N0, "a.e.")


def n0_tangent_2d(mesh: Mesh, edge: SubsimplexIndex) -> np.ndarray:
    """Tangent attached to a planar edge dof: the rotated face normal."""
    return ROTATION @ face_normal(mesh, SubsimplexIndex("face", edge.vertex_ids))


# S1 / CR0 ------------------------------------------------------------------


def s1_net_bisu(mesh: Mesh, p: int) -> ShapeNet:
    pieces = []
    for c in adjacency(mesh, vertex(p)):
        ids, A, b = _cell(mesh, c)
        k = ids.index(p)
        pieces.append(Piece(A[k][None, :], [b[k]], HalfspaceSystem.open_simplex(A, b), mesh.cell_points(c)))
    return ShapeNet(calc.pwl_net(pieces), vertex(p), SpaceKind.S1, "a.e.")


def cr0_net(mesh: Mesh, face: SubsimplexIndex) -> ShapeNet:
    d = mesh.dim
    pieces = []
    for c in _check_face(mesh, face):
        ids, A, b = _cell(mesh, c)
        k = ids.index(opposite_vertex(mesh, c, face.vertex_ids))
        pieces.append(Piece(-d * A[k][None, :], [1.0 - d * b[k]], HalfspaceSystem.open_simplex(A, b),
                            mesh.cell_points(c)))
    kappa = calc.required_kappa(pieces)
    calc._assert(kappa <= max(d - 1, 1) * (1 + 1e-12), "CR0 pieces are bounded by d - 1")
    return ShapeNet(calc.pwl_net(pieces, kappa=max(d - 1, 1)), face, SpaceKind.CR0, "a.e.")


# pure-ReLU hat functions ----------------------------------------------------


def _relu_of_min(rows: np.ndarray, bias: np.ndarray) -> Network:
    """max(0, min_i (rows_i x + bias_i)) as a pure-ReLU net."""
    relu_out = Network(1, (Layer.from_sparse(np.ones((1, 1)), [0.0], RELU),
                           Layer.from_sparse(np.ones((1, 1)), [0.0], ID)))
    inner = calc.concat(calc.min_net(len(rows)), affine_net(rows, bias))
    return calc.concat(relu_out, inner)


def cpwl_net_convex(mesh: Mesh, p: int) -> ShapeNet:
    """Hat function of ``p`` as max(0, min of its cellwise affine pieces); needs a convex patch."""
    if not patch_is_convex(mesh, p):
        raise MeshError(f"patch of vertex {p} is not convex")
    rows, bias = [], []
    for c in adjacency(mesh, vertex(p)):
        ids, A, b = _cell(mesh, c)
        k = ids.index(p)
        rows.append(A[k])
        bias.append(b[k])
    net = _relu_of_min(np.array(rows), np.array(bias))
    s = len(rows)
    calc._assert(net.depth <= 5 + int(np.ceil(np.log2(s))), "convex-patch hat depth bound")
    return ShapeNet(net, vertex(p), SpaceKind.S1_RELU, "everywhere")


def auxiliary_hats(mesh: Mesh, p: int) -> list[Network]:
    """Hat of ``p`` on each enlarged simplex of the patch subdivision, as pure-ReLU nets."""
    patch = build_patch(mesh, p)
    nets = []
    for j in range(len(patch.cells)):
        rows, bias = [], []
        for sub in patch.sub_simplices[j]:
            A, b = barycentric_forms(sub)
            rows.append(A[0])  # row 0 of every sub-simplex is p
            bias.append(b[0])
        nets.append(_relu_of_min(np.array(rows), np.array(bias)))
    return nets


def cpwl_net(mesh: Mesh, p: int) -> ShapeNet:
    """Hat function of ``p`` on any patch: maximum of the auxiliary hats."""
    aux = auxiliary_hats(mesh, p)
    s, d = len(aux), mesh.dim
    net = calc.concat(calc.max_net(s), calc.parallelize(aux))
    bound = 7 + int(np.ceil(np.log2(s))) + int(np.ceil(np.log2(d + 1)))
    calc._assert(net.depth <= bound, "general hat depth bound")
    return ShapeNet(net, vertex(p), SpaceKind.S1_RELU, "everywhere")


def hat_net(mesh: Mesh, p: int, interior: bool) -> ShapeNet:
    """Pure-ReLU hat: the compact convex-patch net where it is valid, the general one otherwise."""
    if interior and patch_is_convex(mesh, p):
        return cpwl_net_convex(mesh, p)
    return cpwl_net(mesh, p)


def shape_net(mesh: Mesh, kind: SpaceKind, dof: SubsimplexIndex, interior: bool = True) -> ShapeNet:
    kind = SpaceKind(kind)
    if kind == SpaceKind.S0:
        return s0_net(mesh, mesh.cell_index(dof.vertex_ids))
    if kind == SpaceKind.S1:
        return s1_net_bisu(mesh, dof.vertex_ids[0])
    if kind == SpaceKind.S1_RELU:
        return hat_net(mesh, dof.vertex_ids[0], interior)
    if kind == SpaceKind.RT0:
        return rt0_net(mesh, dof)
    if kind == SpaceKind.CR0:
        return cr0_net(mesh, dof)
    if kind == SpaceKind.N0:
        if mesh.dim == 3:
            return n0_net(mesh, dof)
        if mesh.dim == 2:
            return n0_net_2d(mesh, SubsimplexIndex("face", dof.vertex_ids))
        raise MeshError(f"Nedelec space is only available for d in {{2, 3}}, got d = {mesh.dim}")
    raise ValueError(f"unknown kind {kind}")
