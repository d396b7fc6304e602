"""Simplicial meshes: topology, geometry, regularity checks and vertex patches."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

KINDS = ("vertex", "edge", "face", "cell")


class MeshError(ValueError):
    pass


class DegenerateCellError(MeshError):
    pass


@dataclass(frozen=True, order=True)
class SubsimplexIndex:
    kind: str
    vertex_ids: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown subsimplex kind {self.kind!r}")
        if tuple(sorted(self.vertex_ids)) != tuple(self.vertex_ids):
            raise ValueError("vertex_ids must be sorted ascending")
        if len(set(self.vertex_ids)) != len(self.vertex_ids):
            raise ValueError("vertex_ids must be distinct")

    def to_json(self) -> dict:
        return {"kind": self.kind, "vertex_ids": list(self.vertex_ids)}

    @classmethod
    def from_json(cls, obj) -> "SubsimplexIndex":
        return cls(obj["kind"], tuple(int(i) for i in obj["vertex_ids"]))


@dataclass(frozen=True)
class Mesh:
    """Vertex coordinates plus cells given as sorted (d+1)-tuples of vertex ids.

    Construction does not check regularity; call :func:`validate` for that.
    """

    dim: int
    vertices: np.ndarray
    cells: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        cells = np.asarray(self.cells, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != self.dim:
            raise MeshError(f"vertices must have shape (n, {self.dim}), got {verts.shape}")
        if cells.ndim != 2 or cells.shape[1] != self.dim + 1:
            raise MeshError(f"cells must have shape (m, {self.dim + 1}), got {cells.shape}")
        if cells.size and (cells.min() < 0 or cells.max() >= len(verts)):
            raise MeshError("cell references a vertex index out of range")
        cells = np.sort(cells, axis=1)
        verts.setflags(write=False)
        cells.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "cells", cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def cell_points(self, cell: int) -> np.ndarray:
        return self.vertices[self.cells[cell]]

    def cell_forms(self, cell: int) -> tuple[np.ndarray, np.ndarray]:
        """Cached barycentric forms (A, b) of a cell, rows in vertex-id order."""
        return self._forms[cell]

    @cached_property
    def _forms(self) -> list[tuple[np.ndarray, np.ndarray]]:
        forms = [barycentric_forms(self.vertices[c]) for c in self.cells]
        for A, b in forms:
            A.setflags(write=False)
            b.setflags(write=False)
        return forms

    # topology -----------------------------------------------------------

    @cached_property
    def _incidence(self) -> dict[int, dict[tuple[int, ...], list[int]]]:
        # k -> {sorted vertex tuple of size k: [cells]}
        out: dict[int, dict[tuple[int, ...], list[int]]] = {}
        for k in sorted({1, 2, self.dim}):
            table: dict[tuple[int, ...], list[int]] = {}
            for c, cell in enumerate(self.cells):
                for sub in combinations(cell.tolist(), k):
                    table.setdefault(sub, []).append(c)
            out[k] = dict(sorted(table.items()))
        return out

    def _size_of(self, kind: str) -> int:
        return {"vertex": 1, "edge": 2, "face": self.dim, "cell": self.dim + 1}[kind]

    def subsimplices(self, kind: str) -> list[SubsimplexIndex]:
        if kind == "cell":
            return sorted(SubsimplexIndex("cell", tuple(c)) for c in self.cells.tolist())
        if kind == "vertex":
            used = sorted(self._incidence[1])
            return [SubsimplexIndex("vertex", v) for v in used]
        return [SubsimplexIndex(kind, t) for t in self._incidence[self._size_of(kind)]]

    def cell_index(self, vertex_ids: Sequence[int]) -> int:
        return self._cell_lookup[tuple(sorted(vertex_ids))]

    @cached_property
    def _cell_lookup(self) -> dict[tuple[int, ...], int]:
        return {tuple(c): i for i, c in enumerate(self.cells.tolist())}

    def json(self) -> dict:
        return {
            "dim": self.dim,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Mesh":
        try:
            dim = int(obj["dim"])
            verts = np.array(obj["vertices"], dtype=float).reshape(-1, dim)
            cells = np.array(obj["cells"], dtype=np.int64).reshape(-1, dim + 1)
        except (KeyError, TypeError, ValueError) as exc:
            raise MeshError(f"malformed mesh JSON: {exc}") from exc
        return cls(dim, verts, cells)


def load_mesh(path: str | Path) -> Mesh:
    with open(path) as fh:
        return Mesh.from_json(json.load(fh))


def save_mesh(mesh: Mesh, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(mesh.json(), fh)


def faces(mesh: Mesh) -> list[SubsimplexIndex]:
    return mesh.subsimplices("face")


def edges(mesh: Mesh) -> list[SubsimplexIndex]:
    return mesh.subsimplices("edge")


def boundary_faces(mesh: Mesh) -> list[SubsimplexIndex]:
    table = mesh._incidence[mesh.dim]
    return [SubsimplexIndex("face", t) for t, cs in table.items() if len(cs) == 1]


def dofs(mesh: Mesh, kind: str) -> list[SubsimplexIndex]:
    return mesh.subsimplices(kind)


def adjacency(mesh: Mesh, s: SubsimplexIndex) -> list[int]:
    """Indices of the cells whose vertex set contains ``s``."""
    if s.kind == "cell":
        try:
            return [mesh.cell_index(s.vertex_ids)]
        except KeyError:
            raise MeshError(f"unknown subsimplex {s}") from None
    k = mesh._size_of(s.kind)
    if len(s.vertex_ids) != k:
        raise MeshError(f"{s.kind} must have {k} vertices, got {len(s.vertex_ids)}")
    cells = mesh._incidence[k].get(tuple(s.vertex_ids))
    if cells is None:
        raise MeshError(f"unknown subsimplex {s}")
    return list(cells)


def vertex(p: int) -> SubsimplexIndex:
    return SubsimplexIndex("vertex", (int(p),))


# geometry --------------------------------------------------------------


def simplex_volume(points: np.ndarray) -> float:
    """k-dimensional measure of the simplex spanned by ``points`` (k+1 rows)."""
    points = np.asarray(points, dtype=float)
    k = len(points) - 1
    if k == 0:
        return 1.0
    e = points[1:] - points[0]
    gram = e @ e.T
    det = np.linalg.det(gram)
    return math.sqrt(max(det, 0.0)) / math.factorial(k)


def barycentric_forms(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows (A_i, b_i) with A_i x + b_i the barycentric coordinate of vertex i.

    Solves ``(A_i, b_i) [points^T; 1] = e_i^T`` for all i at once.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    mat = np.vstack([points.T, np.ones(d + 1)])
    try:
        inv = np.linalg.inv(mat)
    except np.linalg.LinAlgError:
        raise DegenerateCellError("singular vertex matrix") from None
    if not np.all(np.isfinite(inv)) or np.linalg.cond(mat) > 1e14:
        raise DegenerateCellError("singular vertex matrix")
    return inv[:, :d].copy(), inv[:, d].copy()


def affine_from_values(points: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Affine map x -> A x + b taking ``values[i]`` at ``points[i]`` (d+1 points).

    ``values`` may be (d+1,) or (d+1, mu); returns A of shape (mu, d) and b of shape (mu,).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    scalar = values.ndim == 1
    vals = values.reshape(len(points), -1)
    d = points.shape[1]
    mat = np.vstack([points.T, np.ones(d + 1)])
    if np.linalg.cond(mat) > 1e14:
        raise DegenerateCellError("singular vertex matrix")
    # (A, b) mat = vals^T  <=>  mat^T (A, b)^T = vals
    sol = np.linalg.solve(mat.T, vals)
    A, b = sol[:d].T, sol[d]
    if scalar:
        return A.reshape(1, d), b.reshape(1)
    return A, b


@dataclass(frozen=True)
class CellGeometry:
    volume: float
    diameter: float
    inradius: float
    bary_A: np.ndarray
    bary_b: np.ndarray


def cell_geometry(mesh: Mesh, cell: int) -> CellGeometry:
    pts = mesh.cell_points(cell)
    d = mesh.dim
    if len(set(mesh.cells[cell].tolist())) != d + 1:
        raise DegenerateCellError(f"cell {cell} repeats a vertex")
    A, b = barycentric_forms(pts)
    vol = simplex_volume(pts)
    diam = max(float(np.linalg.norm(p - q)) for p, q in combinations(pts, 2))
    surface = sum(simplex_volume(np.delete(pts, i, axis=0)) for i in range(d + 1))
    inradius = d * vol / surface
    return CellGeometry(vol, diam, inradius, A, b)


def shape_regularity(mesh: Mesh) -> float:
    return max(g.diameter / g.inradius for g in map(lambda c: cell_geometry(mesh, c), range(mesh.n_cells)))


def mesh_size(mesh: Mesh) -> float:
    return max(cell_geometry(mesh, c).diameter for c in range(mesh.n_cells))


def opposite_vertex(mesh: Mesh, cell: int, sub: Sequence[int]) -> int:
    rest = [v for v in mesh.cells[cell].tolist() if v not in sub]
    if len(rest) != 1:
        raise MeshError("subsimplex is not a face of the cell")
    return rest[0]


def face_measure(mesh: Mesh, face: SubsimplexIndex) -> float:
    return simplex_volume(mesh.vertices[list(face.vertex_ids)])


def face_normal(mesh: Mesh, face: SubsimplexIndex) -> np.ndarray:
    """Unit normal pointing out of the lower-index adjacent cell."""
    cells = adjacency(mesh, face)
    c1 = min(cells)
    a1 = opposite_vertex(mesh, c1, face.vertex_ids)
    A, _ = barycentric_forms(mesh.cell_points(c1))
    local = mesh.cells[c1].tolist().index(a1)
    g = A[local]
    return -g / np.linalg.norm(g)


def edge_tangent(mesh: Mesh, edge: SubsimplexIndex) -> np.ndarray:
    i, j = edge.vertex_ids
    t = mesh.vertices[j] - mesh.vertices[i]
    return t / np.linalg.norm(t)


def face_tangent_frame(mesh: Mesh, face: SubsimplexIndex) -> np.ndarray:
    """Orthonormal rows t_1..t_{d-1} spanning the face, Gram-Schmidt in vertex-id order."""
    pts = mesh.vertices[list(face.vertex_ids)]
    frame: list[np.ndarray] = []
    for e in pts[1:] - pts[0]:
        v = e.astype(float).copy()
        for t in frame:
            v -= (v @ t) * t
        frame.append(v / np.linalg.norm(v))
    return np.array(frame).reshape(len(frame), mesh.dim)


# regularity ----------------------------------------------------------------


def _pair_is_regular(mesh: Mesh, c1: int, c2: int, forms: dict) -> bool:
    v1, v2 = mesh.cells[c1].tolist(), mesh.cells[c2].tolist()
    shared = set(v1) & set(v2)
    p1, p2 = mesh.vertices[v1], mesh.vertices[v2]
    tol = 1e-12
    # a facet hyperplane of either cell that separates them and touches only shared vertices
    for own_c, own_ids, other, other_ids in ((c1, v1, p2, v2), (c2, v2, p1, v1)):
        A, b = forms[own_c]
        lam = other @ A.T + b  # rows: other vertices, cols: facets of own cell
        for i in range(len(own_ids)):
            if own_ids[i] in shared:
                continue
            vals = lam[:, i]
            on = np.abs(vals) <= tol
            if np.all(vals <= tol):
                touching_other = {other_ids[k] for k in np.flatnonzero(on)}
                touching_own = set(own_ids) - {own_ids[i]}
                if touching_other <= shared and shared <= touching_own:
                    return True
    # general case: maximise the weight on non-shared vertices over the closure intersection
    d = mesh.dim
    n = d + 1
    c = np.concatenate([[-1.0 if v not in shared else 0.0 for v in v1],
                        [-1.0 if v not in shared else 0.0 for v in v2]])
    A_eq = np.zeros((d + 2, 2 * n))
    A_eq[:d, :n] = p1.T
    A_eq[:d, n:] = -p2.T
    A_eq[d, :n] = 1.0
    A_eq[d + 1, n:] = 1.0
    b_eq = np.zeros(d + 2)
    b_eq[d] = b_eq[d + 1] = 1.0
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status == 2:  # infeasible: closures are disjoint
        return not shared
    return res.status == 0 and -res.fun <= 1e-9


def validate(mesh: Mesh) -> list[str]:
    """Return human-readable violations; empty iff the mesh is a regular simplicial partition."""
    problems: list[str] = []
    d = mesh.dim
    good: list[int] = []
    for c, cell in enumerate(mesh.cells.tolist()):
        if len(set(cell)) != d + 1:
            problems.append(f"degenerate cell {c}: repeated vertex index in {cell}")
            continue
        pts = mesh.vertices[cell]
        diam = max(float(np.linalg.norm(p - q)) for p, q in combinations(pts, 2))
        if diam == 0.0 or simplex_volume(pts) <= 1e-13 * diam**d:
            problems.append(f"degenerate cell {c}: zero volume")
            continue
        good.append(c)
    if mesh.n_cells == 0:
        return problems
    seen: dict[tuple[int, ...], int] = {}
    for c in good:
        key = tuple(mesh.cells[c].tolist())
        if key in seen:
            problems.append(f"overlap between cells {seen[key]} and {c}: duplicate cell")
        seen[key] = c
    lo = np.array([mesh.vertices[mesh.cells[c]].min(axis=0) for c in range(mesh.n_cells)])
    hi = np.array([mesh.vertices[mesh.cells[c]].max(axis=0) for c in range(mesh.n_cells)])
    scale = float(np.max(hi - lo)) if len(lo) else 1.0
    eps = 1e-12 * max(scale, 1.0)
    forms = {c: barycentric_forms(mesh.cell_points(c)) for c in good}
    for a_i, a in enumerate(good):
        for b in good[a_i + 1:]:
            if np.any(lo[a] > hi[b] + eps) or np.any(lo[b] > hi[a] + eps):
                continue
            if tuple(mesh.cells[a]) == tuple(mesh.cells[b]):
                continue
            if not _pair_is_regular(mesh, a, b, forms):
                shared = sorted(set(mesh.cells[a].tolist()) & set(mesh.cells[b].tolist()))
                problems.append(
                    f"hanging node or overlap between cells {a} and {b}: closure intersection "
                    f"is not the hull of shared vertices {shared}"
                )
    return problems


def check(mesh: Mesh) -> Mesh:
    problems = validate(mesh)
    if problems:
        raise MeshError("; ".join(problems))
    return mesh


# patches ---------------------------------------------------------------


@dataclass(frozen=True)
class Patch:
    """Cells around vertex ``center`` with the star points and sub-simplices.

    ``sub_simplices[j, i]`` holds the vertex coordinates of the i-th sub-simplex
    of the enlarged simplex around cell ``cells[j]``; row 0 of each is ``center``
    and ``sub_simplices[j, 0]`` is the original cell.
    """

    center: int
    cells: list[int]
    star_points: np.ndarray
    sub_simplices: np.ndarray
    epsilon: float
    others: list[list[int]] = field(default_factory=list)

    def enlarged_simplex(self, j: int) -> np.ndarray:
        """Vertices (q_j, a_1, ..., a_d) of the enlarged simplex for cell j."""
        pts = self.sub_simplices[j, 0].copy()
        pts[0] = self.star_points[j]
        return pts


def _opposite_forms(mesh: Mesh, p: int, cells: list[int]) -> list[tuple[np.ndarray, float]]:
    """Affine forms that are 1 at p and vanish on the facet of each cell opposite p."""
    forms = []
    for c in cells:
        ids = mesh.cells[c].tolist()
        A, b = barycentric_forms(mesh.vertices[ids])
        k = ids.index(p)
        forms.append((A[k], float(b[k])))
    return forms


def build_patch(mesh: Mesh, p: int) -> Patch:
    if not 0 <= p < mesh.n_vertices:
        raise MeshError(f"{p} is not a vertex")
    cells = adjacency(mesh, vertex(p))
    pp = mesh.vertices[p]
    forms = _opposite_forms(mesh, p, cells)
    # distance from p to the hyperplane {g = 0} of a form with g(p) = 1 is 1/|grad g|
    eps = min(1.0 / float(np.linalg.norm(A)) for A, _ in forms)
    assert eps > 0.0
    d = mesh.dim
    stars = np.empty((len(cells), d))
    subs = np.empty((len(cells), d + 1, d + 1, d))
    others = []
    for j, c in enumerate(cells):
        rest = [v for v in mesh.cells[c].tolist() if v != p]
        others.append(rest)
        a = mesh.vertices[rest]
        direction = (pp - a).sum(axis=0)
        q = pp + 0.5 * eps * direction / np.linalg.norm(direction)
        for A, b in forms:
            if not A @ q + b > 0.0:
                raise AssertionError("star point left the star region")
        stars[j] = q
        base = np.vstack([pp, a])
        subs[j, 0] = base
        for i in range(1, d + 1):
            sub = base.copy()
            sub[i] = q
            subs[j, i] = sub
    return Patch(p, cells, stars, subs, eps, others)


def patch_is_convex(mesh: Mesh, p: int) -> bool:
    cells = adjacency(mesh, vertex(p))
    ids = sorted({v for c in cells for v in mesh.cells[c].tolist()})
    if mesh.dim == 1 or len(cells) == 1:
        return True
    total = sum(simplex_volume(mesh.cell_points(c)) for c in cells)
    hull = ConvexHull(mesh.vertices[ids]).volume
    return abs(hull - total) <= 1e-12 * total


def is_boundary_vertex(mesh: Mesh, p: int) -> bool:
    return any(p in f.vertex_ids for f in boundary_faces_cached(mesh))


def boundary_faces_cached(mesh: Mesh) -> list[SubsimplexIndex]:
    cache = mesh.__dict__.setdefault("_bfaces", None)
    if cache is None:
        cache = boundary_faces(mesh)
        mesh.__dict__["_bfaces"] = cache
    return cache


def boundary_vertices(mesh: Mesh) -> set[int]:
    return {v for f in boundary_faces_cached(mesh) for v in f.vertex_ids}


def locate(mesh: Mesh, x: np.ndarray, margin: float = 0.0) -> np.ndarray:
    """Cell index containing each point with all barycentric coordinates > margin, or -1."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.full(len(x), -1, dtype=np.int64)
    for c in range(mesh.n_cells):
        A, b = barycentric_forms(mesh.cell_points(c))
        lam = x @ A.T + b
        hit = np.all(lam > margin, axis=1) & (out < 0)
        out[hit] = c
    return out


def iter_cells(mesh: Mesh) -> Iterable[int]:
    return range(mesh.n_cells)
