"""Direct finite element evaluation from barycentric coordinates.

Nothing here touches networks or the shape-net constructions; local bases are
the textbook closed forms (barycentric hats, Whitney edge forms, RT0 fields
c (x - a)).  Only mesh topology is shared.
"""
from __future__ import annotations

import math

import numpy as np

from ..mesh import Mesh, SubsimplexIndex

ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


class OracleDomainError(ValueError):
    pass


def barycentric(points: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of x (shape (n, d)) w.r.t. simplex ``points`` (d+1, d)."""
    d = points.shape[1]
    mat = np.vstack([points.T, np.ones(d + 1)])
    rhs = np.vstack([np.atleast_2d(x).T, np.ones(len(np.atleast_2d(x)))])
    return np.linalg.solve(mat, rhs).T


def bary_gradients(points: np.ndarray) -> np.ndarray:
    """Rows are the (constant) gradients of the barycentric coordinates."""
    d = points.shape[1]
    mat = np.vstack([points.T, np.ones(d + 1)])
    return np.linalg.inv(mat)[:, :d]


def _volume(points: np.ndarray) -> float:
    k = len(points) - 1
    e = points[1:] - points[0]
    return math.sqrt(max(np.linalg.det(e @ e.T), 0.0)) / math.factorial(k)


class Oracle:
    """Evaluates finite element functions of one (mesh, kind) pair."""

    def __init__(self, mesh: Mesh, kind: str):
        self.mesh = mesh
        self.kind = str(getattr(kind, "value", kind))
        dof_kind = {"S1": "vertex", "S1_ReLU_only": "vertex", "N0": "edge", "RT0": "face",
                    "S0": "cell", "CR0": "face"}[self.kind]
        self.dofs = mesh.subsimplices(dof_kind)
        self.index = {s.vertex_ids: i for i, s in enumerate(self.dofs)}
        self.dim = mesh.dim
        self.vector = self.kind in ("N0", "RT0")
        # which adjacent cell is "first" for each face (orientation), computed from raw cell lists
        self._face_cells: dict[tuple, list[int]] = {}
        for c, cell in enumerate(mesh.cells.tolist()):
            for k in range(len(cell)):
                key = tuple(cell[:k] + cell[k + 1:])
                self._face_cells.setdefault(key, []).append(c)

    # point location ------------------------------------------------------

    def locate(self, x: np.ndarray, closed: bool = False, tol: float = 1e-12):
        """Cell and barycentric coordinates of each point; raises on skeleton/outside points."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cells = np.full(len(x), -1)
        lam = np.zeros((len(x), self.dim + 1))
        for c, cell in enumerate(self.mesh.cells):
            l = barycentric(self.mesh.vertices[cell], x)
            inside = np.all(l >= -tol, axis=1) if closed else np.all(l > tol, axis=1)
            hit = inside & (cells < 0)
            cells[hit] = c
            lam[hit] = l[hit]
        if np.any(cells < 0):
            bad = x[cells < 0][0]
            raise OracleDomainError(f"point {bad.tolist()} is on the skeleton or outside the domain")
        return cells, lam

    # local bases ------------------------------------------------------------

    def local_basis(self, c: int, x: np.ndarray) -> list[tuple[int, np.ndarray]]:
        """(dof index, values at x) for the dofs supported on cell c; values (n,) or (n, d)."""
        cell = self.mesh.cells[c].tolist()
        pts = self.mesh.vertices[cell]
        x = np.atleast_2d(x)
        lam = barycentric(pts, x)
        grads = bary_gradients(pts)
        d = self.dim
        out = []
        if self.kind in ("S1", "S1_ReLU_only"):
            for k, v in enumerate(cell):
                out.append((self.index[(v,)], lam[:, k]))
        elif self.kind == "S0":
            out.append((self.index[tuple(cell)], np.ones(len(x))))
        elif self.kind == "CR0":
            for k in range(d + 1):
                face = tuple(cell[:k] + cell[k + 1:])
                out.append((self.index[face], 1.0 - d * lam[:, k]))
        elif self.kind == "RT0":
            vol = _volume(pts)
            for k in range(d + 1):
                face = tuple(cell[:k] + cell[k + 1:])
                sign = 1.0 if min(self._face_cells[face]) == c else -1.0
                area = _volume(np.delete(pts, k, axis=0))
                out.append((self.index[face], sign * area / (d * vol) * (x - pts[k])))
        elif self.kind == "N0":
            for a in range(d + 1):
                for b in range(a + 1, d + 1):
                    length = float(np.linalg.norm(pts[b] - pts[a]))
                    # Whitney form of the edge a -> b, scaled to unit tangential value
                    w = length * (lam[:, [a]] * grads[b] - lam[:, [b]] * grads[a])
                    edge = (cell[a], cell[b])
                    if d == 2:
                        w = w * self._planar_edge_sign(edge)
                    out.append((self.index[edge], w))
        return out

    def _planar_edge_sign(self, edge: tuple[int, int]) -> float:
        """Sign relating lower-to-higher vertex direction to the rotated face normal."""
        cells = sorted(self._face_cells[edge])
        c = cells[0]
        cell = self.mesh.cells[c].tolist()
        other = [v for v in cell if v not in edge][0]
        p, q = self.mesh.vertices[edge[0]], self.mesh.vertices[edge[1]]
        t = q - p
        n = ROT.T @ t  # rotate back by -90 degrees: candidate normal
        # the face normal points away from the opposite vertex of the lower-index cell
        if n @ (p - self.mesh.vertices[other]) < 0:
            n = -n
        return float(np.sign((ROT @ n) @ t))

    # evaluation -----------------------------------------------------------

    def basis_values(self, x, closed: bool = False) -> np.ndarray:
        """All basis functions at x: shape (n, #dofs) or (n, #dofs, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cells, _ = self.locate(x, closed=closed)
        shape = (len(x), len(self.dofs)) + ((self.dim,) if self.vector else ())
        out = np.zeros(shape)
        for c in np.unique(cells):
            rows = np.flatnonzero(cells == c)
            for i, vals in self.local_basis(int(c), x[rows]):
                out[rows, i] = vals
        return out

    def __call__(self, coeffs, x, closed: bool = False) -> np.ndarray:
        vals = self.basis_values(x, closed=closed)
        coeffs = np.asarray(coeffs, dtype=float)
        if self.vector:
            return np.einsum("nid,i->nd", vals, coeffs)
        return vals @ coeffs


def oracle_eval(mesh: Mesh, kind, coeffs, x, closed: bool = False) -> np.ndarray:
    """Finite element function with ``coeffs`` (in dof order) at points strictly inside cells.

    ``closed=True`` accepts points on cell boundaries and is only meaningful for
    continuous spaces (S1).
    """
    return Oracle(mesh, kind)(coeffs, x, closed=closed)


def dof_index(mesh: Mesh, kind: str) -> dict[tuple[int, ...], int]:
    return Oracle(mesh, kind).index


def subsimplex(kind: str, ids) -> SubsimplexIndex:
    return SubsimplexIndex(kind, tuple(sorted(ids)))
