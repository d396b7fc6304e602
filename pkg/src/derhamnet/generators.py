"""Structured meshes of the unit square, L-shape, unit cube, Fichera corner and friends."""
from __future__ import annotations

from itertools import permutations, product
from typing import Callable, Iterable

import numpy as np

from .mesh import Mesh


def _assemble(dim: int, int_cells: Iterable[tuple], scale: float, shift: float | np.ndarray = 0.0,
              denom: int = 1) -> Mesh:
    """Mesh from cells given by integer (or rational with common ``denom``) vertex coordinates."""
    cells = [tuple(tuple(v) for v in c) for c in int_cells]
    coords = sorted({v for c in cells for v in c})
    index = {v: i for i, v in enumerate(coords)}
    verts = np.array(coords, dtype=float).reshape(-1, dim) * (scale / denom) + shift
    return Mesh(dim, verts, np.array([sorted(index[v] for v in c) for c in cells], dtype=np.int64))


def kuhn_cells(corner: tuple[int, ...]) -> list[tuple[tuple[int, ...], ...]]:
    """The d! Kuhn simplices of the unit cube at integer ``corner``."""
    d = len(corner)
    out = []
    for perm in permutations(range(d)):
        v = list(corner)
        path = [tuple(v)]
        for axis in perm:
            v[axis] += 1
            path.append(tuple(v))
        out.append(tuple(path))
    return out


def cube_grid(corners: Iterable[tuple[int, ...]], dim: int, scale: float, shift=0.0) -> Mesh:
    cells = [c for corner in corners for c in kuhn_cells(tuple(corner))]
    return _assemble(dim, cells, scale, shift)


def square_crisscross(n: int) -> Mesh:
    """Unit square, n x n squares each cut into 4 triangles through its center."""
    cells = []
    for i, j in product(range(n), repeat=2):
        c = (4 * i + 2, 4 * j + 2)  # doubled-grid coordinates, centers at odd*2
        corners = [(4 * i, 4 * j), (4 * i + 4, 4 * j), (4 * i + 4, 4 * j + 4), (4 * i, 4 * j + 4)]
        for k in range(4):
            cells.append((corners[k], corners[(k + 1) % 4], c))
    return _assemble(2, cells, 1.0 / n, denom=4)


def square_diag(n: int) -> Mesh:
    """Unit square, n x n squares each cut along the (1, 1) diagonal."""
    return cube_grid(product(range(n), repeat=2), 2, 1.0 / n)


def lshape(n: int) -> Mesh:
    """(-1, 1)^2 minus [0, 1] x [-1, 0]; diagonals point away from the re-entrant corner."""
    cells = []
    for i, j in product(range(-n, n), repeat=2):
        if i >= 0 and j < 0:
            continue
        a, b, c, e = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
        if (i < 0) == (j < 0):  # first and third quadrant: diagonal a-c
            cells += [(a, b, c), (a, c, e)]
        else:  # second quadrant: diagonal b-e
            cells += [(a, b, e), (b, c, e)]
    return _assemble(2, cells, 1.0 / n)


def cube_kuhn(n: int) -> Mesh:
    """Unit cube, n^3 cubes with 6 Kuhn tetrahedra each."""
    return cube_grid(product(range(n), repeat=3), 3, 1.0 / n)


def fichera(n: int) -> Mesh:
    """(-1, 1)^3 minus the closed positive octant, Kuhn tetrahedra."""
    corners = [c for c in product(range(-n, n), repeat=3) if not all(k >= 0 for k in c)]
    return cube_grid(corners, 3, 1.0 / n)


def lshape_prism(n: int) -> Mesh:
    """L-shape times (0, 1), Kuhn tetrahedra; its boundary has 8 planar sides."""
    corners = [(i, j, k) for i, j in product(range(-n, n), repeat=2) if not (i >= 0 and j < 0)
               for k in range(n)]
    return cube_grid(corners, 3, 1.0 / n)


def hypercube(n: int, dim: int) -> Mesh:
    """Unit cube in ``dim`` dimensions with Kuhn simplices."""
    return cube_grid(product(range(n), repeat=dim), dim, 1.0 / n)


def interval(n: int) -> Mesh:
    return hypercube(n, 1)


DOMAINS: dict[str, Callable[[int], Mesh]] = {
    "square-crisscross": square_crisscross,
    "square-diag": square_diag,
    "lshape": lshape,
    "cube-kuhn": cube_kuhn,
    "fichera": fichera,
    "lshape-prism": lshape_prism,
}

DOMAIN_MEASURE = {
    "square-crisscross": 1.0,
    "square-diag": 1.0,
    "lshape": 3.0,
    "cube-kuhn": 1.0,
    "fichera": 7.0,
    "lshape-prism": 3.0,
}


def generate(domain: str, n: int, dim: int | None = None) -> Mesh:
    if n < 1:
        raise ValueError("n must be at least 1")
    if domain == "hypercube":
        return hypercube(n, dim or 4)
    try:
        return DOMAINS[domain](n)
    except KeyError:
        raise ValueError(f"unknown domain {domain!r}") from None
