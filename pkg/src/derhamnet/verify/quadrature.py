"""Fixed quadrature rules on simplices, returned in barycentric coordinates."""
from __future__ import annotations

import math
from functools import lru_cache
from itertools import product

import numpy as np
from scipy.special import roots_jacobi

# Dunavant's 6-point rule, exact for degree 4 on triangles
_DUNAVANT4 = (
    (0.223381589678011, 0.445948490915965, 0.108103018168070),
    (0.109951743655322, 0.091576213509771, 0.816847572980459),
)


def _dunavant4() -> tuple[np.ndarray, np.ndarray]:
    lam, w = [], []
    for weight, a, b in _DUNAVANT4:
        for k in range(3):
            row = [a, a, a]
            row[k] = b
            lam.append(row)
            w.append(weight)
    w = np.array(w)
    return np.array(lam), w / w.sum()


def _collapsed(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Jacobi rule mapped onto the reference simplex (exact to degree 2n - 1)."""
    rules = []
    for k in range(d):
        alpha = d - 1 - k
        t, w = roots_jacobi(n, alpha, 0.0)
        rules.append(((t + 1) / 2, w / 2 ** (alpha + 1)))
    lam, weights = [], []
    for idx in product(range(n), repeat=d):
        x, rest, wt = [], 1.0, 1.0
        for k, i in enumerate(idx):
            u, w = rules[k][0][i], rules[k][1][i]
            x.append(rest * u)
            rest *= 1 - u
            wt *= w
        lam.append([1.0 - sum(x)] + x)
        weights.append(wt)
    weights = np.array(weights) * math.factorial(d)  # normalize to unit total weight
    return np.array(lam), weights


@lru_cache(maxsize=None)
def simplex_rule(d: int, degree: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and weights summing to 1 (multiply by the cell volume)."""
    if d == 2 and degree <= 4:
        return _dunavant4()
    return _collapsed(d, max(1, math.ceil((degree + 1) / 2)))
