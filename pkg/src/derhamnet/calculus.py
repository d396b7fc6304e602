"""Network combinators and gadget networks (identity, min/max, times-step, indicator, PwL)."""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .network import BISU, ID, RELU, Layer, Network, NetworkError, metrics


class SizeBoundError(AssertionError):
    pass


def _assert(cond: bool, msg: str) -> None:
    if not cond:
        raise SizeBoundError(msg)


# combinators -----------------------------------------------------------------


def parallelize(nets: Sequence[Network]) -> Network:
    """Network computing x -> (net_1(x), ..., net_k(x)); sizes add exactly."""
    nets = list(nets)
    if not nets:
        raise NetworkError("nothing to parallelize")
    d, L = nets[0].input_dim, nets[0].depth
    for n in nets:
        if n.input_dim != d or n.depth != L:
            raise NetworkError("parallelization needs equal input dimension and depth")
    layers = [_stacked_layer(nets, k) for k in range(L)]
    out = Network(d, tuple(layers))
    _assert(out.size == sum(n.size for n in nets), "parallelization must add sizes exactly")
    return out


def net_sum(nets: Sequence[Network]) -> Network:
    """Network realizing the pointwise sum of equally shaped networks."""
    nets = list(nets)
    if not nets:
        raise NetworkError("nothing to sum")
    d, L, m = nets[0].input_dim, nets[0].depth, nets[0].output_dim
    for n in nets:
        if (n.input_dim, n.depth, n.output_dim) != (d, L, m):
            raise NetworkError("sum needs equal input dimension, output dimension and depth")
    if L == 1:
        mat = sum((n.layers[0].matrix for n in nets), start=sp.csr_matrix((m, d)))
        out = Network(d, (Layer.from_sparse(mat, sum(n.layers[0].bias for n in nets), ID),))
    else:
        hidden = tuple(_stacked_layer(nets, k) for k in range(L - 1))
        lasts = [n.layers[-1] for n in nets]
        offs = np.cumsum([0] + [lay.cols for lay in lasts])
        last = Layer.from_triplets(
            m, int(offs[-1]),
            np.concatenate([lay.row_idx for lay in lasts]),
            np.concatenate([lay.col_idx + o for lay, o in zip(lasts, offs)]),
            np.concatenate([lay.values for lay in lasts]),
            sum(lay.bias for lay in lasts),
            ID,
        )
        out = Network(d, hidden + (last,))
    _assert(out.size <= sum(n.size for n in nets), "sum must not exceed total size")
    return out


def _stacked_layer(nets: Sequence[Network], k: int) -> Layer:
    # first layers share the input and are stacked; later layers act blockwise
    lays = [n.layers[k] for n in nets]
    row_off = np.cumsum([0] + [lay.rows for lay in lays])
    col_off = np.cumsum([0] + [lay.cols for lay in lays]) if k > 0 else np.zeros(len(lays) + 1, dtype=np.int64)
    cols = lays[0].cols if k == 0 else int(col_off[-1])
    return Layer.from_triplets(
        int(row_off[-1]), cols,
        np.concatenate([lay.row_idx + o for lay, o in zip(lays, row_off)]),
        np.concatenate([lay.col_idx + o for lay, o in zip(lays, col_off)]),
        np.concatenate([lay.values for lay in lays]),
        np.concatenate([lay.bias for lay in lays]),
        tuple(a for lay in lays for a in lay.acts),
        ordered=True,
    )


def concat(outer: Network, inner: Network) -> Network:
    """Sparse concatenation: realizes outer(inner(x)) with depth L1 + L2."""
    if inner.output_dim != outer.input_dim:
        raise NetworkError(f"cannot feed {inner.output_dim} outputs into {outer.input_dim} inputs")
    last = inner.layers[-1]
    first = outer.layers[0]
    split = Layer.from_triplets(
        2 * last.rows, last.cols,
        np.concatenate([last.row_idx, last.row_idx + last.rows]),
        np.concatenate([last.col_idx, last.col_idx]),
        np.concatenate([last.values, -last.values]),
        np.concatenate([last.bias, -last.bias]), RELU, ordered=True)
    joined = Layer.from_triplets(
        first.rows, 2 * first.cols,
        np.concatenate([first.row_idx, first.row_idx]),
        np.concatenate([first.col_idx, first.col_idx + first.cols]),
        np.concatenate([first.values, -first.values]),
        first.bias, first.acts)
    out = Network(inner.input_dim, inner.layers[:-1] + (split, joined) + outer.layers[1:])
    _assert(out.depth == outer.depth + inner.depth, "concatenation depth is L1 + L2")
    _assert(out.size <= 2 * outer.size + 2 * inner.size, "concatenation size is at most 2 M1 + 2 M2")
    return out


@lru_cache(maxsize=256)
def identity_net(d: int, L: int) -> Network:
    """ReLU network realizing the identity on R^d with depth L via x = relu(x) - relu(-x)."""
    if d < 1 or L < 1:
        raise NetworkError("identity net needs d, L >= 1")
    eye = sp.identity(d, format="csr")
    if L == 1:
        return Network(d, (Layer.from_sparse(eye, np.zeros(d), ID),))
    layers = [Layer.from_sparse(sp.vstack([eye, -eye]), np.zeros(2 * d), RELU)]
    for _ in range(L - 2):
        layers.append(Layer.from_sparse(sp.identity(2 * d), np.zeros(2 * d), RELU))
    layers.append(Layer.from_sparse(sp.hstack([eye, -eye]), np.zeros(d), ID))
    out = Network(d, tuple(layers))
    _assert(out.size <= 2 * d * L, "identity net size is at most 2 d L")
    return out


def affine_layer_net(A, b) -> Network:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return Network(A.shape[1], (Layer.from_sparse(A, np.asarray(b, dtype=float).reshape(-1), ID),))


def scale_output(net: Network, matrix, bias=None) -> Network:
    """Post-compose the realization with an affine map by rewriting the last layer."""
    last = net.layers[-1]
    matrix = sp.csr_matrix(np.atleast_2d(np.asarray(matrix, dtype=float)))
    new_bias = matrix @ last.bias
    if bias is not None:
        new_bias = new_bias + np.asarray(bias, dtype=float)
    new_last = Layer.from_sparse(matrix @ last.matrix, new_bias, ID)
    return Network(net.input_dim, net.layers[:-1] + (new_last,))


def prepend_affine(net: Network, A, b) -> Network:
    """Pre-compose the realization with x -> A x + b by rewriting the first layer."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    first = net.layers[0]
    new_first = Layer.from_sparse(first.matrix @ sp.csr_matrix(A), first.matrix @ b + first.bias, first.acts)
    return Network(A.shape[1], (new_first,) + net.layers[1:])


# min / max -----------------------------------------------------------------


@lru_cache(maxsize=256)
def _reduce_net(d: int, mode: str) -> Network:
    """Binary reduction tree of 2-input max (or min) gadgets.

    Every tree level is one ReLU layer; each value is tracked as an affine
    expression of the previous layer's neurons so that the recombination of a
    level is folded into the next level's pre-activations.
    """
    if d < 1:
        raise NetworkError("fan-in must be at least 1")
    if d == 1:
        return identity_net(1, 2)
    sign = 1.0 if mode == "max" else -1.0
    # current values as (sparse row over previous neurons, bias)
    width = d
    values = [(sp.csr_matrix(([1.0], ([0], [i])), shape=(1, d)), 0.0) for i in range(d)]
    layers = []
    while len(values) > 1:
        rows, biases, new_values = [], [], []
        for k in range(0, len(values) - 1, 2):
            (ra, ba), (rb, bb) = values[k], values[k + 1]
            base = len(rows)
            # max(a, b) = relu(a - b) + relu(b) - relu(-b); min(a, b) = -relu(b - a) + relu(b) - relu(-b)
            rows += [sign * (ra - rb), rb, -rb]
            biases += [sign * (ba - bb), bb, -bb]
            new_values.append((base, np.array([sign, 1.0, -1.0])))
        if len(values) % 2:
            ra, ba = values[-1]
            base = len(rows)
            rows += [ra, -ra]
            biases += [ba, -ba]
            new_values.append((base, np.array([1.0, -1.0])))
        layers.append(Layer.from_sparse(sp.vstack(rows), np.array(biases), RELU))
        width = len(rows)
        values = []
        for base, coef in new_values:
            idx = np.arange(base, base + len(coef))
            values.append((sp.csr_matrix((coef, (np.zeros(len(coef), dtype=int), idx)), shape=(1, width)), 0.0))
    row, bias = values[0]
    layers.append(Layer.from_sparse(row, [bias], ID))
    return Network(d, tuple(layers))


def max_net(d: int) -> Network:
    net = _reduce_net(d, "max")
    _assert(net.depth <= 2 + math.ceil(math.log2(d)), "max net depth bound")
    _assert(net.size <= MINMAX_SIZE_PER_INPUT * d, "max net size bound")
    return net


def min_net(d: int) -> Network:
    net = _reduce_net(d, "min")
    _assert(net.depth <= 2 + math.ceil(math.log2(d)), "min net depth bound")
    _assert(net.size <= MINMAX_SIZE_PER_INPUT * d, "min net size bound")
    return net


# measured once over d = 1..64 (largest M/d is 142/17) and frozen as the O(d) bound
MINMAX_SIZE_PER_INPUT = 9


# times-step ----------------------------------------------------------------


def times_step_net(d: int, kappa: float) -> Network:
    """Realizes (x, y) -> x * y for x in [-kappa, kappa]^d and y in {0, 1}; input is (x_1..x_d, y).

    Each component uses kappa/2 (relu(t + y) + relu(-t - y) - relu(t - y) - relu(-t + y)) with t = x_k / kappa.
    """
    if not kappa > 0:
        raise NetworkError("kappa must be positive")
    s = 1.0 / kappa
    r, c, v = [], [], []
    pattern = ((s, 1.0), (-s, -1.0), (s, -1.0), (-s, 1.0))
    for k in range(d):
        for j, (wx, wy) in enumerate(pattern):
            r += [4 * k + j, 4 * k + j]
            c += [k, d]
            v += [wx, wy]
    first = Layer.from_sparse(sp.coo_matrix((v, (r, c)), shape=(4 * d, d + 1)), np.zeros(4 * d), RELU)
    half = kappa / 2.0
    r2 = np.repeat(np.arange(d), 4)
    c2 = np.arange(4 * d)
    v2 = np.tile([half, half, -half, -half], d)
    second = Layer.from_sparse(sp.coo_matrix((v2, (r2, c2)), shape=(d, 4 * d)), np.zeros(d), ID)
    net = Network(d + 1, (first, second))
    _assert(net.depth == 2 and net.size == 12 * d, "times-step net has L = 2 and M = 12 d")
    return net


# indicator ---------------------------------------------------------------


@dataclass
class HalfspaceSystem:
    """Region {A_i x + b_i = 0 for equalities} intersected with {A_i x + b_i > 0 for strict inequalities}."""

    equalities: list[tuple[np.ndarray, float]] = field(default_factory=list)
    strict_inequalities: list[tuple[np.ndarray, float]] = field(default_factory=list)

    def __post_init__(self):
        if not self.equalities and not self.strict_inequalities:
            raise NetworkError("half-space system needs at least one condition")
        self.equalities = [(np.asarray(a, dtype=float).ravel(), float(b)) for a, b in self.equalities]
        self.strict_inequalities = [(np.asarray(a, dtype=float).ravel(), float(b)) for a, b in self.strict_inequalities]

    @property
    def dim(self) -> int:
        return len((self.equalities or self.strict_inequalities)[0][0])

    @property
    def n_eq(self) -> int:
        return len(self.equalities)

    @property
    def n_total(self) -> int:
        return len(self.equalities) + len(self.strict_inequalities)

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ok = np.ones(len(x), dtype=bool)
        for a, b in self.equalities:
            ok &= x @ a + b == 0.0
        for a, b in self.strict_inequalities:
            ok &= x @ a + b > 0.0
        return ok

    @classmethod
    def open_simplex(cls, A: np.ndarray, b: np.ndarray) -> "HalfspaceSystem":
        """Open simplex from its barycentric forms (rows of A, entries of b)."""
        return cls([], list(zip(A, b)))


def indicator_net(system: HalfspaceSystem) -> Network:
    """Three-layer BiSU network realizing the indicator of ``system`` on all of R^d."""
    d, n, N = system.dim, system.n_eq, system.n_total
    rows, bias = [], []
    for a, b in system.equalities:
        rows += [a, -a]
        bias += [b, -b]
    for a, b in system.strict_inequalities:
        rows.append(a)
        bias.append(b)
    first = Layer.from_sparse(np.array(rows), np.array(bias), BISU)
    weights = np.concatenate([-np.ones(2 * n), np.ones(N - n)]).reshape(1, -1)
    second = Layer.from_sparse(weights, [-(N - n - 0.25)], BISU)
    third = Layer.from_sparse(np.ones((1, 1)), [0.0], ID)
    net = Network(d, (first, second, third))
    _assert(net.depth == 3, "indicator net depth is 3")
    _assert(net.size <= (d + 2) * (N + n) + 2, "indicator net size bound")
    return net


# piecewise linear ----------------------------------------------------------------


@dataclass
class Piece:
    """Affine map x -> A x + b on a region; ``vertices`` span the region's closure (used for kappa)."""

    A: np.ndarray
    b: np.ndarray
    region: HalfspaceSystem
    vertices: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.A.shape[0] != len(self.b):
            raise NetworkError("piece A and b disagree in output dimension")

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.vertices @ self.A.T + self.b)))


def required_kappa(pieces: Sequence[Piece]) -> float:
    return max(p.sup_norm() for p in pieces)


def pwl_net(pieces: Sequence[Piece], kappa: float | str = "auto") -> Network:
    """Depth-5 network realizing sum_i 1_{region_i}(x) (A_i x + b_i).

    Each piece is the times-step gadget applied to (affine map, indicator of its region).
    """
    pieces = list(pieces)
    if not pieces:
        raise NetworkError("need at least one piece")
    mu = pieces[0].A.shape[0]
    d = pieces[0].A.shape[1]
    need = required_kappa(pieces)
    if kappa == "auto":
        kappa = need if need > 0 else 1.0
    else:
        kappa = float(kappa)
        if not kappa >= need * (1.0 - 1e-12):  # vertex rounding only
            raise NetworkError(f"kappa {kappa} is below the required bound {need}")
    step = times_step_net(mu, kappa)
    id2 = identity_net(mu, 2)
    terms = []
    for p in pieces:
        if p.A.shape != (mu, d):
            raise NetworkError("all pieces must share the shape of A")
        inner = parallelize([concat(id2, affine_layer_net(p.A, p.b)), indicator_net(p.region)])
        terms.append(concat(step, inner))
    net = net_sum(terms) if len(terms) > 1 else terms[0]
    _assert(net.depth == 5, "piecewise linear net depth is 5")
    return net


def pwl_size_budget(pieces: Sequence[Piece]) -> int:
    """Sum over pieces of the constructive size terms (mu + nnz(A, b) + region size)."""
    total = 0
    for p in pieces:
        mu, d = p.A.shape
        total += mu + np.count_nonzero(p.A) + np.count_nonzero(p.b) + (d + 2) * (p.region.n_total + p.region.n_eq)
    return total


def summary(net: Network) -> dict:
    return metrics(net).json()
