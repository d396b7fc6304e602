"""Sparse feedforward networks with per-neuron Identity/ReLU/BiSU activations."""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class NetworkError(ValueError):
    pass


class Activation(str, Enum):
    IDENTITY = "id"
    RELU = "relu"
    BISU = "bisu"


ID, RELU, BISU = Activation.IDENTITY, Activation.RELU, Activation.BISU


def _as_acts(acts, n: int) -> tuple[Activation, ...]:
    if isinstance(acts, (str, Activation)):
        return (Activation(acts),) * n
    acts = tuple(acts)
    out = acts if all(type(a) is Activation for a in acts) else tuple(Activation(a) for a in acts)
    if len(out) != n:
        raise NetworkError(f"expected {n} activations, got {len(out)}")
    return out


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map in coordinate form followed by per-neuron activations.

    Triplets are sorted by (row, col), unique, and contain no zeros.
    """

    rows: int
    cols: int
    row_idx: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    bias: np.ndarray
    acts: tuple[Activation, ...]

    def __post_init__(self):
        r = np.asarray(self.row_idx, dtype=np.int64).ravel()
        c = np.asarray(self.col_idx, dtype=np.int64).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        b = np.asarray(self.bias, dtype=float).ravel()
        if not (len(r) == len(c) == len(v)):
            raise NetworkError("triplet arrays differ in length")
        if len(b) != self.rows:
            raise NetworkError(f"bias has length {len(b)}, expected {self.rows}")
        if len(r) and (r.min() < 0 or r.max() >= self.rows or c.min() < 0 or c.max() >= self.cols):
            raise NetworkError("triplet index out of range")
        if np.any(v == 0.0):
            raise NetworkError("explicit zero weight in triplets")
        if not np.all(np.isfinite(v)) or not np.all(np.isfinite(b)):
            raise NetworkError("non-finite weight or bias")
        key = r * max(self.cols, 1) + c
        if len(key) > 1 and np.any(np.diff(key) <= 0):
            raise NetworkError("triplets must be unique and sorted by (row, col)")
        for arr in (r, c, v, b):
            arr.setflags(write=False)
        object.__setattr__(self, "row_idx", r)
        object.__setattr__(self, "col_idx", c)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "acts", _as_acts(self.acts, self.rows))

    @classmethod
    def from_sparse(cls, matrix, bias, acts) -> "Layer":
        """Build from any dense or scipy-sparse matrix; duplicates summed, zeros pruned."""
        coo = sp.coo_matrix(matrix)
        coo.sum_duplicates()
        keep = coo.data != 0.0
        r, c, v = coo.row[keep], coo.col[keep], coo.data[keep]
        order = np.lexsort((c, r))
        bias = np.asarray(bias, dtype=float).ravel()
        bias = np.where(bias == 0.0, 0.0, bias)  # drop negative zeros
        return cls(coo.shape[0], coo.shape[1], r[order], c[order], v[order], bias, acts)

    from_dense = from_sparse

    @classmethod
    def from_triplets(cls, rows: int, cols: int, r, c, v, bias, acts, ordered: bool = False) -> "Layer":
        """Build from coordinate triplets without duplicates; zeros are pruned, order fixed unless ``ordered``."""
        r, c, v = np.asarray(r, dtype=np.int64), np.asarray(c, dtype=np.int64), np.asarray(v, dtype=float)
        keep = v != 0.0
        if not keep.all():
            r, c, v = r[keep], c[keep], v[keep]
        if not ordered:
            order = np.lexsort((c, r))
            r, c, v = r[order], c[order], v[order]
        bias = np.asarray(bias, dtype=float).ravel()
        bias = np.where(bias == 0.0, 0.0, bias)
        return cls(rows, cols, r, c, v, bias, acts)

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.row_idx, self.col_idx)), shape=(self.rows, self.cols))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @property
    def nnz(self) -> int:
        return int(len(self.values) + np.count_nonzero(self.bias))

    def forward(self, x: np.ndarray, activate: bool = True) -> np.ndarray:
        # x has shape (cols, batch)
        z = np.asarray(self.matrix @ x)
        z += self.bias[:, None]
        if not activate:
            return z
        relu, bisu = self._masks
        if relu is True:
            np.maximum(z, 0.0, out=z)
        elif relu is not None:
            np.maximum(z, 0.0, out=z, where=relu)
        if bisu is not None:
            step = z > 0.0
            if bisu is True:
                z[...] = step
            else:
                np.copyto(z, step, where=bisu)
        return z

    @cached_property
    def _masks(self):
        # per activation: None (absent), True (every neuron) or a broadcastable row mask
        tags = np.array([a.value for a in self.acts])
        out = []
        for act in (RELU, BISU):
            hit = tags == act.value
            out.append(None if not hit.any() else True if hit.all() else hit[:, None])
        return tuple(out)

    def with_acts(self, acts) -> "Layer":
        return Layer(self.rows, self.cols, self.row_idx, self.col_idx, self.values, self.bias, acts)

    def json(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "triplets": [[int(r), int(c), float(v).hex()] for r, c, v in zip(self.row_idx, self.col_idx, self.values)],
            "bias": [float(b).hex() for b in self.bias],
            "act": [a.value for a in self.acts],
        }


@dataclass(frozen=True, eq=False)
class Network:
    input_dim: int
    layers: tuple[Layer, ...]

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise NetworkError("network needs at least one layer")
        width = self.input_dim
        for k, layer in enumerate(layers):
            if layer.cols != width:
                raise NetworkError(f"layer {k} expects {layer.cols} inputs, previous width is {width}")
            width = layer.rows
        if any(a != ID for a in layers[-1].acts):
            raise NetworkError("last layer must use identity activations")
        object.__setattr__(self, "layers", layers)

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def output_dim(self) -> int:
        return self.layers[-1].rows

    @property
    def size(self) -> int:
        return sum(layer.nnz for layer in self.layers)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def count_acts(self, act: Activation) -> int:
        return sum(a == act for layer in self.layers for a in layer.acts)


def evaluate(net: Network, x) -> np.ndarray:
    """Realization of ``net`` at one point (shape (d,)) or a batch (shape (n, d))."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x.reshape(1, -1) if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise NetworkError(f"input has shape {x.shape}, expected last dim {net.input_dim}")
    width = max(layer.rows for layer in net.layers)
    chunk = max(1, _CHUNK_ENTRIES // width)
    out = np.empty((len(batch), net.output_dim))
    for start in range(0, len(batch), chunk):
        z = batch[start:start + chunk].T.copy()
        for k, layer in enumerate(net.layers):
            z = layer.forward(z, activate=k < net.depth - 1)
        out[start:start + chunk] = z.T
    return out[0] if single else out


# cap on hidden-activation entries held at once during batched evaluation
_CHUNK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class Metrics:
    depth: int
    size: int
    size_in: int
    size_out: int
    per_layer: tuple[int, ...]

    def json(self) -> dict:
        return {"L": self.depth, "M": self.size, "M_in": self.size_in, "M_out": self.size_out,
                "M_layers": list(self.per_layer)}


def metrics(net: Network) -> Metrics:
    per = tuple(layer.nnz for layer in net.layers)
    return Metrics(net.depth, sum(per), per[0], per[-1], per)


def network_json(net: Network) -> dict:
    return {"input_dim": net.input_dim, "layers": [layer.json() for layer in net.layers]}


def _num(v) -> float:
    if isinstance(v, str):
        return float.fromhex(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise NetworkError(f"bad number {v!r}")
    return float(v)


def network_from_json(obj: dict) -> Network:
    try:
        layers = []
        for lay in obj["layers"]:
            trip = lay["triplets"]
            r = np.array([int(t[0]) for t in trip], dtype=np.int64)
            c = np.array([int(t[1]) for t in trip], dtype=np.int64)
            v = np.array([_num(t[2]) for t in trip], dtype=float)
            b = np.array([_num(x) for x in lay["bias"]], dtype=float)
            order = np.lexsort((c, r))
            layers.append(Layer(int(lay["rows"]), int(lay["cols"]), r[order], c[order], v[order], b, lay["act"]))
        return Network(int(obj["input_dim"]), tuple(layers))
    except (KeyError, TypeError, IndexError, ValueError) as exc:
        if isinstance(exc, NetworkError):
            raise
        raise NetworkError(f"malformed network JSON: {exc}") from exc


def serialize(net: Network) -> bytes:
    return json.dumps(network_json(net), separators=(",", ":")).encode()


def deserialize(data: bytes | str) -> Network:
    try:
        obj = json.loads(data)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise NetworkError(f"cannot parse network: {exc}") from exc
    if not isinstance(obj, dict):
        raise NetworkError("network JSON must be an object")
    return network_from_json(obj)


def affine_net(A, b) -> Network:
    """One-layer network x -> A x + b."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return Network(A.shape[1], (Layer.from_sparse(A, b, ID),))


def layers_equal(a: Sequence[Layer], b: Sequence[Layer]) -> bool:
    """Bitwise equality of layer stacks."""
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if (x.rows, x.cols, x.acts) != (y.rows, y.cols, y.acts):
            return False
        for u, v in ((x.row_idx, y.row_idx), (x.col_idx, y.col_idx), (x.values, y.values), (x.bias, y.bias)):
            if u.shape != v.shape or u.tobytes() != v.tobytes():
                return False
    return True
