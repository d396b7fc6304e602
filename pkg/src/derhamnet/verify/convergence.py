"""h-refinement studies: interpolate a smooth target, build the function net, measure errors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..generators import generate
from ..mesh import Mesh, cell_geometry, mesh_size
from ..network import evaluate
from ..shapes import SpaceKind
from ..spaces import dof_order, function_net
from .checks import curl_from_jacobian, dof_directions, fd_jacobian
from .quadrature import simplex_rule


@dataclass(frozen=True)
class Target:
    """Smooth field with the derivative measured by the space's broken seminorm."""

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray] | None = None


def _sin_sin(x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def _sin_sin_grad(x):
    s0, s1 = np.sin(np.pi * x[:, 0]), np.sin(np.pi * x[:, 1])
    c0, c1 = np.cos(np.pi * x[:, 0]), np.cos(np.pi * x[:, 1])
    return np.pi * np.stack([c0 * s1, s0 * c1], axis=1)


def _field(x):
    return np.stack([np.sin(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1]),
                     np.sin(np.pi * x[:, 1]) * np.cos(np.pi * x[:, 0])], axis=1)


def _field_div(x):
    return 2 * np.pi * np.cos(np.pi * x[:, 0]) * np.cos(np.pi * x[:, 1])


def _field_rot(x):
    # d1 v2 - d2 v1
    return 2 * np.pi * np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


SCALAR_TARGET = Target("sin(pi x1) sin(pi x2)", _sin_sin, _sin_sin_grad)
DIV_TARGET = Target("(sin(pi x1) cos(pi x2), sin(pi x2) cos(pi x1))", _field, _field_div)
ROT_TARGET = Target("(sin(pi x1) cos(pi x2), sin(pi x2) cos(pi x1))", _field, _field_rot)

DEFAULT_TARGETS = {
    SpaceKind.S1: SCALAR_TARGET, SpaceKind.S1_RELU: SCALAR_TARGET, SpaceKind.CR0: SCALAR_TARGET,
    SpaceKind.S0: Target("sin(pi x1) sin(pi x2)", _sin_sin), SpaceKind.RT0: DIV_TARGET, SpaceKind.N0: ROT_TARGET,
}


@dataclass
class ConvergenceReport:
    kind: str
    target: str
    h: list[float]
    errors: dict[str, list[float]]
    rates: dict[str, list[float]]

    def json(self) -> dict:
        return {"kind": self.kind, "target": self.target, "h": self.h, "errors": self.errors, "rates": self.rates}


def interpolate(mesh: Mesh, kind: SpaceKind, target: Target) -> np.ndarray:
    """Canonical degrees of freedom with one-point moments at vertex / edge / face barycenters, cell means."""
    kind = SpaceKind(kind)
    order = dof_order(mesh, kind)
    mids = np.array([mesh.vertices[list(s.vertex_ids)].mean(axis=0) for s in order]) if kind != SpaceKind.S0 else None
    if kind in (SpaceKind.S1, SpaceKind.S1_RELU, SpaceKind.CR0):
        return target.value(mids)
    if kind in (SpaceKind.RT0, SpaceKind.N0):
        return np.sum(target.value(mids) * dof_directions(mesh, kind), axis=1)
    lam, w = simplex_rule(mesh.dim, 4)
    out = []
    for s in order:
        pts = lam @ mesh.vertices[list(s.vertex_ids)]
        out.append(w @ target.value(pts))
    return np.array(out)


def _derivative(kind: SpaceKind, jac: np.ndarray) -> np.ndarray:
    if kind in (SpaceKind.S1, SpaceKind.S1_RELU, SpaceKind.CR0):
        return jac[:, 0, :]
    if kind == SpaceKind.RT0:
        return np.trace(jac, axis1=1, axis2=2)
    return curl_from_jacobian(jac)


def errors_for(mesh: Mesh, kind: SpaceKind, target: Target, coeffs: np.ndarray) -> dict[str, float]:
    """L2 error and the broken derivative error (grad, div or curl) by degree-4 quadrature."""
    kind = SpaceKind(kind)
    f = function_net(mesh, kind, coeffs)
    lam, w = simplex_rule(mesh.dim, 4)
    pts, weights, steps = [], [], []
    for c in range(mesh.n_cells):
        geo = cell_geometry(mesh, c)
        pts.append(lam @ mesh.cell_points(c))
        weights.append(w * geo.volume)
        # quadrature points keep a distance of at least ~0.18 r_T from the cell boundary
        steps.append(np.full(len(w), 0.05 * geo.inradius))
    x, wt, step = np.vstack(pts), np.concatenate(weights), np.concatenate(steps)
    vals = np.asarray(evaluate(f.net, x)).reshape(len(x), -1)
    diff = vals - target.value(x).reshape(len(x), -1)
    out = {"L2": math.sqrt(float(wt @ np.sum(diff**2, axis=1)))}
    if target.derivative is not None:
        jac = fd_jacobian(lambda p: evaluate(f.net, p), x, step)
        dd = _derivative(kind, jac).reshape(len(x), -1) - target.derivative(x).reshape(len(x), -1)
        semi = math.sqrt(float(wt @ np.sum(dd**2, axis=1)))
        name = {SpaceKind.RT0: "div", SpaceKind.N0: "curl"}.get(kind, "H1_broken")
        out[name] = semi
        out["full"] = math.sqrt(out["L2"] ** 2 + semi**2)
    return out


def observed_rates(h: Sequence[float], e: Sequence[float]) -> list[float]:
    return [math.log(e[i] / e[i + 1]) / math.log(h[i] / h[i + 1]) for i in range(len(h) - 1)]


def convergence_study(domain: str | Callable[[int], Mesh], kind, target: Target | None = None,
                      levels: Sequence[int] = (4, 8, 16)) -> ConvergenceReport:
    kind = SpaceKind(kind)
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    target = target or DEFAULT_TARGETS[kind]
    make = (lambda n: generate(domain, n)) if isinstance(domain, str) else domain
    hs, errs = [], {}
    for n in levels:
        mesh = make(n)
        hs.append(mesh_size(mesh))
        for key, val in errors_for(mesh, kind, target, interpolate(mesh, kind, target)).items():
            errs.setdefault(key, []).append(val)
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("levels must give strictly decreasing mesh sizes")
    rates = {k: observed_rates(hs, v) for k, v in errs.items()}
    return ConvergenceReport(kind.value, target.name, hs, errs, rates)
