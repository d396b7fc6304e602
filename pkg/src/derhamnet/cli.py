"""Command-line entry point: ``derhamnet <command> [flags]``.

Exit codes: 0 when every check passes, 1 on a check failure, 2 on usage or I/O errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import mesh as meshmod
from .generators import DOMAINS, generate
from .mesh import MeshError
from .network import BISU, NetworkError, deserialize, evaluate, serialize
from .shapes import CLI_NAMES, SpaceKind
from .spaces import (basis_artifact, basis_net, check_supported, dof_order_json, function_artifact,
                     function_net, load_artifact_network, load_coefficients)
from .verify import checks
from .verify.convergence import convergence_study

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _space(name: str) -> SpaceKind:
    try:
        return CLI_NAMES[name]
    except KeyError:
        raise UsageError(f"unknown space {name!r}; choose from {sorted(CLI_NAMES)}") from None


def _load_mesh(path: str):
    return meshmod.check(meshmod.load_mesh(path))


def read_points(path: str) -> np.ndarray:
    """One point per line, comma-separated coordinates; blank lines and '#' comments skipped."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            rows.append([float(t) for t in line.split(",")])
    if not rows or len({len(r) for r in rows}) != 1:
        raise UsageError(f"{path}: expected a non-empty list of equally sized points")
    return np.array(rows)


def write_values(values: np.ndarray, path: str | None) -> None:
    # repr of a float is the shortest exact round-trip form
    text = "\n".join(",".join(repr(float(v)) for v in row) for row in np.atleast_2d(values)) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _seed(args) -> int:
    return checks.default_seed() if args.seed is None else args.seed


# commands -------------------------------------------------------------------


def cmd_gen_mesh(args) -> int:
    mesh = generate(args.domain, args.n, args.dim)
    meshmod.check(mesh)
    if args.out:
        meshmod.save_mesh(mesh, args.out)
    else:
        print(json.dumps(mesh.json()))
    return EXIT_PASS


def cmd_build(args) -> int:
    mesh = _load_mesh(args.mesh)
    kind = _space(args.space)
    check_supported(mesh, kind)
    basis = basis_net(mesh, kind)
    if args.coeffs:
        coeffs = load_coefficients(Path(args.coeffs).read_text())
        artifact = function_artifact(function_net(mesh, kind, coeffs, basis=basis))
    else:
        artifact = basis_artifact(basis)
    out = Path(args.out)
    out.write_text(json.dumps(artifact, separators=(",", ":")))
    sidecar = out.with_name(out.name + ".dofs.json")
    sidecar.write_text(json.dumps({"kind": kind.value, "dof_order": dof_order_json(basis.dof_order)}))
    net = basis.net
    print(json.dumps({"out": str(out), "dof_order": str(sidecar), "kind": kind.value,
                      "n_dofs": len(basis.dof_order), "L": net.depth, "M": net.size,
                      "bisu": net.count_acts(BISU)}, sort_keys=True))
    return EXIT_PASS


def cmd_eval(args) -> int:
    net = load_artifact_network(json.loads(Path(args.net).read_text()))
    pts = read_points(args.points)
    if pts.shape[1] != net.input_dim:
        raise UsageError(f"points have dimension {pts.shape[1]}, network expects {net.input_dim}")
    write_values(evaluate(net, pts), args.out)
    return EXIT_PASS


def _result(reports, out) -> int:
    passed = all(r.passed for r in reports)
    _emit({"passed": passed, "reports": [r.json() for r in reports]}, out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_verify(args) -> int:
    mesh = _load_mesh(args.mesh)
    kind = _space(args.space)
    check_supported(mesh, kind)
    seed = _seed(args)
    name = Path(args.mesh).stem
    reports = [checks.check_exactness(mesh, kind, checks.SamplePlan(seed=seed), mesh_name=name)]
    if kind != SpaceKind.S0:
        reports.append(checks.check_conformity(mesh, kind, seed=seed, mesh_name=name))
    return _result(reports, args.out)


def cmd_derham(args) -> int:
    mesh = _load_mesh(args.mesh)
    report = checks.check_derham(mesh, seed=_seed(args), mesh_name=Path(args.mesh).stem)
    return _result([report], args.out)


def cmd_audit(args) -> int:
    mesh = _load_mesh(args.mesh)
    kind = _space(args.space)
    check_supported(mesh, kind)
    return _result([checks.audit_sizes(mesh, kind, mesh_name=Path(args.mesh).stem)], args.out)


def cmd_convergence(args) -> int:
    kind = _space(args.space)
    if args.domain not in DOMAINS:
        raise UsageError(f"unknown domain {args.domain!r}")
    rep = convergence_study(args.domain, kind, levels=tuple(args.levels))
    key = "L2" if kind == SpaceKind.S0 else next(k for k in rep.rates if k not in ("L2", "full"))
    lo, hi = args.rate_range
    passed = all(lo <= r <= hi for r in rep.rates[key])
    _emit({"passed": passed, "checked_norm": key, "rate_range": [lo, hi], **rep.json()}, args.out)
    return EXIT_PASS if passed else EXIT_FAIL


def cmd_roundtrip(args) -> int:
    raw = Path(args.net).read_text()
    net = load_artifact_network(json.loads(raw))
    blob = serialize(net)
    again = deserialize(blob)
    rng = np.random.default_rng(_seed(args))
    x = rng.uniform(-0.25, 1.25, size=(args.points, net.input_dim))
    a, b = evaluate(net, x), evaluate(again, x)
    bitwise = a.tobytes() == b.tobytes()
    stable = serialize(again) == blob
    passed = bitwise and stable
    _emit({"passed": passed, "bitwise_equal": bitwise, "reserialization_identical": stable,
           "n_points": args.points, "L": net.depth, "M": net.size}, args.out)
    return EXIT_PASS if passed else EXIT_FAIL


# parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="derhamnet", description="Compile simplicial meshes into exact FE networks.")
    sub = p.add_subparsers(dest="command", required=True)
    spaces = sorted(CLI_NAMES)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=None, help="overrides DERHAMNET_SEED (default 0)")
        return sp

    g = add("gen-mesh", cmd_gen_mesh, "generate a mesh JSON file")
    g.add_argument("--domain", required=True, choices=sorted(DOMAINS) + ["hypercube"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--dim", type=int, default=None, help="dimension for --domain hypercube")
    g.add_argument("--out")

    b = add("build", cmd_build, "compile a basis net or function net")
    b.add_argument("--mesh", required=True)
    b.add_argument("--space", required=True, choices=spaces)
    mode = b.add_mutually_exclusive_group()
    mode.add_argument("--coeffs", help="JSON list of coefficients in dof order")
    mode.add_argument("--basis", action="store_true", help="emit the basis net (default)")
    b.add_argument("--out", required=True)

    e = add("eval", cmd_eval, "evaluate a network file at points")
    e.add_argument("--net", required=True)
    e.add_argument("--points", required=True)
    e.add_argument("--out")

    for name, func, help_ in (("verify", cmd_verify, "exactness and conformity checks"),
                              ("audit", cmd_audit, "size and depth audit")):
        v = add(name, func, help_)
        v.add_argument("--mesh", required=True)
        v.add_argument("--space", required=True, choices=spaces)
        v.add_argument("--out")

    d = add("derham", cmd_derham, "discrete de Rham sequence identities")
    d.add_argument("--mesh", required=True)
    d.add_argument("--out")

    c = add("convergence", cmd_convergence, "h-refinement study with observed rates")
    c.add_argument("--domain", required=True, choices=sorted(DOMAINS))
    c.add_argument("--space", required=True, choices=spaces)
    c.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16])
    c.add_argument("--rate-range", type=float, nargs=2, default=[0.8, 1.2], metavar=("LO", "HI"))
    c.add_argument("--out")

    r = add("roundtrip", cmd_roundtrip, "serialize/deserialize and compare evaluations bitwise")
    r.add_argument("--net", required=True)
    r.add_argument("--points", type=int, default=100)
    r.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, MeshError, NetworkError, OSError, ValueError, KeyError) as exc:
        print(f"derhamnet {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
