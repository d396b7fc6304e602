"""Exact ReLU/BiSU network emulation of lowest-order finite element spaces on simplicial meshes."""
from .calculus import (SizeBoundError, concat, identity_net, indicator_net, max_net, min_net, net_sum,
                       parallelize, pwl_net, times_step_net)
from .generators import generate
from .mesh import Mesh, MeshError, SubsimplexIndex, load_mesh, save_mesh, validate
from .network import (Activation, Layer, Metrics, Network, NetworkError, deserialize, evaluate, metrics,
                      serialize)
from .shapes import ShapeNet, SpaceKind, shape_net
from .spaces import BasisNet, FunctionNet, basis_net, function_net, net_linear_combine, trace_net

# the combinator is called "sum" in the public vocabulary; net_sum avoids shadowing the builtin
sum = net_sum  # noqa: A001

__all__ = [
    "Activation", "BasisNet", "FunctionNet", "Layer", "Mesh", "MeshError", "Metrics", "Network",
    "NetworkError", "ShapeNet", "SizeBoundError", "SpaceKind", "SubsimplexIndex", "basis_net", "concat",
    "deserialize", "evaluate", "function_net", "generate", "identity_net", "indicator_net", "load_mesh",
    "max_net", "metrics", "min_net", "net_linear_combine", "net_sum", "parallelize", "pwl_net", "save_mesh",
    "serialize", "shape_net", "sum", "times_step_net", "trace_net", "validate",
]
