import numpy as np
import pytest

from derhamnet.generators import generate
from derhamnet.mesh import Mesh


def reference_triangle() -> Mesh:
    return Mesh(2, np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))


def reference_tet() -> Mesh:
    return Mesh(3, np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]]), np.array([[0, 1, 2, 3]]))


def two_triangle_square() -> Mesh:
    return generate("square-diag", 1)


@pytest.fixture(scope="session")
def meshes():
    cache = {}

    def get(domain, n):
        if (domain, n) not in cache:
            cache[domain, n] = generate(domain, n)
        return cache[domain, n]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(0)
