import numpy as np
import pytest

from riemannkit import manifold


@pytest.fixture(scope="session")
def sphere2():
    return manifold.builtin("sphere_stereo", {"n": 2, "R": 1.0})


@pytest.fixture(scope="session")
def sphere3():
    return manifold.builtin("sphere_stereo", {"n": 3, "R": 1.0})


@pytest.fixture(scope="session")
def hyper2():
    return manifold.builtin("hyperbolic_ball", {"n": 2})


@pytest.fixture(scope="session")
def eucl2():
    return manifold.builtin("euclidean", {"n": 2})


@pytest.fixture(scope="session")
def torus21():
    return manifold.builtin("torus", {"R": 2.0, "r": 1.0})


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
