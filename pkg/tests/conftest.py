import numpy as np
import pytest

from gjms.registry import BUILTIN_GEOMETRIES, random_perturbed_geometry


@pytest.fixture
def rng():
    """Seeded generator for random test inputs."""
    return np.random.default_rng(20240611)


@pytest.fixture
def equator_s2():
    return BUILTIN_GEOMETRIES["equator-s2-in-s3"]()


@pytest.fixture
def equator_s4():
    return BUILTIN_GEOMETRIES["equator-s4-in-s5"]()


@pytest.fixture
def great_circle():
    return BUILTIN_GEOMETRIES["great-circle-s1-in-s3"]()


@pytest.fixture
def clifford_torus():
    return BUILTIN_GEOMETRIES["clifford-torus"]()


@pytest.fixture
def sphere3():
    return BUILTIN_GEOMETRIES["sphere3"]()


@pytest.fixture
def sphere5():
    return BUILTIN_GEOMETRIES["sphere5"]()


@pytest.fixture
def small_sphere():
    return BUILTIN_GEOMETRIES["small-sphere-umbilic"]()


@pytest.fixture
def perturbed():
    """Generic non-Einstein, non-minimal geometry with k = 3, n = 5."""
    return random_perturbed_geometry(seed=7)


@pytest.fixture
def perturbed_surface():
    """Generic surface in a perturbed 3-dimensional ambient."""
    return random_perturbed_geometry(seed=11, k=2, n=3)
