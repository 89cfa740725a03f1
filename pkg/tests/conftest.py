import numpy as np
import pytest

from helfrich import shapes


@pytest.fixture(scope="session")
def unit_sphere():
    return shapes.sphere(1.0, 4)


@pytest.fixture(scope="session")
def coarse_sphere():
    return shapes.sphere(1.0, 3)


@pytest.fixture(scope="session")
def capsule():
    return shapes.capped_cylinder(2.0, 1.0, 0.05)


@pytest.fixture(scope="session")
def torus_half():
    return shapes.torus(0.5, 0.05)


@pytest.fixture(scope="session")
def dumbbell_small():
    return shapes.dumbbell(0.05, 0.5, 0.8, 0.05)


@pytest.fixture(scope="session")
def dumbbell_touching():
    return shapes.dumbbell(0.02, 0.0, 1.0, 0.05)


@pytest.fixture(scope="session")
def touching():
    return shapes.touching_spheres(1.0, 4)


@pytest.fixture(scope="session")
def embedded_shapes(unit_sphere, capsule, torus_half, dumbbell_small):
    return {
        "sphere": unit_sphere,
        "capsule": capsule,
        "torus": torus_half,
        "dumbbell": dumbbell_small,
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
