import numpy as np
import pytest

from isoflow import ExactProjector, TargetSpace, build_torus_mesh
from isoflow.forms import DiscreteOneForm


@pytest.fixture(scope="session")
def target():
    return TargetSpace(2)


@pytest.fixture(scope="session")
def torus1():
    return build_torus_mesh(1)


@pytest.fixture(scope="session")
def torus2():
    return build_torus_mesh(2)


@pytest.fixture(scope="session")
def torus4():
    return build_torus_mesh(4)


@pytest.fixture(scope="session")
def torus8():
    return build_torus_mesh(8)


@pytest.fixture(scope="session")
def proj4(torus4, target):
    return ExactProjector(torus4, target)


@pytest.fixture(scope="session")
def proj8(torus8, target):
    return ExactProjector(torus8, target)


def constant_form(mesh, target, i, j, value=1.0):
    """Form with a single constant coefficient du_{i+1} (x) dx_{j+1} on all facets."""
    coeffs = np.zeros((mesh.num_facets, 2, target.dim))
    coeffs[:, i, j] = value
    return DiscreteOneForm(mesh, target, coeffs)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
