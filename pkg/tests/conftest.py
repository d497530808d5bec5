import numpy as np
import pytest

from mftn.basis import weyl_heisenberg_basis


@pytest.fixture(scope="session")
def wh2():
    return weyl_heisenberg_basis(2)


@pytest.fixture(scope="session")
def wh3():
    return weyl_heisenberg_basis(3)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
