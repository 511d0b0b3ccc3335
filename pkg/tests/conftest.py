import numpy as np
import pytest

from planargibbs.potential import ideal_gas_model, reference_model
from planargibbs.smoothing import smooth_decompose


@pytest.fixture(scope="session")
def ref_model():
    return reference_model()


@pytest.fixture(scope="session")
def gas_model():
    return ideal_gas_model()


@pytest.fixture(scope="session")
def ref_decomp(ref_model):
    # matches the default plan budget: 0.9 / (2 c_j z xi) at z=0.5, xi=2
    return smooth_decompose(ref_model.spin_coupling, 0.045)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260810)
