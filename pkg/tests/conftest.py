import numpy as np
import pytest

from ergoprobe.hilbert import StateVector, build_full_basis


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_state(basis, seed):
    g = np.random.default_rng(seed)
    amp = g.standard_normal(basis.dim) + 1j * g.standard_normal(basis.dim)
    return StateVector(basis, amp / np.linalg.norm(amp))


@pytest.fixture
def random_state_factory():
    return random_state
