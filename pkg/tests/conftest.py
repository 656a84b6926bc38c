import numpy as np
import pytest

from analysis.ansatz import reference_data
from analysis.hamiltonian import ModelParams
from data.ground_states import GroundStateProvider
from data.sector_basis import SectorState, build_sector


@pytest.fixture
def params():
    return ModelParams(x=1.0, mu=0.1)


@pytest.fixture(scope="session")
def dense_provider():
    """In-memory provider backed by full diagonalization."""
    return GroundStateProvider(store=None, method="dense")


@pytest.fixture(scope="session")
def reference(dense_provider):
    """Ansatz-frame exact states and energies for N = 1..12 at x=1, mu=0.1."""
    return reference_data(dense_provider, range(1, 13), ModelParams(1.0, 0.1))


@pytest.fixture
def random_state():
    def make(n_sites, n_up, seed=0):
        basis = build_sector(n_sites, n_up)
        amplitudes = np.random.default_rng(seed).standard_normal(len(basis))
        return SectorState(basis, amplitudes).normalized()
    return make
