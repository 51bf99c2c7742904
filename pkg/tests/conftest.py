import numpy as np
import pytest

from control_engine.bracket_section import ChartAtlas
from control_engine.control_space import ControlSchedule, random_schedule
from control_engine.propagation import QuantumSystem
from control_engine.su_algebra import PAULI_X, PAULI_Y, PAULI_Z

ZERO2 = np.zeros((2, 2), dtype=complex)


def make_pauli_system(drift: float = 0.5) -> QuantumSystem:
    return QuantumSystem(drift * PAULI_Z, (PAULI_X, PAULI_Y))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture
def su2_system():
    """0.5 sigma_z drift, sigma_x and sigma_y controls."""
    return make_pauli_system()


@pytest.fixture
def driftless_system():
    return QuantumSystem(ZERO2, (PAULI_X, PAULI_Y))


@pytest.fixture
def qubit_system():
    """Scalar-control qubit H0 = sigma_z, H1 = sigma_x."""
    return QuantumSystem(PAULI_Z, (PAULI_X,))


@pytest.fixture(scope="session")
def su2_atlas():
    return ChartAtlas(make_pauli_system(), seed=0)


@pytest.fixture
def schedule_factory(rng):
    def make(m: int = 2, **kwargs) -> ControlSchedule:
        return random_schedule(m, rng, **kwargs)

    return make


