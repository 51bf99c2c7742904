import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from control_engine.su_algebra import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    commutator,
    distance,
    expm_anti_hermitian,
    from_coords,
    geodesic_point,
    hs_inner,
    hs_norm,
    is_unitary,
    random_hermitian,
    random_su,
    su_basis,
    su_coords,
    su_log,
)


def test_pauli_commutator():
    np.testing.assert_allclose(commutator(PAULI_X, PAULI_Y), 2j * PAULI_Z)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_su_basis_is_orthonormal(n):
    basis = su_basis(n)
    assert basis.shape == (n * n - 1, n, n)
    gram = np.array([[hs_inner(a, b) for b in basis] for a in basis])
    np.testing.assert_allclose(gram, np.eye(n * n - 1), atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
@settings(max_examples=25, deadline=None)
def test_coords_round_trip(seed, n):
    rng = np.random.default_rng(seed)
    x = -1j * random_hermitian(n, rng)
    np.testing.assert_allclose(from_coords(su_coords(x), n), x, atol=1e-12)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 4))
@settings(max_examples=25, deadline=None)
def test_log_inverts_exp_near_identity(seed, n):
    rng = np.random.default_rng(seed)
    h = random_hermitian(n, rng)
    x = -0.5j * h / max(1.0, float(np.max(np.abs(np.linalg.eigvalsh(h)))))
    np.testing.assert_allclose(su_log(expm_anti_hermitian(x)), x, atol=1e-10)


def test_random_su_is_special_unitary(rng):
    for n in (2, 3):
        u = random_su(n, rng)
        assert is_unitary(u)
        assert abs(np.linalg.det(u) - 1.0) < 1e-10


def test_geodesic_endpoints(rng):
    x, y = random_su(2, rng), random_su(2, rng)
    np.testing.assert_allclose(geodesic_point(x, y, 0.0), x, atol=1e-12)
    np.testing.assert_allclose(geodesic_point(x, y, 1.0), y, atol=1e-10)
    assert distance(x, x) == pytest.approx(0.0, abs=1e-12)


def test_hs_norm_of_pauli():
    assert hs_norm(PAULI_X) == pytest.approx(np.sqrt(2.0))
