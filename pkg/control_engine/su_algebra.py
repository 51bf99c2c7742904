"""
Lie-algebra helpers for su(N) and SU(N).

Inner products are the real Hilbert-Schmidt product <X, Y> = Re Tr(X^dagger Y);
distances on SU(N) are the bi-invariant ones it induces,
dist(x, y) = ||su_log(y x^dagger)||_F.
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import schur

logger = logging.getLogger(__name__)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hs_inner(x: np.ndarray, y: np.ndarray) -> float:
    """Real Hilbert-Schmidt inner product Re Tr(x^dagger y)."""
    return float(np.real(np.vdot(x, y)))


def hs_norm(x: np.ndarray) -> float:
    return float(np.linalg.norm(x))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    n = u.shape[0]
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(n))) <= tol)


def project_su(x: np.ndarray) -> np.ndarray:
    """Anti-Hermitian, traceless part of a square matrix."""
    n = x.shape[0]
    a = 0.5 * (x - dagger(x))
    return a - (np.trace(a) / n) * np.eye(n)


@lru_cache(maxsize=None)
def _basis_stack(n: int) -> np.ndarray:
    elements = []
    scale = 1.0 / np.sqrt(2.0)
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            elements.append(1j * scale * sym)
            anti = np.zeros((n, n), dtype=complex)
            anti[j, k] = -1j
            anti[k, j] = 1j
            elements.append(1j * scale * anti)
    for d in range(1, n):
        diag = np.zeros((n, n), dtype=complex)
        diag[np.arange(d), np.arange(d)] = 1.0
        diag[d, d] = -d
        diag *= np.sqrt(2.0 / (d * (d + 1)))
        elements.append(1j * scale * diag)
    stack = np.array(elements)
    stack.setflags(write=False)
    return stack


def su_basis(n: int) -> np.ndarray:
    """Orthonormal basis of su(n), shape (n^2 - 1, n, n).

    Generalized Gell-Mann matrices times i / sqrt(2), so every element has
    unit Hilbert-Schmidt norm.
    """
    if n < 2:
        raise ValueError(f"su(n) requires n >= 2, got {n}")
    return _basis_stack(n)


def su_coords(x: np.ndarray) -> np.ndarray:
    """Coordinates of an anti-Hermitian traceless matrix in ``su_basis``."""
    basis = su_basis(x.shape[0])
    return np.real(np.einsum("lij,ij->l", basis.conj(), x))


def from_coords(c: np.ndarray, n: int) -> np.ndarray:
    return np.einsum("l,lij->ij", np.asarray(c, dtype=float), su_basis(n))


def principal_angles(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigen-angles of a unitary with the trace branch fixed to zero.

    Returns ``(theta, z)`` with ``u = z diag(exp(i theta)) z^dagger`` and
    ``sum(theta) == 0``. Starting from principal angles in (-pi, pi], the
    largest (or smallest) angles are shifted by 2 pi until the sum vanishes.
    """
    t, z = schur(u, output="complex")
    theta = np.angle(np.diag(t))
    k = int(np.rint(theta.sum() / (2 * np.pi)))
    if k != 0:
        order = np.argsort(theta)
        if k > 0:
            theta[order[-k:]] -= 2 * np.pi
        else:
            theta[order[:-k]] += 2 * np.pi
    return theta, z


def su_log(u: np.ndarray) -> np.ndarray:
    """Traceless principal logarithm of a special unitary matrix."""
    theta, z = principal_angles(u)
    return project_su(z @ np.diag(1j * theta) @ dagger(z))


def log_spectral_norm(u: np.ndarray) -> float:
    """Largest |eigen-angle| of ``su_log(u)``; near pi the branch is ambiguous."""
    theta, _ = principal_angles(u)
    return float(np.max(np.abs(theta)))


def expm_anti_hermitian(a: np.ndarray) -> np.ndarray:
    """exp(a) for anti-Hermitian ``a`` through the spectral decomposition of -i a."""
    w, v = np.linalg.eigh(-1j * a)
    return (v * np.exp(1j * w)) @ dagger(v)


def distance(x: np.ndarray, y: np.ndarray) -> float:
    """Bi-invariant geodesic distance on SU(N)."""
    return hs_norm(su_log(y @ dagger(x)))


def geodesic_point(x: np.ndarray, y: np.ndarray, u: float) -> np.ndarray:
    """Point at fraction ``u`` along the group geodesic from x to y."""
    if u == 0.0:
        return x.copy()
    return expm_anti_hermitian(u * su_log(y @ dagger(x))) @ x


def random_hermitian(n: int, rng: np.random.Generator, traceless: bool = True) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (a + dagger(a))
    if traceless:
        h -= (np.trace(h) / n) * np.eye(n)
    return h


def random_su(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed special unitary matrix (QR with phase correction)."""
    a = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    det = np.linalg.det(q)
    return q / det ** (1.0 / n)


def random_su_near(x: np.ndarray, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Point at exactly ``radius`` from ``x`` in a uniformly random direction."""
    n = x.shape[0]
    c = rng.normal(size=n * n - 1)
    c *= radius / np.linalg.norm(c)
    return expm_anti_hermitian(from_coords(c, n)) @ x
