"""
⚛️ Propagation
Endpoint and trajectory maps of the Schrödinger control system

This module implements:
- QuantumSystem: drift H0 and control couplings H1..Hm (hbar = 1)
- Exact per-segment propagators exp(-i H dt) by Hermitian eigendecomposition
- The endpoint map e_x on unitaries, pure states and density matrices
- Sampled trajectories on a uniform s = t / T grid and on equal arc-length grids
- The Lie algebra rank condition (LARC) closure check
- An adaptive ODE oracle used to cross-check the spectral propagators
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from .control_space import ControlSchedule, jitter, metric
from .errors import (
    ChannelMismatchError,
    InvalidStateError,
    InvalidSystemError,
    NonFiniteControlError,
    NonHermitianError,
)
from .persistence import matrix_from_json, matrix_to_json
from .su_algebra import dagger, hs_norm, project_su, su_coords

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
STATE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """
    N-level system with drift H0 and control Hamiltonians H1..Hm.

    All matrices must be Hermitian and traceless to 1e-12 per entry.
    """

    drift: np.ndarray = field(repr=False)
    controls: Tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        drift = np.array(self.drift, dtype=complex)
        controls = tuple(np.array(h, dtype=complex) for h in self.controls)
        n = drift.shape[0]
        if drift.shape != (n, n) or n < 2:
            raise InvalidSystemError(f"drift must be square with N >= 2, got shape {drift.shape}")
        if not controls:
            raise InvalidSystemError("at least one control Hamiltonian is required")
        for label, h in [("H0", drift)] + [(f"H{k + 1}", h) for k, h in enumerate(controls)]:
            if h.shape != (n, n):
                raise InvalidSystemError(f"{label} has shape {h.shape}, expected {(n, n)}")
            if np.max(np.abs(h - dagger(h))) > HERMITIAN_TOL:
                raise NonHermitianError(f"{label} is not Hermitian")
            if abs(np.trace(h)) > HERMITIAN_TOL:
                raise InvalidSystemError(f"{label} is not traceless")
        for h in (drift,) + controls:
            h.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "controls", controls)

    @property
    def dimension(self) -> int:
        return int(self.drift.shape[0])

    @property
    def m(self) -> int:
        return len(self.controls)

    def hamiltonian(self, amplitudes: Sequence[float]) -> np.ndarray:
        h = self.drift.copy()
        for a, hk in zip(amplitudes, self.controls):
            h = h + a * hk
        return h

    def control_generators(self) -> List[np.ndarray]:
        """Right-invariant vector fields -i H_k of the control couplings."""
        return [-1j * h for h in self.controls]

    def drift_generator(self) -> np.ndarray:
        return -1j * self.drift

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.dimension,
            "H0": matrix_to_json(self.drift),
            "controls": [matrix_to_json(h) for h in self.controls],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QuantumSystem":
        try:
            n = int(data["N"])
            drift = matrix_from_json(data["H0"])
            controls = tuple(matrix_from_json(h) for h in data["controls"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSystemError(f"malformed system file: {e}") from e
        if drift.shape != (n, n):
            raise InvalidSystemError(f"declared N={n} but H0 has shape {drift.shape}")
        return cls(drift, controls)


@dataclass(frozen=True)
class Trajectory:
    """Propagators U(s_i T) on a uniform grid s_i in [0, 1]."""

    s: np.ndarray = field(repr=False)
    final_time: float
    points: np.ndarray = field(repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.s * self.final_time


def _spectral(h: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Sorted eigenvalues and phase-fixed eigenvectors of a Hermitian matrix."""
    w, v = np.linalg.eigh(h)
    pivots = np.argmax(np.abs(v), axis=0)
    phases = v[pivots, np.arange(v.shape[1])]
    v = v * (np.abs(phases) / phases)
    return w, v


def _exp_from_spectral(w: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    return (v * np.exp(-1j * w * dt)) @ dagger(v)


def segment_propagator(h: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) for Hermitian H."""
    h = np.asarray(h, dtype=complex)
    if np.max(np.abs(h - dagger(h))) > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(h)))):
        raise NonHermitianError("segment Hamiltonian is not Hermitian")
    w, v = _spectral(0.5 * (h + dagger(h)))
    return _exp_from_spectral(w, v, dt)


def _check_control(sys: QuantumSystem, c: ControlSchedule):
    if c.channels != sys.m:
        raise ChannelMismatchError(f"control has {c.channels} channels, system has {sys.m}")
    if not np.all(np.isfinite(c.amplitudes)):
        raise NonFiniteControlError("control amplitudes must be finite")


def endpoint(sys: QuantumSystem, c: ControlSchedule) -> np.ndarray:
    """e_I(C): ordered product of segment propagators, later segments on the left."""
    _check_control(sys, c)
    u = np.eye(sys.dimension, dtype=complex)
    for duration, amps in c.segments():
        u = segment_propagator(sys.hamiltonian(amps), duration) @ u
    return u


def endpoint_from(sys: QuantumSystem, x: np.ndarray, c: ControlSchedule) -> np.ndarray:
    """e_x(C) = e_I(C) x for the right-invariant system."""
    return endpoint(sys, c) @ x


def endpoint_state(sys: QuantumSystem, c: ControlSchedule, psi0: np.ndarray) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (sys.dimension,) or abs(np.linalg.norm(psi0) - 1.0) > STATE_TOL:
        raise InvalidStateError("initial state must be a unit vector of length N")
    return endpoint(sys, c) @ psi0


def validate_density(rho: np.ndarray, n: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (n, n):
        raise InvalidStateError(f"density matrix must be {n}x{n}")
    if np.max(np.abs(rho - dagger(rho))) > STATE_TOL:
        raise InvalidStateError("density matrix must be Hermitian")
    if abs(np.trace(rho) - 1.0) > STATE_TOL:
        raise InvalidStateError("density matrix must have unit trace")
    if np.min(np.linalg.eigvalsh(rho)) < -STATE_TOL:
        raise InvalidStateError("density matrix must be positive semidefinite")
    return rho


def endpoint_density(sys: QuantumSystem, c: ControlSchedule, rho0: np.ndarray) -> np.ndarray:
    rho0 = validate_density(rho0, sys.dimension)
    u = endpoint(sys, c)
    return u @ rho0 @ dagger(u)


def propagators_at(sys: QuantumSystem, c: ControlSchedule, times: np.ndarray) -> np.ndarray:
    """U(t) for each t in ``times`` (sorted or not); t >= T gives U(T)."""
    _check_control(sys, c)
    times = np.asarray(times, dtype=float)
    n = sys.dimension
    out = np.empty((times.shape[0], n, n), dtype=complex)
    bounds = c.boundaries
    starts = [np.eye(n, dtype=complex)]
    spectra = []
    for duration, amps in c.segments():
        w, v = _spectral(sys.hamiltonian(amps))
        spectra.append((w, v))
        starts.append(_exp_from_spectral(w, v, duration) @ starts[-1])

    seg = np.searchsorted(bounds, times, side="right") - 1
    for i, (t, j) in enumerate(zip(times, seg)):
        if j < 0 or t <= 0.0:
            out[i] = starts[0]
        elif j >= c.segment_count:
            out[i] = starts[-1]
        elif t == bounds[j]:
            out[i] = starts[j]
        else:
            w, v = spectra[j]
            out[i] = _exp_from_spectral(w, v, t - bounds[j]) @ starts[j]
    return out


def trajectory(sys: QuantumSystem, c: ControlSchedule, samples: int) -> Trajectory:
    """Linearly reparametrized trajectory sampled at s_i = i / (samples - 1)."""
    if samples < 2:
        raise ValueError(f"trajectory needs at least 2 samples, got {samples}")
    s = np.linspace(0.0, 1.0, samples)
    t_final = c.final_time
    times = s * t_final
    times[-1] = t_final
    return Trajectory(s=s, final_time=t_final, points=propagators_at(sys, c, times))


def arc_length(sys: QuantumSystem, c: ControlSchedule) -> float:
    """int_0^T ||H(t)||_F dt, an upper bound on the group length of the trajectory."""
    return math.fsum(duration * hs_norm(sys.hamiltonian(amps)) for duration, amps in c.segments())


def arc_times(sys: QuantumSystem, c: ControlSchedule, samples: int) -> np.ndarray:
    """``samples`` times from 0 to T that split the arc length into equal parts."""
    if samples < 2:
        raise ValueError(f"arc grid needs at least 2 samples, got {samples}")
    total = c.final_time
    speeds = np.array([hs_norm(sys.hamiltonian(amps)) for _, amps in c.segments()])
    arc = np.concatenate(([0.0], np.cumsum(c.durations * speeds)))
    if c.is_zero_time or arc[-1] <= 0.0 or np.any(speeds <= 0.0):
        times = np.linspace(0.0, total, samples)
    else:
        times = np.interp(np.linspace(0.0, arc[-1], samples), arc, c.boundaries)
    times[0], times[-1] = 0.0, total
    return times


def larc_check(matrices: Sequence[np.ndarray], n: Optional[int] = None, max_depth: int = 8, tol: float = 1e-8) -> int:
    """
    Dimension of the real Lie algebra generated by ``matrices``.

    Brackets are closed breadth-first up to ``max_depth`` levels; the rank is the
    count of normalized Gram singular values above ``tol``.
    """
    mats = [project_su(np.asarray(a, dtype=complex)) for a in matrices]
    if not mats:
        return 0
    if n is None:
        n = mats[0].shape[0]
    full = n * n - 1

    basis: List[np.ndarray] = []
    basis_mats: List[np.ndarray] = []

    def _admit(a: np.ndarray) -> bool:
        norm = hs_norm(a)
        if norm == 0.0:
            return False
        v = su_coords(a) / norm
        for q in basis:
            v = v - np.dot(q, v) * q
        residual = np.linalg.norm(v)
        if residual <= tol:
            return False
        basis.append(v / residual)
        basis_mats.append(a / norm)
        return True

    frontier = [a for a in mats if _admit(a)]
    depth = 1
    while frontier and len(basis) < full and depth < max_depth:
        new = []
        for a in frontier:
            for b in list(basis_mats):
                c = a @ b - b @ a
                if _admit(c):
                    new.append(basis_mats[-1])
                    if len(basis) == full:
                        break
            if len(basis) == full:
                break
        frontier = new
        depth += 1

    if not basis:
        return 0
    gram = np.array(basis)
    sv = np.linalg.svd(gram, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0]))
    logger.debug(f"LARC closure: rank {rank} of {full} after depth {depth}")
    return rank


def ode_endpoint(sys: QuantumSystem, c: ControlSchedule, rtol: float = 1e-12, atol: float = 1e-12) -> np.ndarray:
    """Adaptive DOP853 integration of i dU/dt = H(t) U; a test oracle only."""
    _check_control(sys, c)
    n = sys.dimension
    y = np.eye(n, dtype=complex).ravel()
    for duration, amps in c.segments():
        h = sys.hamiltonian(amps)

        def rhs(_t, state, h=h):
            return (-1j * h @ state.reshape(n, n)).ravel()

        sol = solve_ivp(rhs, (0.0, duration), y, method="DOP853", rtol=rtol, atol=atol)
        y = sol.y[:, -1]
    return y.reshape(n, n)


def batch_endpoints(sys: QuantumSystem, controls: Sequence[ControlSchedule], threads: int = 1) -> List[np.ndarray]:
    """Order-preserving endpoint evaluation over a thread pool."""
    if threads <= 1 or len(controls) < 2:
        return [endpoint(sys, c) for c in controls]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: endpoint(sys, c), controls))


def continuity_constant(sys: QuantumSystem) -> float:
    """
    L with ||e(C) - e(D)||_F <= L d(C, D).

    Duhamel on the common interval gives max_j ||H_j||_F times the L1 term; the
    longer control's tail adds ||H0||_F per unit of |T_C - T_D| on top of its
    own L1 mass.
    """
    return max([hs_norm(sys.drift)] + [hs_norm(h) for h in sys.controls])


def endpoint_continuity(
    sys: QuantumSystem,
    c: ControlSchedule,
    scales: Sequence[float],
    seed: int = 0,
) -> Dict[str, Any]:
    """
    Jitter C at decreasing scales and record metric vs endpoint distance.

    Returns the observed constant K = max ||e(C_k) - e(C)||_F / d(C_k, C)
    next to the guaranteed bound L from ``continuity_constant``.
    """
    base = endpoint(sys, c)
    rows = []
    for scale in scales:
        ck = jitter(c, scale, np.random.default_rng(seed))
        delta = metric(ck, c)
        err = hs_norm(endpoint(sys, ck) - base)
        rows.append({"scale": float(scale), "delta": delta, "error": err})
    ratios = [r["error"] / r["delta"] for r in rows if r["delta"] > 0]
    return {"rows": rows, "K": max(ratios) if ratios else 0.0, "L": continuity_constant(sys)}
