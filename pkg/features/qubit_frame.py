"""
🌐 Qubit Frame
Scalar control of a two-level system seen as regular curves on the sphere

This module implements:
- FrameConstants: the orthonormal seeds A0, B0, C0 in su(2) and alpha, beta, gamma
- integrate_frame: A(t) = U^dag A0 U (and B, C), by conjugation or by stepping
  the frame equations directly
- control_from_curve: recover the scalar control from a constant-speed curve
- su2_component_invariant: the +/- sign labelling the two components of a
  PU(2) trajectory fiber
- Bloch-coordinate tables and the JSON curve format
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.integrate import solve_ivp

from config.app_config import SCHEMA_VERSION
from control_engine.control_space import ControlSchedule
from control_engine.errors import (
    DegenerateCurveError,
    FormatError,
    FrameError,
    LarcViolationError,
    ProjectiveFiberError,
    SpeedViolationError,
)
from control_engine.propagation import QuantumSystem, endpoint, propagators_at
from control_engine.su_algebra import PAULI_X, PAULI_Y, PAULI_Z, commutator, dagger, hs_inner, hs_norm

logger = logging.getLogger(__name__)

# i sigma_k / sqrt(2): orthonormal under the real Hilbert-Schmidt product
BLOCH_BASIS = np.stack([1j * PAULI_X, 1j * PAULI_Y, 1j * PAULI_Z]) / np.sqrt(2.0)

ORTHONORMAL_TOL = 1e-8
LARC_TOL = 1e-10


def to_bloch(x: np.ndarray) -> np.ndarray:
    """Coordinates of su(2) elements (shape (..., 2, 2)) in ``BLOCH_BASIS``."""
    return np.real(np.einsum("kij,...ij->...k", BLOCH_BASIS.conj(), x))


def from_bloch(v: np.ndarray) -> np.ndarray:
    return np.einsum("...k,kij->...ij", np.asarray(v, dtype=float), BLOCH_BASIS)


@dataclass(frozen=True)
class FrameConstants:
    alpha: float
    beta: float
    gamma: float
    a0: np.ndarray = field(repr=False)
    b0: np.ndarray = field(repr=False)
    c0: np.ndarray = field(repr=False)

    @property
    def orientation(self) -> float:
        """Sign of det[A0 B0 C0] in Bloch coordinates."""
        return float(np.sign(np.linalg.det(to_bloch(np.stack([self.a0, self.b0, self.c0])))))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "A0": to_bloch(self.a0).tolist(),
            "B0": to_bloch(self.b0).tolist(),
            "C0": to_bloch(self.c0).tolist(),
        }


def _check_qubit(sys: QuantumSystem):
    if sys.dimension != 2 or sys.m != 1:
        raise FrameError(f"frame methods need a scalar-control qubit, got N={sys.dimension}, m={sys.m}")


def frame_constants(h0: np.ndarray, h1: np.ndarray, tol: float = LARC_TOL) -> FrameConstants:
    """
    A0 = iH1/|H1|, B0 = [iH0, iH1] normalized, C0 = iH0 Gram-Schmidt'ed against A0.

    alpha = |[iH0, A0]|, beta = <iH0, A0> |[C0, A0]|, gamma = |[C0, iH1]|.
    """
    sys = QuantumSystem(h0, (h1,))
    if sys.dimension != 2:
        raise FrameError(f"frame constants are defined for qubits only, got N={sys.dimension}")
    y0, y1 = 1j * sys.drift, 1j * sys.controls[0]

    scale = max(hs_norm(y0) * hs_norm(y1), 1e-300)
    bracket = commutator(y0, y1)
    if hs_norm(y1) == 0.0 or hs_norm(bracket) <= tol * scale:
        raise LarcViolationError("[iH0, iH1] is collinear with span{iH0, iH1}; LARC fails")

    a0 = y1 / hs_norm(y1)
    b0 = bracket / hs_norm(bracket)
    residual = y0 - hs_inner(y0, a0) * a0
    c0 = residual / hs_norm(residual)

    alpha = hs_norm(commutator(y0, a0))
    beta = hs_inner(y0, a0) * hs_norm(commutator(c0, a0))
    gamma = hs_norm(commutator(c0, y1))
    logger.debug(f"frame constants alpha={alpha:.6g} beta={beta:.6g} gamma={gamma:.6g}")
    return FrameConstants(alpha=alpha, beta=beta, gamma=gamma, a0=a0, b0=b0, c0=c0)


@dataclass(frozen=True)
class FrameTrajectory:
    """Samples of the rotating frame (A, B, C)(t_i), each of shape (K, 2, 2)."""

    times: np.ndarray = field(repr=False)
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    c: np.ndarray = field(repr=False)
    method: str = "conjugation"

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def gram_deviation(self) -> float:
        """max_i |G_i - I| where G_i is the Gram matrix of (A, B, C)(t_i)."""
        vecs = to_bloch(np.stack([self.a, self.b, self.c], axis=1))
        gram = np.einsum("kij,klj->kil", vecs, vecs)
        return float(np.max(np.abs(gram - np.eye(3)), initial=0.0))

    def distance_to(self, other: "FrameTrajectory") -> float:
        return float(max(np.max(np.abs(x - y), initial=0.0) for x, y in ((self.a, other.a), (self.b, other.b), (self.c, other.c))))

    def bloch(self) -> np.ndarray:
        """Bloch vectors of A(t_i), shape (K, 3)."""
        return to_bloch(self.a)

    def to_frame(self) -> pd.DataFrame:
        table = {"t": self.times}
        for name, series in (("a", self.a), ("b", self.b), ("c", self.c)):
            coords = to_bloch(series)
            for k, axis in enumerate("xyz"):
                table[f"{name}_{axis}"] = coords[:, k]
        return pd.DataFrame(table)


def _frame_matrix(constants: FrameConstants, amplitude: float) -> np.ndarray:
    k = constants.beta + constants.gamma * amplitude
    return np.array([[0.0, constants.alpha, 0.0], [-constants.alpha, 0.0, k], [0.0, -k, 0.0]])


def _seed_coords(constants: FrameConstants) -> np.ndarray:
    return to_bloch(np.stack([constants.a0, constants.b0, constants.c0]))


def _frames_from_coords(times: np.ndarray, coords: np.ndarray, method: str) -> FrameTrajectory:
    mats = from_bloch(coords)
    return FrameTrajectory(times=times, a=mats[:, 0], b=mats[:, 1], c=mats[:, 2], method=method)


def _sample_times(c: ControlSchedule, samples: Optional[int], times: Optional[Sequence[float]]) -> np.ndarray:
    if times is not None:
        times = np.asarray(times, dtype=float)
    else:
        times = np.linspace(0.0, c.final_time, samples or 101)
        times[-1] = c.final_time
    if times.ndim != 1 or times.size == 0:
        raise FrameError("frame sample times must be a non-empty 1-D array")
    if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > c.final_time:
        raise FrameError(f"sample times must be sorted inside [0, {c.final_time}]")
    return times


def _ode_frames(
    constants: FrameConstants, c: ControlSchedule, times: np.ndarray, rtol: float, atol: float
) -> np.ndarray:
    y = _seed_coords(constants).ravel()
    out = np.empty((times.size, 3, 3))
    filled = np.zeros(times.size, dtype=bool)
    bounds = c.boundaries

    at_start = times <= 0.0
    out[at_start] = y.reshape(3, 3)
    filled |= at_start

    for j, (duration, amps) in enumerate(c.segments()):
        t0, t1 = bounds[j], bounds[j + 1]
        m = _frame_matrix(constants, float(amps[0]))
        select = ~filled & (times <= t1)
        ts = times[select]
        t_eval = np.append(ts, t1) if ts.size == 0 or ts[-1] < t1 else ts
        sol = solve_ivp(
            lambda _t, state, m=m: (m @ state.reshape(3, 3)).ravel(),
            (t0, t1),
            y,
            method="DOP853",
            t_eval=t_eval,
            rtol=rtol,
            atol=atol,
        )
        if not sol.success:
            raise FrameError(f"frame ODE failed on segment {j}: {sol.message}")
        out[select] = sol.y[:, : ts.size].T.reshape(-1, 3, 3)
        filled |= select
        y = sol.y[:, -1]
    return out


def integrate_frame(
    sys: QuantumSystem,
    c: ControlSchedule,
    samples: Optional[int] = None,
    times: Optional[Sequence[float]] = None,
    method: str = "conjugation",
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> FrameTrajectory:
    """
    The rotating frame along the trajectory of ``c``.

    ``method="conjugation"`` conjugates the seeds by the exact propagators;
    ``method="ode"`` integrates dA = alpha B, dB = -alpha A + (beta + gamma E) C,
    dC = -(beta + gamma E) B with DOP853 one segment at a time.
    """
    _check_qubit(sys)
    constants = frame_constants(sys.drift, sys.controls[0])
    grid = _sample_times(c, samples, times)

    if method == "conjugation":
        u = propagators_at(sys, c, grid)
        ud = np.conj(np.transpose(u, (0, 2, 1)))
        frame = FrameTrajectory(
            times=grid,
            a=ud @ constants.a0 @ u,
            b=ud @ constants.b0 @ u,
            c=ud @ constants.c0 @ u,
            method=method,
        )
    elif method == "ode":
        frame = _frames_from_coords(grid, _ode_frames(constants, c, grid, rtol, atol), method)
    else:
        raise FrameError(f"unknown frame method {method!r}")

    drift = frame.gram_deviation()
    if drift > ORTHONORMAL_TOL:
        raise FrameError(f"frame lost orthonormality: Gram deviation {drift:.3e}")
    return frame


def frame_from_function(
    constants: FrameConstants,
    amplitude: Callable[[float], float],
    times: Sequence[float],
    rtol: float = 1e-12,
    atol: float = 1e-12,
) -> FrameTrajectory:
    """Frame equations driven by a smooth control E(t), sampled at ``times`` (starting at 0)."""
    times = np.asarray(times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise FrameError("times must start at 0 and increase strictly")

    def rhs(t, state):
        return (_frame_matrix(constants, float(amplitude(t))) @ state.reshape(3, 3)).ravel()

    sol = solve_ivp(rhs, (0.0, times[-1]), _seed_coords(constants).ravel(), method="DOP853", t_eval=times, rtol=rtol, atol=atol)
    if not sol.success:
        raise FrameError(f"frame ODE failed: {sol.message}")
    return _frames_from_coords(times, sol.y.T.reshape(-1, 3, 3), "function")


def segment_speeds(sys: QuantumSystem, c: ControlSchedule, h: float = 1e-4) -> np.ndarray:
    """|dA/dt| by central differences at every segment midpoint."""
    _check_qubit(sys)
    constants = frame_constants(sys.drift, sys.controls[0])
    bounds = c.boundaries
    speeds = []
    for j, duration in enumerate(c.durations):
        mid = bounds[j] + duration / 2
        step = min(h, duration / 4)
        u = propagators_at(sys, c, np.array([mid - step, mid + step]))
        a = [dagger(x) @ constants.a0 @ x for x in u]
        speeds.append(hs_norm(a[1] - a[0]) / (2 * step))
    return np.array(speeds)


def reconstruct_amplitudes(
    times: Sequence[float],
    curve: np.ndarray,
    constants: FrameConstants,
    speed_tolerance: float = 0.02,
) -> np.ndarray:
    """
    Control samples E(t_i) = (<B'(t_i), C(t_i)> - beta) / gamma along a curve.

    ``curve`` holds Bloch vectors (K, 3) or su(2) matrices (K, 2, 2).
    Derivatives are central in the interior and one-sided (second order) at both ends.
    """
    times = np.asarray(times, dtype=float)
    curve = np.asarray(curve)
    vecs = to_bloch(curve) if curve.ndim == 3 else np.asarray(curve, dtype=float)
    if vecs.ndim != 2 or vecs.shape[1] != 3 or vecs.shape[0] != times.shape[0]:
        raise DegenerateCurveError(f"curve shape {curve.shape} does not match {times.shape[0]} timestamps")
    if times.shape[0] < 3 or np.any(np.diff(times) <= 0):
        raise DegenerateCurveError("a curve needs at least 3 samples with increasing timestamps")
    if np.max(np.abs(np.linalg.norm(vecs, axis=1) - 1.0)) > 1e-6:
        raise DegenerateCurveError("curve samples must be unit vectors in su(2)")
    if np.linalg.norm(vecs[0] - to_bloch(constants.a0)) > 1e-6:
        raise DegenerateCurveError("curve must start at A0")

    velocity = np.gradient(vecs, times, axis=0, edge_order=2)
    speed = np.linalg.norm(velocity, axis=1)
    if np.min(speed) <= 1e-12 * constants.alpha:
        raise DegenerateCurveError(f"curve velocity vanishes at t={times[int(np.argmin(speed))]:.6g}")
    rel = np.abs(speed - constants.alpha) / constants.alpha
    if np.max(rel) > speed_tolerance:
        i = int(np.argmax(rel))
        raise SpeedViolationError(
            f"curve speed {speed[i]:.6g} at t={times[i]:.6g} differs from alpha={constants.alpha:.6g} "
            f"by more than {speed_tolerance:.0%}"
        )

    b = velocity / speed[:, None]
    if np.linalg.norm(b[0] - to_bloch(constants.b0)) > 0.1:
        raise DegenerateCurveError("initial normalized velocity must be B0")
    c = constants.orientation * np.cross(vecs, b)
    b_prime = np.gradient(b, times, axis=0, edge_order=2)
    return (np.einsum("ij,ij->i", b_prime, c) - constants.beta) / constants.gamma


def control_from_curve(
    times: Sequence[float],
    curve: np.ndarray,
    constants: FrameConstants,
    speed_tolerance: float = 0.02,
) -> ControlSchedule:
    """Piecewise-constant control on the sample grid; each cell takes the mean of its end samples."""
    times = np.asarray(times, dtype=float)
    eps = reconstruct_amplitudes(times, curve, constants, speed_tolerance)
    cells = 0.5 * (eps[:-1] + eps[1:])
    schedule = ControlSchedule(1, np.diff(times), cells.reshape(-1, 1))
    logger.info(f"control from curve: {schedule.segment_count} segments, T={schedule.final_time:.6g}")
    return schedule


def _su2_lift(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=complex)
    if w.shape != (2, 2) or np.max(np.abs(dagger(w) @ w - np.eye(2))) > 1e-9:
        raise ProjectiveFiberError("target must be a 2x2 unitary")
    return w / np.sqrt(np.linalg.det(w))


def su2_component_invariant(sys: QuantumSystem, c: ControlSchedule, w: np.ndarray, tol: float = 0.1) -> int:
    """
    +1 if e(C) = W, -1 if e(C) = -W, for the SU(2) lift W of the projective target.

    A U(2) target is rescaled by its principal determinant root first.
    """
    if sys.dimension != 2:
        raise FrameError(f"the PU(2) component sign needs a qubit, got N={sys.dimension}")
    w = _su2_lift(w)
    u = endpoint(sys, c)
    if hs_norm(u - w) <= tol:
        return 1
    if hs_norm(u + w) <= tol:
        return -1
    raise ProjectiveFiberError(
        f"endpoint is not in the fiber over the target: min(|U - W|, |U + W|) = "
        f"{min(hs_norm(u - w), hs_norm(u + w)):.3e} > {tol}"
    )


def curve_to_dict(times: Sequence[float], curve: np.ndarray) -> Dict[str, Any]:
    curve = np.asarray(curve)
    vecs = to_bloch(curve) if curve.ndim == 3 else np.asarray(curve, dtype=float)
    return {
        "schema": SCHEMA_VERSION,
        "points": [{"t": float(t), "vector": [float(x) for x in v]} for t, v in zip(times, vecs)],
    }


def curve_from_json(data: Dict[str, Any]) -> Tuple[np.ndarray, np.ndarray]:
    """Timestamps and Bloch vectors from ``{"points": [{"t", "vector"}, ...]}``."""
    try:
        points = data["points"]
        times = np.array([float(p["t"]) for p in points])
        vecs = np.array([[float(x) for x in p["vector"]] for p in points])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed curve file: {e}") from e
    if vecs.ndim != 2 or vecs.shape[1] != 3:
        raise FormatError("curve vectors must have three components")
    return times, vecs


def write_frame_csv(frame: FrameTrajectory, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_frame().to_csv(path, index=False, lineterminator="\n")
    return path
