"""
🧭 Bracket Section
Local cross-sections of the endpoint map built from nested commutator words

This module implements:
- BracketWord: the expanded exponential word of the commutator recursion
  Q^1 = e^{Y1}, Q^nu = e^{Y_nu} Q^{nu-1} e^{-Y_nu} (Q^{nu-1})^{-1}
- r_schedule: the piecewise-constant control realizing a word with the drift
  folded into every slot, exp(xi^{2 alpha} Y0 +/- xi Y_j)
- build_chart: greedy pivoted search for N^2 - 1 nested brackets spanning su(N)
- forward_map F1(x, r) and the Newton cross-section sigma(x, y)
- ChartAtlas: one chart at the identity relocated by right translation

Sign convention: the system is i dU/dt = H U, so the vector field of control k
is Y = -i H_k and the drift field is Y0 = -i H0.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.app_config import AppConfig

from .control_space import ControlSchedule, concat, concat_all, zero_control
from .errors import (
    AmplitudeOverflowError,
    ChartError,
    ConditionError,
    InvalidScheduleError,
    OutOfNeighborhoodError,
    RankDeficiencyError,
    TrustRadiusError,
)
from .propagation import QuantumSystem, larc_check
from .su_algebra import (
    commutator,
    dagger,
    expm_anti_hermitian,
    from_coords,
    hs_norm,
    su_coords,
    su_log,
)

logger = logging.getLogger(__name__)

Slot = Tuple[int, int]

# snapped coordinates are pushed to magnitude (DETOUR_FACTOR * xi_floor)^depth
DETOUR_FACTOR = 10.0


def word_alpha(depth: int) -> int:
    """alpha_nu = floor(nu / 2 + 1)."""
    return depth // 2 + 1


def word_length(depth: int) -> int:
    """L(1) = 1, L(nu) = 2 L(nu - 1) + 2."""
    return 1 if depth == 1 else 2 * word_length(depth - 1) + 2


def _invert_slots(slots: Sequence[Slot]) -> Tuple[Slot, ...]:
    return tuple((j, -s) for j, s in reversed(slots))


def _expand(depth: int) -> Tuple[Slot, ...]:
    # composition order: the leftmost slot acts last
    if depth == 1:
        return ((0, 1),)
    inner = _expand(depth - 1)
    top = depth - 1
    return ((top, 1),) + inner + ((top, -1),) + _invert_slots(inner)


@dataclass(frozen=True)
class BracketWord:
    """
    Expanded commutator word of depth nu.

    ``kappa[j]`` holds the coefficients of Y_{j+1} = sum_k kappa[j][k] (-i H_k).
    ``slots`` lists (j, sign) pairs in composition order.
    """

    depth: int
    kappa: Tuple[Tuple[float, ...], ...]
    slots: Tuple[Slot, ...]
    indices: Optional[Tuple[int, ...]] = None

    @property
    def alpha(self) -> int:
        return word_alpha(self.depth)

    @property
    def length(self) -> int:
        return len(self.slots)

    @property
    def channels(self) -> int:
        return len(self.kappa[0])

    def inverted(self) -> "BracketWord":
        """Formal inverse: reversed slots with flipped signs."""
        return replace(self, slots=_invert_slots(self.slots))

    def generators(self, sys: QuantumSystem) -> List[np.ndarray]:
        gens = sys.control_generators()
        return [sum(c * g for c, g in zip(row, gens)) for row in self.kappa]

    def bracket(self, sys: QuantumSystem) -> np.ndarray:
        """Xi = ad Y_nu ... ad Y_2 Y_1."""
        ys = self.generators(sys)
        xi = ys[0]
        for y in ys[1:]:
            xi = commutator(y, xi)
        return xi

    def to_dict(self) -> Dict[str, Any]:
        return {
            "depth": self.depth,
            "alpha": self.alpha,
            "length": self.length,
            "indices": list(self.indices) if self.indices is not None else None,
            "kappa": [list(row) for row in self.kappa],
        }


def q_word(depth: int, generators: Sequence[Sequence[float]]) -> BracketWord:
    """Fully expanded word Q^nu(Y_1, ..., Y_nu) for coefficient vectors ``generators``."""
    if depth < 1:
        raise ValueError(f"word depth must be >= 1, got {depth}")
    if len(generators) != depth:
        raise ValueError(f"depth {depth} word needs {depth} generators, got {len(generators)}")
    kappa = tuple(tuple(float(c) for c in row) for row in generators)
    return BracketWord(depth=depth, kappa=kappa, slots=_expand(depth))


def word_from_indices(indices: Sequence[int], channels: int) -> BracketWord:
    """Word whose generators are single control fields Y_j = -i H_{indices[j]}."""
    rows = []
    for idx in indices:
        row = [0.0] * channels
        row[idx] = 1.0
        rows.append(row)
    word = q_word(len(indices), rows)
    return replace(word, indices=tuple(int(i) for i in indices))


def xi_from_r(r: float, depth: int) -> np.ndarray:
    """(sgn(r)|r|^{1/nu}, |r|^{1/nu}, ...)."""
    mag = abs(r) ** (1.0 / depth)
    xi = np.full(depth, mag)
    xi[0] = math.copysign(mag, r) if r != 0.0 else 0.0
    return xi


def r_schedule(word: BracketWord, xi: Sequence[float], amplitude_cap: float = 1e12) -> ControlSchedule:
    """
    Control realizing ``word`` with parameters ``xi``.

    Each slot (j, sign) becomes one segment of duration xi_j^{2 alpha} with
    amplitudes sign * kappa_j * xi_j^{1 - 2 alpha}; segments run in time order,
    which is the reverse of composition order.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (word.depth,):
        raise InvalidScheduleError(f"expected {word.depth} xi values, got {xi.shape}")
    if np.any(xi[1:] < 0):
        raise InvalidScheduleError("only xi_1 may carry a sign")
    two_alpha = 2 * word.alpha
    kappa = np.array(word.kappa)
    durations = []
    amplitudes = []
    for j, sign in reversed(word.slots):
        x = xi[j]
        if x == 0.0:
            continue
        duration = x**two_alpha
        amps = sign * kappa[j] * (x / duration)
        durations.append(duration)
        amplitudes.append(amps)
    if not durations:
        return zero_control(word.channels)
    amplitudes = np.array(amplitudes)
    peak = float(np.max(np.abs(amplitudes)))
    if not np.isfinite(peak) or peak > amplitude_cap:
        raise AmplitudeOverflowError(f"schedule amplitude {peak:.3e} exceeds cap {amplitude_cap:.3e}")
    return ControlSchedule(word.channels, np.array(durations), amplitudes)


def word_element(word: BracketWord, xi: Sequence[float], drift: np.ndarray, gens: Sequence[np.ndarray]) -> np.ndarray:
    """Group element of the substituted word, prod exp(xi^{2 alpha} Y0 + sign xi Y_j)."""
    n = drift.shape[0]
    two_alpha = 2 * word.alpha
    ys = [sum(c * g for c, g in zip(row, gens)) for row in word.kappa]
    u = np.eye(n, dtype=complex)
    for j, sign in word.slots:
        x = float(xi[j])
        if x == 0.0:
            continue
        u = u @ expm_anti_hermitian(x**two_alpha * drift + sign * x * ys[j])
    return u


@dataclass(frozen=True)
class SectionSettings:
    """Newton and safety parameters of a chart."""

    tol_section: float = 1e-9
    xi_floor: float = 1e-4
    amplitude_cap: float = 1e12
    max_iter: int = 50
    safety: float = 0.9
    fd_step: float = 1e-6
    max_depth: int = 5
    condition_bound: float = 1e6
    calibration_directions: int = 20
    calibration_bisections: int = 6
    calibration_radius: float = 1.0

    @classmethod
    def from_app_config(cls, config: Optional[AppConfig] = None, **overrides: Any) -> "SectionSettings":
        config = config or AppConfig()
        s = config.SECTION_SETTINGS
        values = dict(
            tol_section=config.TOL_SECTION,
            xi_floor=config.XI_FLOOR,
            amplitude_cap=s["amplitude_cap"],
            max_iter=s["max_iter"],
            safety=s["safety"],
            fd_step=s["fd_step"],
            max_depth=s["max_depth"],
            condition_bound=s["condition_bound"],
            calibration_directions=s["calibration_directions"],
            calibration_bisections=s["calibration_bisections"],
            calibration_radius=s["calibration_radius"],
        )
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


@dataclass(frozen=True, eq=False)
class SectionChart:
    """
    Bracket basis at a basepoint together with its Newton data.

    ``jacobian`` has the su(N) coordinates of Xi_k as columns; it is the
    derivative of F1 at r = 0 after right translation by the basepoint.
    """

    system: QuantumSystem = field(repr=False)
    basepoint: np.ndarray = field(repr=False)
    words: Tuple[BracketWord, ...] = field(repr=False)
    brackets: np.ndarray = field(repr=False)
    jacobian: np.ndarray = field(repr=False)
    condition: float
    radius: float
    settings: SectionSettings = field(default_factory=SectionSettings, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.words)

    @property
    def depths(self) -> Tuple[int, ...]:
        return tuple(w.depth for w in self.words)

    @property
    def trust_radius(self) -> float:
        return 2.0 * self.radius

    def at(self, x: np.ndarray) -> "SectionChart":
        """The same chart relocated to basepoint ``x``."""
        return replace(self, basepoint=np.array(x, dtype=complex))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "N": self.system.dimension,
            "m": self.system.m,
            "words": [w.to_dict() for w in self.words],
            "radius": self.radius,
            "trust_radius": self.trust_radius,
            "condition": self.condition,
            "tol_section": self.settings.tol_section,
            "xi_floor": self.settings.xi_floor,
            "amplitude_cap": self.settings.amplitude_cap,
        }


def chart_schedule(chart: SectionChart, r: np.ndarray) -> ControlSchedule:
    """F(r): the concatenated control, word 1 first in time; coordinates below the floor are snapped first."""
    r = _snap_small(chart, np.asarray(r, dtype=float))
    parts = [
        r_schedule(word, xi_from_r(float(rk), word.depth), chart.settings.amplitude_cap)
        for word, rk in zip(chart.words, r)
    ]
    return concat_all(parts, chart.system.m)


def _group_element(chart: SectionChart, r: np.ndarray) -> np.ndarray:
    drift = chart.system.drift_generator()
    gens = chart.system.control_generators()
    n = chart.system.dimension
    g = np.eye(n, dtype=complex)
    for word, rk in zip(chart.words, r):
        if rk == 0.0:
            continue
        g = word_element(word, xi_from_r(float(rk), word.depth), drift, gens) @ g
    return g


def forward_map(chart: SectionChart, x: np.ndarray, r: Sequence[float]) -> np.ndarray:
    """F1(x, r) = R_n ... R_1 x."""
    r = np.asarray(r, dtype=float)
    if r.shape != (chart.dimension,):
        raise ValueError(f"expected {chart.dimension} chart coordinates, got {r.shape}")
    norm = float(np.linalg.norm(r))
    if norm > chart.trust_radius:
        raise TrustRadiusError(f"|r| = {norm:.3e} exceeds trust radius {chart.trust_radius:.3e}")
    if norm == 0.0:
        return np.array(x, copy=True)
    return _group_element(chart, r) @ x


def _snap_small(chart: SectionChart, r: np.ndarray) -> np.ndarray:
    """Zero the coordinates whose realizing amplitudes would exceed the cap."""
    s = chart.settings
    out = r.copy()
    for k, word in enumerate(chart.words):
        mag = abs(out[k]) ** (1.0 / word.depth)
        if 0.0 < mag < s.xi_floor:
            kmax = max(abs(c) for row in word.kappa for c in row)
            if kmax * mag ** (1 - 2 * word.alpha) > s.amplitude_cap:
                out[k] = 0.0
    return out


def _clip(r: np.ndarray, bound: float) -> np.ndarray:
    norm = float(np.linalg.norm(r))
    return r if norm <= bound else r * (bound / norm)


def _solve(chart: SectionChart, z: np.ndarray, r0: np.ndarray) -> Tuple[np.ndarray, float, int]:
    """Damped Newton on R(r) = coords log(G(r) z^dagger); returns (r, error, iterations)."""
    s = chart.settings
    zd = dagger(z)

    def residual(r):
        return su_coords(su_log(_group_element(chart, r) @ zd))

    def error(r):
        return hs_norm(_group_element(chart, r) - z)

    n = chart.dimension
    r = _snap_small(chart, _clip(r0, chart.trust_radius))
    res = residual(r)
    err = error(r)
    polished = False
    for it in range(1, s.max_iter + 1):
        if err <= s.tol_section:
            if polished:
                return r, err, it
            polished = True
        jac = np.empty((n, n))
        for k in range(n):
            step = np.zeros(n)
            step[k] = s.fd_step
            jac[:, k] = (residual(r + step) - residual(r - step)) / (2 * s.fd_step)
        delta = np.linalg.lstsq(jac, -res, rcond=None)[0]
        t = 1.0
        norm_res = np.linalg.norm(res)
        while True:
            candidate = _snap_small(chart, _clip(r + t * delta, chart.trust_radius))
            cand_res = residual(candidate)
            if np.linalg.norm(cand_res) < norm_res or t < 1.0 / 64:
                break
            t *= 0.5
        if t < 1.0:
            logger.debug(f"Newton step damped to {t:.4g} at iteration {it}")
        cand_err = error(candidate)
        if polished and cand_err > err:
            return r, err, it
        r, res, err = candidate, cand_res, cand_err
        logger.debug(f"Newton iteration {it}: error {err:.3e}")
    return r, err, s.max_iter


def section_coordinates(chart: SectionChart, x: np.ndarray, y: np.ndarray, check_radius: bool = True) -> np.ndarray:
    """Chart coordinates r with F1(x, r) = y to tol_section."""
    s = chart.settings
    z = y @ dagger(x)
    n_level = z.shape[0]
    if hs_norm(z - np.eye(n_level)) <= 1e-14:
        return np.zeros(chart.dimension)

    target = su_coords(su_log(z))
    r0 = np.linalg.solve(chart.jacobian, target)
    if check_radius and np.linalg.norm(r0) > s.safety * chart.radius:
        raise OutOfNeighborhoodError(
            f"target at linear chart radius {np.linalg.norm(r0):.3e} beyond {s.safety * chart.radius:.3e}"
        )

    r, err, iterations = _solve(chart, z, r0)
    if err > s.tol_section:
        if err < 1e-6 and np.any(r == 0.0):
            # a snapped coordinate is the only thing left between r and the target
            raise AmplitudeOverflowError(f"target needs amplitudes beyond cap (error {err:.3e})")
        raise OutOfNeighborhoodError(f"Newton did not converge in {iterations} iterations (error {err:.3e})")
    return r


def _detour(chart: SectionChart, x: np.ndarray, y: np.ndarray) -> ControlSchedule:
    s = chart.settings
    n_level = x.shape[0]
    r_lin = np.linalg.solve(chart.jacobian, su_coords(su_log(y @ dagger(x))))
    offset = np.zeros(chart.dimension)
    for k, word in enumerate(chart.words):
        if word.depth >= 2:
            offset[k] = -math.copysign((DETOUR_FACTOR * s.xi_floor) ** word.depth, r_lin[k])
    w = expm_anti_hermitian(from_coords(chart.jacobian @ offset, n_level)) @ x
    r1 = section_coordinates(chart, x, w)
    reached = forward_map(chart, x, r1)
    r2 = section_coordinates(chart, reached, y)
    return concat(chart_schedule(chart, r1), chart_schedule(chart, r2))


def section(chart: SectionChart, x: np.ndarray, y: np.ndarray) -> ControlSchedule:
    """
    sigma(x, y): a control steering x to y; sigma(x, x) is the zero-time control.

    When y needs a bracket coordinate too small to realize under the amplitude
    cap, the control goes through an intermediate point w that pushes those
    coordinates away from zero in the opposite direction.
    """
    try:
        r = section_coordinates(chart, x, y)
    except AmplitudeOverflowError as e:
        logger.debug(f"detouring around snapped coordinates: {e}")
        return _detour(chart, x, y)
    if not np.any(r):
        return zero_control(chart.system.m)
    return chart_schedule(chart, r)


def _candidate_indices(m: int, depth: int):
    for idx in itertools.product(range(m), repeat=depth):
        if depth >= 2 and idx[0] == idx[1]:
            continue
        yield idx


def _select_words(sys: QuantumSystem, max_depth: int, tol: float = 1e-8) -> Tuple[List[BracketWord], List[np.ndarray]]:
    """Pivoted Gram-Schmidt over brackets ordered by (depth, generation order)."""
    n = sys.dimension * sys.dimension - 1
    basis: List[np.ndarray] = []
    words: List[BracketWord] = []
    brackets: List[np.ndarray] = []

    def residual(v):
        for q in basis:
            v = v - np.dot(q, v) * q
        return v

    for depth in range(1, max_depth + 1):
        candidates = []
        for idx in _candidate_indices(sys.m, depth):
            word = word_from_indices(idx, sys.m)
            xi = word.bracket(sys)
            norm = hs_norm(xi)
            if norm > tol:
                candidates.append((word, xi, su_coords(xi), norm))
        while candidates and len(words) < n:
            best, best_score = None, tol
            for pos, (_, _, v, norm) in enumerate(candidates):
                score = np.linalg.norm(residual(v)) / norm
                if score > best_score:
                    best, best_score = pos, score
            if best is None:
                break
            word, xi, v, _ = candidates.pop(best)
            res = residual(v)
            basis.append(res / np.linalg.norm(res))
            words.append(word)
            brackets.append(xi)
        logger.debug(f"bracket search depth {depth}: {len(words)} of {n} words")
        if len(words) == n:
            break
    return words, brackets


def build_chart(
    sys: QuantumSystem,
    x0: Optional[np.ndarray] = None,
    settings: Optional[SectionSettings] = None,
    calibrate: bool = True,
    seed: int = 0,
) -> SectionChart:
    """
    Build a section chart at ``x0`` (identity by default).

    Raises RankDeficiencyError when the control brackets do not span su(N) within
    ``settings.max_depth`` and ConditionError when the bracket basis is too skewed.
    """
    settings = settings or SectionSettings()
    n_level = sys.dimension
    x0 = np.eye(n_level, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    n = n_level * n_level - 1

    words, brackets = _select_words(sys, settings.max_depth)
    if len(words) < n:
        rank = larc_check(sys.control_generators(), n_level)
        raise RankDeficiencyError(
            f"control brackets span {len(words)} of {n} dimensions (LARC rank {rank})"
        )

    jacobian = np.column_stack([su_coords(b) for b in brackets])
    condition = float(np.linalg.cond(jacobian))
    if condition > settings.condition_bound:
        raise ConditionError(f"bracket basis condition number {condition:.3e} exceeds {settings.condition_bound:.1e}")

    chart = SectionChart(
        system=sys,
        basepoint=x0,
        words=tuple(words),
        brackets=np.array(brackets),
        jacobian=jacobian,
        condition=condition,
        radius=settings.calibration_radius,
        settings=settings,
    )
    if calibrate:
        chart = replace(chart, radius=calibrate_radius(chart, seed=seed))
    logger.info(
        f"Chart built: N={n_level}, depths={chart.depths}, condition={condition:.3g}, radius={chart.radius:.3g}"
    )
    return chart


def _newton_succeeds(chart: SectionChart, rho: float, directions: np.ndarray) -> bool:
    x0 = chart.basepoint
    n_level = chart.system.dimension
    probe = replace(chart, radius=max(rho, chart.radius))
    for d in directions:
        y = expm_anti_hermitian(from_coords(chart.jacobian @ (rho * d), n_level)) @ x0
        try:
            section_coordinates(probe, x0, y, check_radius=False)
        except (OutOfNeighborhoodError, AmplitudeOverflowError, TrustRadiusError):
            return False
    return True


def calibrate_radius(chart: SectionChart, seed: int = 0) -> float:
    """Bisect the linear-preimage radius on Newton success over sampled directions."""
    s = chart.settings
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(s.calibration_directions, chart.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)

    hi = s.calibration_radius
    if _newton_succeeds(chart, hi, directions):
        return hi
    lo = 0.0
    for _ in range(s.calibration_bisections):
        mid = 0.5 * (lo + hi)
        if _newton_succeeds(chart, mid, directions):
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        probe = hi / 2.0
        if not _newton_succeeds(chart, probe, directions):
            raise ChartError(f"chart radius calibration failed below {hi:.3e}")
        lo = probe
    logger.debug(f"calibrated chart radius {lo:.4g}")
    return lo


class ChartAtlas:
    """
    Chart provider for right-invariant systems.

    The chart built at the identity serves every basepoint after right
    translation, so the atlas builds once and relocates.
    """

    def __init__(
        self,
        sys: QuantumSystem,
        settings: Optional[SectionSettings] = None,
        calibrate: bool = True,
        seed: int = 0,
    ):
        self.system = sys
        self.settings = settings or SectionSettings()
        self._calibrate = calibrate
        self._seed = seed
        self._chart: Optional[SectionChart] = None

    @property
    def chart(self) -> SectionChart:
        if self._chart is None:
            self._chart = build_chart(self.system, settings=self.settings, calibrate=self._calibrate, seed=self._seed)
        return self._chart

    def chart_for(self, x: np.ndarray) -> SectionChart:
        return self.chart.at(x)

    @property
    def step_limit(self) -> float:
        """Largest group distance that a single section step should cover."""
        chart = self.chart
        smallest = float(np.linalg.svd(chart.jacobian, compute_uv=False)[-1])
        return chart.settings.safety * chart.radius * smallest
