"""
🪢 Lifting Topology
Path lifting into endpoint fibers and certified paths of controls

This module implements:
- ManifoldPath / FiberPath: sampled paths in SU(N) and in one fiber e^{-1}(y)
- lift: the lifting function C * sigma(anchor, gamma(s)), globalized by
  re-anchoring and geodesic subdivision
- eta: loops at the identity to controls in the identity fiber
- fiber_path_to_eta / connect_in_fiber: certified fiber paths between controls
- phase_class: the PU(N) level-set component label of a control
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.app_config import SCHEMA_VERSION

from .bracket_section import ChartAtlas, section
from .control_space import ControlSchedule, concat, concat_all, drop_prefix, metric, retract, zero_control
from .errors import (
    AnchorDriftError,
    FiberCertificateError,
    LiftError,
    LogBranchError,
    PathError,
    PhaseClassError,
    SectionError,
    SubdivisionLimitError,
)
from .persistence import matrix_from_json, matrix_to_json
from .propagation import (
    QuantumSystem,
    Trajectory,
    arc_length,
    arc_times,
    batch_endpoints,
    endpoint,
    propagators_at,
)
from .su_algebra import (
    dagger,
    distance,
    expm_anti_hermitian,
    from_coords,
    geodesic_point,
    hs_norm,
    log_spectral_norm,
    su_coords,
    su_log,
)

logger = logging.getLogger(__name__)

CLOSED_TOL = 1e-10
ANCHOR_TOL = 1e-9
BRANCH_LIMIT = 0.95 * math.pi


@dataclass(frozen=True, eq=False)
class ManifoldPath:
    """
    Uniformly sampled path s_i = i / (K - 1) in SU(N).

    ``breakpoints`` holds the sample indices of concatenation junctures; lifts
    always re-anchor there.
    """

    points: np.ndarray = field(repr=False)
    breakpoints: Tuple[int, ...] = ()

    def __post_init__(self):
        points = np.array(self.points, dtype=complex)
        if points.ndim != 3 or points.shape[0] < 2 or points.shape[1] != points.shape[2]:
            raise PathError(f"a path needs at least 2 square samples, got shape {points.shape}")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __getitem__(self, i: int) -> np.ndarray:
        return self.points[i]

    @property
    def s(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, len(self))

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def step_bound(self) -> float:
        """max_i dist(gamma(s_i), gamma(s_{i+1}))."""
        return max(distance(a, b) for a, b in zip(self.points[:-1], self.points[1:]))

    @property
    def closed(self) -> bool:
        return hs_norm(self.start - self.end) <= CLOSED_TOL

    def concat(self, other: "ManifoldPath") -> "ManifoldPath":
        """gamma_1 * gamma_2, sharing the juncture sample."""
        if hs_norm(self.end - other.start) > ANCHOR_TOL:
            raise PathError("paths do not meet at the juncture")
        offset = len(self) - 1
        points = np.concatenate((self.points, other.points[1:]))
        breaks = self.breakpoints + (offset,) + tuple(b + offset for b in other.breakpoints)
        return ManifoldPath(points, breaks)

    def reversed(self) -> "ManifoldPath":
        last = len(self) - 1
        return ManifoldPath(self.points[::-1], tuple(sorted(last - b for b in self.breakpoints)))

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> "ManifoldPath":
        return cls(traj.points)

    @classmethod
    def geodesic(cls, x: np.ndarray, y: np.ndarray, samples: int) -> "ManifoldPath":
        points = [geodesic_point(x, y, u) for u in np.linspace(0.0, 1.0, samples)]
        points[-1] = np.array(y, dtype=complex)
        return cls(np.array(points))

    @classmethod
    def constant(cls, x: np.ndarray, samples: int = 2) -> "ManifoldPath":
        return cls(np.repeat(np.array(x, dtype=complex)[None], samples, axis=0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "N": int(self.points.shape[1]),
            "samples": [matrix_to_json(p) for p in self.points],
            "breakpoints": list(self.breakpoints),
            "step_bound": self.step_bound,
            "closed": self.closed,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ManifoldPath":
        try:
            points = np.array([matrix_from_json(p) for p in data["samples"]])
        except (KeyError, TypeError, ValueError) as e:
            raise PathError(f"malformed path file: {e}") from e
        return cls(points, tuple(int(b) for b in data.get("breakpoints", [])))


def loop_around(axis: np.ndarray, radius: float = 0.1, samples: int = 16, base: Optional[np.ndarray] = None) -> ManifoldPath:
    """
    Small contractible loop exp(r sin(2 pi s) A) exp(r (1 - cos(2 pi s)) B) x.

    ``axis`` is a pair of su(N) directions (A, B), stacked.
    """
    a, b = np.asarray(axis[0], dtype=complex), np.asarray(axis[1], dtype=complex)
    n = a.shape[0]
    base = np.eye(n, dtype=complex) if base is None else np.array(base, dtype=complex)
    points = []
    for s in np.linspace(0.0, 1.0, samples):
        theta = 2 * math.pi * s
        u = expm_anti_hermitian(radius * math.sin(theta) * a) @ expm_anti_hermitian(radius * (1 - math.cos(theta)) * b)
        points.append(u @ base)
    points[-1] = points[0]
    return ManifoldPath(np.array(points))


@dataclass(frozen=True, eq=False)
class FiberPath:
    """Controls K_0..K_p with a certificate of fiber membership and metric continuity."""

    controls: Tuple[ControlSchedule, ...]
    target: np.ndarray = field(repr=False)
    deviation: float
    step: float
    fiber_tol: float
    path_step: float

    @classmethod
    def certify(
        cls,
        sys: QuantumSystem,
        controls: Sequence[ControlSchedule],
        target: np.ndarray,
        fiber_tol: float = 1e-8,
        path_step: float = 0.5,
        threads: int = 1,
    ) -> "FiberPath":
        """Measure deviation and step; raise FiberCertificateError when either bound fails."""
        controls = tuple(controls)
        if not controls:
            raise FiberCertificateError("a fiber path needs at least one control")
        ends = batch_endpoints(sys, controls, threads)
        deviation = max(hs_norm(u - target) for u in ends)
        step = max((metric(a, b) for a, b in zip(controls[:-1], controls[1:])), default=0.0)
        if deviation > fiber_tol:
            raise FiberCertificateError(f"fiber deviation {deviation:.3e} exceeds {fiber_tol:.1e}")
        if step > path_step:
            raise FiberCertificateError(f"metric step {step:.3e} exceeds {path_step:.3g}")
        logger.info(f"Fiber path certified: {len(controls)} controls, deviation {deviation:.2e}, step {step:.3g}")
        return cls(controls, np.array(target, dtype=complex), deviation, step, fiber_tol, path_step)

    @property
    def first(self) -> ControlSchedule:
        return self.controls[0]

    @property
    def last(self) -> ControlSchedule:
        return self.controls[-1]

    def __len__(self) -> int:
        return len(self.controls)

    def reversed(self) -> "FiberPath":
        return FiberPath(self.controls[::-1], self.target, self.deviation, self.step, self.fiber_tol, self.path_step)

    def concat(self, other: "FiberPath") -> "FiberPath":
        """Join two certified paths over the same target; the juncture step is re-measured."""
        if hs_norm(self.target - other.target) > self.fiber_tol:
            raise PathError("fiber paths lie over different targets")
        tail = other.controls[1:] if self.last == other.first else other.controls
        joint = metric(self.last, tail[0]) if tail else 0.0
        step = max(self.step, other.step, joint)
        path_step = min(self.path_step, other.path_step)
        if step > path_step:
            raise FiberCertificateError(f"juncture step {joint:.3e} exceeds {path_step:.3g}")
        return FiberPath(
            self.controls + tuple(tail),
            self.target,
            max(self.deviation, other.deviation),
            step,
            max(self.fiber_tol, other.fiber_tol),
            path_step,
        )

    def metric_length(self) -> float:
        return math.fsum(metric(a, b) for a, b in zip(self.controls[:-1], self.controls[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": SCHEMA_VERSION,
            "controls": [c.to_dict() for c in self.controls],
            "target": matrix_to_json(self.target),
            "certificate": {
                "deviation": self.deviation,
                "step": self.step,
                "fiber_tol": self.fiber_tol,
                "path_step": self.path_step,
                "metric_length": self.metric_length(),
            },
        }


def _bridge(
    sys: QuantumSystem,
    atlas: ChartAtlas,
    anchor: ControlSchedule,
    anchor_point: np.ndarray,
    target: np.ndarray,
    depth: int,
    max_depth: int,
) -> ControlSchedule:
    """anchor * sigma(anchor_point, target), halving the gap geodesically on chart failure."""
    try:
        return concat(anchor, section(atlas.chart_for(anchor_point), anchor_point, target))
    except SectionError as e:
        if depth >= max_depth:
            raise SubdivisionLimitError(f"subdivision depth {max_depth} exhausted: {e}") from e
        logger.debug(f"subdividing lift step at depth {depth + 1}: {e.code}")
        mid = geodesic_point(anchor_point, target, 0.5)
        halfway = _bridge(sys, atlas, anchor, anchor_point, mid, depth + 1, max_depth)
        return _bridge(sys, atlas, halfway, mid, target, depth + 1, max_depth)


def lift(
    sys: QuantumSystem,
    c: ControlSchedule,
    path: ManifoldPath,
    atlas: ChartAtlas,
    fiber_tol: float = 1e-8,
    strategy: str = "auto",
    max_depth: int = 12,
) -> List[ControlSchedule]:
    """
    Lift ``path`` to controls L_0 = C, ..., L_{K-1} with endpoint(L_i) = path[i].

    ``strategy="auto"`` keeps one anchor until a section fails; ``"every"``
    re-anchors at each sample so that lifts of nearby paths stay close.
    Anchors sit on path samples, which makes lifts of concatenated paths equal
    the chained lifts.
    """
    if strategy not in ("auto", "every"):
        raise ValueError(f"unknown lift strategy {strategy!r}")
    start = endpoint(sys, c)
    drift = hs_norm(start - path.start)
    if drift > ANCHOR_TOL:
        raise AnchorDriftError(f"control endpoint is {drift:.3e} away from the path start")

    lifts = [c]
    anchor, anchor_point, anchor_index = c, path.start, 0
    breaks = set(path.breakpoints)
    re_anchors = 0
    for i in range(1, len(path)):
        target = path[i]
        if strategy == "every" or (i - 1) in breaks:
            if anchor_index != i - 1:
                anchor, anchor_point, anchor_index = lifts[i - 1], path[i - 1], i - 1
                re_anchors += 1
        try:
            li = concat(anchor, section(atlas.chart_for(anchor_point), anchor_point, target))
        except SectionError as e:
            if anchor_index != i - 1:
                logger.debug(f"re-anchoring lift at sample {i - 1}: {e.code}")
                anchor, anchor_point, anchor_index = lifts[i - 1], path[i - 1], i - 1
                re_anchors += 1
            li = _bridge(sys, atlas, anchor, anchor_point, target, 0, max_depth)
            if strategy == "auto":
                anchor, anchor_point, anchor_index = li, target, i
        lifts.append(li)

    for i, li in enumerate(lifts):
        err = hs_norm(endpoint(sys, li) - path[i])
        if err > fiber_tol:
            raise AnchorDriftError(f"lift sample {i} misses the path by {err:.3e}")
    logger.debug(f"lift finished: {len(lifts)} samples, {re_anchors} re-anchors")
    return lifts


def eta(
    sys: QuantumSystem,
    loop: ManifoldPath,
    atlas: ChartAtlas,
    fiber_tol: float = 1e-8,
    strategy: str = "auto",
) -> ControlSchedule:
    """eta(gamma) = lift(zero control, gamma) at s = 1, for loops at the identity."""
    n = sys.dimension
    if not loop.closed:
        raise PathError("eta needs a closed loop")
    if hs_norm(loop.start - np.eye(n)) > ANCHOR_TOL:
        raise PathError("eta needs a loop based at the identity")
    return lift(sys, zero_control(sys.m), loop, atlas, fiber_tol, strategy)[-1]


def _pieces(sys: QuantumSystem, points: np.ndarray, atlas: ChartAtlas, max_depth: int) -> List[ControlSchedule]:
    """sigma(gamma_i, gamma_{i+1}) for consecutive samples; their concatenation is eta(gamma)."""
    zero = zero_control(sys.m)
    return [_bridge(sys, atlas, zero, a, b, 0, max_depth) for a, b in zip(points[:-1], points[1:])]


def _sample_count(sys: QuantumSystem, controls: Sequence[ControlSchedule], samples: int, step_limit: float) -> int:
    """Samples M + 1 so that each arc-length step of every trajectory stays inside one chart."""
    length = max((arc_length(sys, c) for c in controls), default=0.0)
    return max(samples, int(math.ceil(length / step_limit)) + 1)


def _certified_family(
    sys: QuantumSystem,
    member: Callable[[float], ControlSchedule],
    target: np.ndarray,
    fiber_tol: float,
    path_step: float,
    grid_points: int,
    max_refinements: int,
    threads: int,
) -> FiberPath:
    """
    Sample a one-parameter family on [0, 1], bisecting only the intervals whose metric step is too large.

    Members and steps are cached, so a refinement level costs one new member per split interval.
    """
    members: Dict[float, ControlSchedule] = {}
    steps: Dict[Tuple[float, float], float] = {}

    def at(u: float) -> ControlSchedule:
        if u not in members:
            members[u] = member(u)
        return members[u]

    def step(a: float, b: float) -> float:
        if (a, b) not in steps:
            steps[(a, b)] = metric(at(a), at(b))
        return steps[(a, b)]

    grid = [float(u) for u in np.linspace(0.0, 1.0, grid_points)]
    for level in range(max_refinements + 1):
        wide = {a for a, b in zip(grid[:-1], grid[1:]) if step(a, b) > path_step}
        if not wide:
            break
        if level == max_refinements:
            worst = max(step(a, b) for a, b in zip(grid[:-1], grid[1:]))
            raise FiberCertificateError(
                f"metric step {worst:.3e} above {path_step:.3g} after {max_refinements} refinements"
            )
        refined = [grid[0]]
        for a, b in zip(grid[:-1], grid[1:]):
            if a in wide:
                refined.append(0.5 * (a + b))
            refined.append(b)
        logger.debug(f"refinement {level + 1}: split {len(wide)} intervals, {len(refined)} parameter samples")
        grid = refined
    return FiberPath.certify(sys, [at(u) for u in grid], target, fiber_tol, path_step, threads)


def fiber_path_to_eta(
    sys: QuantumSystem,
    c: ControlSchedule,
    atlas: ChartAtlas,
    samples: int = 2,
    fiber_tol: float = 1e-8,
    path_step: float = 0.5,
    grid_points: int = 9,
    max_refinements: int = 20,
    max_depth: int = 12,
    homotopy: str = "prefix",
    threads: int = 1,
) -> FiberPath:
    """
    Certified fiber path from C to eta(tau(C)), the lift of C's own trajectory.

    The trajectory is cut once at equal arc length, t_0 < ... < t_M with at
    least ``samples`` points and every step inside one chart, into pieces
    P_i = sigma(U(t_i), U(t_{i+1})); eta(tau(C)) is their concatenation.

    ``homotopy="retract"`` is K(s) = rho_s(C) * Lambda(s), where Lambda(s)
    lifts the trajectory over [tau, T] with tau = (1 - s) T as
    sigma(U(tau), U(t_{j+1})) * P_{j+1} * ... * P_{M-1}. ``"prefix"`` is the
    mirror image P_0 * ... * P_{j-1} * sigma(U(t_j), U(tau)) * C|[tau, T] with
    tau = s T. Both move a single piece at a time. The prefix form shifts only
    the tail of C in time; the retract form shifts every later piece.
    """
    if homotopy not in ("prefix", "retract"):
        raise ValueError(f"unknown homotopy {homotopy!r}")
    y = endpoint(sys, c)
    if c.is_zero_time:
        return FiberPath.certify(sys, [c], y, fiber_tol, path_step, threads)

    m = sys.m
    total = c.final_time
    points = _sample_count(sys, [c], samples, atlas.step_limit)
    times = arc_times(sys, c, points)
    grid = propagators_at(sys, c, times)
    pieces = _pieces(sys, grid, atlas, max_depth)
    eta_c = concat_all(pieces, m)

    def trajectory_at(t: float) -> np.ndarray:
        return propagators_at(sys, c, np.array([t]))[0]

    def prefix_member(s: float) -> ControlSchedule:
        if s <= 0.0:
            return c
        if s >= 1.0:
            return eta_c
        tau = s * total
        j = int(np.searchsorted(times, tau, side="left")) - 1
        if tau == times[j + 1]:
            return concat(concat_all(pieces[: j + 1], m), drop_prefix(c, tau))
        moving = _bridge(sys, atlas, zero_control(m), grid[j], trajectory_at(tau), 0, max_depth)
        return concat_all(pieces[:j] + [moving, drop_prefix(c, tau)], m)

    def retract_member(s: float) -> ControlSchedule:
        if s <= 0.0:
            return c
        if s >= 1.0:
            return eta_c
        tau = (1.0 - s) * total
        j = int(np.searchsorted(times, tau, side="right")) - 1
        if tau == times[j]:
            return concat(retract(c, s), concat_all(pieces[j:], m))
        moving = _bridge(sys, atlas, zero_control(m), trajectory_at(tau), grid[j + 1], 0, max_depth)
        return concat_all([retract(c, s), moving] + pieces[j + 1 :], m)

    member = prefix_member if homotopy == "prefix" else retract_member
    path = _certified_family(sys, member, y, fiber_tol, path_step, grid_points, max_refinements, threads)
    logger.info(f"fiber path to eta: {len(path)} controls over {points - 1} pieces ({homotopy})")
    return path


def _branch_chain(
    gamma_a: np.ndarray,
    gamma_b: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator,
    depth: int,
    max_midpoints: int,
) -> List[np.ndarray]:
    """Reference paths from gamma_a to gamma_b whose pointwise logs stay off the cut locus."""
    worst = max(log_spectral_norm(dagger(a) @ b) for a, b in zip(gamma_a, gamma_b))
    if worst <= BRANCH_LIMIT:
        return [gamma_a, gamma_b]
    if depth >= max_midpoints:
        raise LogBranchError(f"pointwise log still near the branch cut ({worst:.4f}) after {max_midpoints} midpoints")
    logger.warning(f"inserting intermediate loop: pointwise log angle {worst:.4f}")
    n = y.shape[0]
    k = gamma_a.shape[0]
    log_y = su_log(y)
    if depth == 0:
        bump = np.zeros((n, n), dtype=complex)
    else:
        coords = rng.normal(size=n * n - 1)
        bump = from_coords(coords / np.linalg.norm(coords), n)
    mid = []
    for s in np.linspace(0.0, 1.0, k):
        mid.append(expm_anti_hermitian(s * log_y) @ expm_anti_hermitian(math.sin(math.pi * s) * bump))
    mid[0] = gamma_a[0]
    mid[-1] = gamma_a[-1]
    mid = np.array(mid)
    left = _branch_chain(gamma_a, mid, y, rng, depth + 1, max_midpoints)
    right = _branch_chain(mid, gamma_b, y, rng, depth + 1, max_midpoints)
    return left + right[1:]


def _interpolate(gamma_a: np.ndarray, gamma_b: np.ndarray, u: float) -> np.ndarray:
    """Pointwise group geodesic Gamma_u(s) = gamma_a(s) exp(u log(gamma_a(s)^dagger gamma_b(s)))."""
    if u == 0.0:
        return gamma_a
    return np.array([a @ expm_anti_hermitian(u * su_log(dagger(a) @ b)) for a, b in zip(gamma_a, gamma_b)])


def connect_in_fiber(
    sys: QuantumSystem,
    c: ControlSchedule,
    c_prime: ControlSchedule,
    atlas: ChartAtlas,
    samples: int = 2,
    fiber_tol: float = 1e-8,
    path_step: float = 0.5,
    grid_points: int = 9,
    max_refinements: int = 20,
    max_depth: int = 12,
    max_midpoints: int = 4,
    homotopy: str = "prefix",
    seed: int = 0,
    threads: int = 1,
) -> FiberPath:
    """
    Certified fiber path from C to C' over their common endpoint y.

    Stages: C -> eta(tau(C)); the loop homotopy u -> eta(Gamma_u) between the
    two trajectories; eta(tau(C')) -> C' by reversing the first stage for C'.
    All stages share one sample grid, sized at half the chart step so that the
    interpolated loops Gamma_u stay inside single charts too.
    """
    y = endpoint(sys, c)
    gap = hs_norm(endpoint(sys, c_prime) - y)
    if gap > ANCHOR_TOL:
        raise PathError(f"controls end {gap:.3e} apart; they are not in one fiber")
    if c == c_prime:
        return FiberPath.certify(sys, [c], y, fiber_tol, path_step, threads)

    points = _sample_count(sys, [c, c_prime], samples, 0.5 * atlas.step_limit)
    stage_kwargs = dict(
        samples=points,
        fiber_tol=fiber_tol,
        path_step=path_step,
        grid_points=grid_points,
        max_refinements=max_refinements,
        max_depth=max_depth,
        homotopy=homotopy,
        threads=threads,
    )
    first = fiber_path_to_eta(sys, c, atlas, **stage_kwargs)
    last = fiber_path_to_eta(sys, c_prime, atlas, **stage_kwargs).reversed()

    gamma = propagators_at(sys, c, arc_times(sys, c, points))
    gamma_prime = propagators_at(sys, c_prime, arc_times(sys, c_prime, points))
    chain = _branch_chain(gamma, gamma_prime, y, np.random.default_rng(seed), 0, max_midpoints)

    def loop_member(a: np.ndarray, b: np.ndarray) -> Callable[[float], ControlSchedule]:
        return lambda u: concat_all(_pieces(sys, _interpolate(a, b, u), atlas, max_depth), sys.m)

    path = first
    for gamma_a, gamma_b in zip(chain[:-1], chain[1:]):
        stage = _certified_family(
            sys, loop_member(gamma_a, gamma_b), y, fiber_tol, path_step, grid_points, max_refinements, threads
        )
        path = path.concat(stage)
    path = path.concat(last)
    logger.info(f"connected controls in fiber: {len(path)} controls, metric length {path.metric_length():.4g}")
    return path


def phase_class(sys: QuantumSystem, c: ControlSchedule, w: np.ndarray, tol: float = 0.1) -> int:
    """The k minimizing ||endpoint(C) - e^{2 pi i k / N} W||_F."""
    n = sys.dimension
    u = endpoint(sys, c)
    gaps = [hs_norm(u - np.exp(2j * math.pi * k / n) * w) for k in range(n)]
    k = int(np.argmin(gaps))
    if gaps[k] > tol:
        raise PhaseClassError(f"endpoint is {gaps[k]:.3e} from the nearest phase copy of the target")
    return k


def shoot_two_segment(
    sys: QuantumSystem,
    w: np.ndarray,
    rng: np.random.Generator,
    tol: float = 1e-11,
    max_iter: int = 60,
    max_starts: int = 20,
    fd_step: float = 1e-7,
) -> ControlSchedule:
    """
    Newton shooting of a random two-segment schedule onto target W.

    Durations are parametrized as exp(theta) to stay positive; the
    under-determined system is solved with minimum-norm least-squares steps.
    """
    m = sys.m
    wd = dagger(w)

    def build(p: np.ndarray) -> ControlSchedule:
        return ControlSchedule(m, np.exp(p[:2]), p[2:].reshape(2, m))

    def residual(p: np.ndarray) -> np.ndarray:
        return su_coords(su_log(endpoint(sys, build(p)) @ wd))

    for attempt in range(max_starts):
        p = np.concatenate((np.log(rng.uniform(0.3, 1.5, size=2)), rng.uniform(-2.0, 2.0, size=2 * m)))
        res = residual(p)
        for _ in range(max_iter):
            if hs_norm(endpoint(sys, build(p)) - w) <= tol:
                logger.debug(f"two-segment shooting converged on start {attempt + 1}")
                return build(p)
            jac = np.empty((res.shape[0], p.shape[0]))
            for k in range(p.shape[0]):
                dp = np.zeros_like(p)
                dp[k] = fd_step
                jac[:, k] = (residual(p + dp) - residual(p - dp)) / (2 * fd_step)
            step = np.linalg.lstsq(jac, -res, rcond=None)[0]
            t = 1.0
            while t > 1.0 / 64:
                cand = p + t * step
                cand_res = residual(cand)
                if np.linalg.norm(cand_res) < np.linalg.norm(res):
                    break
                t *= 0.5
            else:
                break
            p, res = cand, cand_res
        if hs_norm(endpoint(sys, build(p)) - w) <= tol:
            return build(p)
    raise LiftError(f"two-segment shooting failed after {max_starts} starts")
