"""
🎛️ Control Space
Piecewise-constant controls, their metric, concatenation and retraction

This module implements:
- ControlSchedule: final time plus m channels on one shared segment grid
- The L1-type metric |T_C - T_D| + sum_j int |E_j - F_j| dt, evaluated exactly
  on the merged grid of both step functions
- Concatenation, truncation and the contracting retraction rho_s
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from config.app_config import SCHEMA_VERSION

from .errors import ChannelMismatchError, ControlRangeError, InvalidScheduleError

logger = logging.getLogger(__name__)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """
    A point of the control space: m channels sharing one segment grid.

    Zero-duration segments are dropped on construction, so equal step
    functions built from the same grid compare equal.
    """

    channels: int
    durations: np.ndarray = field(repr=False)
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.channels < 1:
            raise InvalidScheduleError(f"channel count must be >= 1, got {self.channels}")

        durations = np.asarray(self.durations, dtype=float).reshape(-1)
        amplitudes = np.asarray(self.amplitudes, dtype=float).reshape(-1, self.channels)
        if durations.shape[0] != amplitudes.shape[0]:
            raise InvalidScheduleError(
                f"{durations.shape[0]} durations but {amplitudes.shape[0]} amplitude rows"
            )
        if not np.all(np.isfinite(durations)):
            raise InvalidScheduleError("segment durations must be finite")
        if np.any(durations < 0):
            raise InvalidScheduleError("segment durations must be non-negative")
        if not np.all(np.isfinite(amplitudes)):
            raise InvalidScheduleError("amplitudes must be finite reals")

        keep = durations > 0
        object.__setattr__(self, "durations", _frozen(durations[keep]))
        object.__setattr__(self, "amplitudes", _frozen(amplitudes[keep].reshape(-1, self.channels)))

    @classmethod
    def from_segments(cls, segments: Sequence[Tuple[float, Sequence[float]]], channels: Optional[int] = None) -> "ControlSchedule":
        """Build from ``[(duration, [a_1, ..., a_m]), ...]``."""
        if channels is None:
            if not segments:
                raise InvalidScheduleError("channel count required for an empty grid")
            channels = len(segments[0][1])
        durations = [float(d) for d, _ in segments]
        amplitudes = []
        for _, amps in segments:
            amps = list(amps)
            if len(amps) != channels:
                raise ChannelMismatchError(f"segment has {len(amps)} amplitudes, expected {channels}")
            amplitudes.append(amps)
        return cls(channels, np.array(durations), np.array(amplitudes).reshape(-1, channels))

    @property
    def segment_count(self) -> int:
        return int(self.durations.shape[0])

    @property
    def boundaries(self) -> np.ndarray:
        """Segment boundaries ``[0, t_1, ..., T]`` (sequential cumulative sum)."""
        return np.concatenate(([0.0], np.cumsum(self.durations)))

    @property
    def final_time(self) -> float:
        if self.segment_count == 0:
            return 0.0
        return float(np.cumsum(self.durations)[-1])

    @property
    def is_zero_time(self) -> bool:
        return self.segment_count == 0

    def segments(self) -> Iterator[Tuple[float, np.ndarray]]:
        for duration, amps in zip(self.durations, self.amplitudes):
            yield float(duration), amps

    def amplitudes_at(self, times: np.ndarray) -> np.ndarray:
        """Channel values at ``times``; zero at and after the final time."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((times.shape[0], self.channels))
        if self.segment_count == 0:
            return out
        bounds = self.boundaries
        idx = np.searchsorted(bounds, times, side="right") - 1
        valid = (idx >= 0) & (idx < self.segment_count)
        out[valid] = self.amplitudes[idx[valid]]
        return out

    def l1_norm(self) -> float:
        """sum_j int |E_j| dt."""
        return math.fsum((self.durations[:, None] * np.abs(self.amplitudes)).ravel())

    def max_amplitude(self) -> float:
        if self.segment_count == 0:
            return 0.0
        return float(np.max(np.abs(self.amplitudes)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ControlSchedule):
            return NotImplemented
        return (
            self.channels == other.channels
            and np.array_equal(self.durations, other.durations)
            and np.array_equal(self.amplitudes, other.amplitudes)
        )

    def __hash__(self) -> int:
        return hash((self.channels, self.durations.tobytes(), self.amplitudes.tobytes()))

    def __repr__(self) -> str:
        return (
            f"ControlSchedule(channels={self.channels}, segments={self.segment_count}, "
            f"final_time={self.final_time:.6g})"
        )

    def to_dict(self) -> Dict[str, Any]:
        """Control file representation."""
        return {
            "schema": SCHEMA_VERSION,
            "final_time": self.final_time,
            "channels": self.channels,
            "grid": [
                {"duration": float(d), "amplitudes": [float(a) for a in amps]}
                for d, amps in self.segments()
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ControlSchedule":
        try:
            channels = int(data["channels"])
            grid = data["grid"]
            stored_time = float(data["final_time"])
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidScheduleError(f"malformed control file: {e}") from e
        schedule = cls.from_segments(
            [(entry["duration"], entry["amplitudes"]) for entry in grid], channels=channels
        )
        if abs(schedule.final_time - stored_time) > 1e-9 * max(1.0, stored_time):
            raise InvalidScheduleError(
                f"final_time {stored_time} disagrees with grid total {schedule.final_time}"
            )
        return schedule


def zero_control(m: int) -> ControlSchedule:
    """The zero-time control with ``m`` channels."""
    if m < 1:
        raise ControlRangeError(f"channel count must be >= 1, got {m}")
    return ControlSchedule(m, np.zeros(0), np.zeros((0, m)))


def _check_channels(c: ControlSchedule, d: ControlSchedule):
    if c.channels != d.channels:
        raise ChannelMismatchError(f"channel counts differ: {c.channels} vs {d.channels}")


def concat(c: ControlSchedule, d: ControlSchedule) -> ControlSchedule:
    """C * D: the grid of C followed by the grid of D shifted by T_C."""
    _check_channels(c, d)
    if d.is_zero_time:
        return c
    if c.is_zero_time:
        return d
    return ControlSchedule(
        c.channels,
        np.concatenate((c.durations, d.durations)),
        np.vstack((c.amplitudes, d.amplitudes)),
    )


def concat_all(schedules: Sequence[ControlSchedule], channels: int) -> ControlSchedule:
    """Left-to-right concatenation of many schedules in one allocation."""
    parts = [s for s in schedules if not s.is_zero_time]
    for s in schedules:
        if s.channels != channels:
            raise ChannelMismatchError(f"channel counts differ: {s.channels} vs {channels}")
    if not parts:
        return zero_control(channels)
    return ControlSchedule(
        channels,
        np.concatenate([s.durations for s in parts]),
        np.vstack([s.amplitudes for s in parts]),
    )


def metric(c: ControlSchedule, d: ControlSchedule) -> float:
    """Distance |T_C - T_D| + sum_j int_0^inf |E_j - F_j| dt on the merged grid."""
    _check_channels(c, d)
    time_term = abs(c.final_time - d.final_time)
    grid = np.union1d(c.boundaries, d.boundaries)
    if grid.shape[0] < 2:
        return time_term
    widths = np.diff(grid)
    mids = grid[:-1] + 0.5 * widths
    diff = np.abs(c.amplitudes_at(mids) - d.amplitudes_at(mids))
    return time_term + math.fsum((widths[:, None] * diff).ravel())


def truncate(c: ControlSchedule, t_prime: float) -> ControlSchedule:
    """Restriction of C to [0, T']."""
    total = c.final_time
    if not (0.0 <= t_prime <= total):
        raise ControlRangeError(f"truncation time {t_prime} outside [0, {total}]")
    if t_prime == total:
        return c
    if t_prime == 0.0:
        return zero_control(c.channels)
    bounds = c.boundaries
    idx = int(np.searchsorted(bounds, t_prime, side="left"))
    durations = np.array(c.durations[:idx], copy=True)
    durations[-1] = t_prime - bounds[idx - 1]
    return ControlSchedule(c.channels, durations, c.amplitudes[:idx])


def drop_prefix(c: ControlSchedule, t_prime: float) -> ControlSchedule:
    """Restriction of C to [T', T], shifted to start at time 0."""
    total = c.final_time
    if not (0.0 <= t_prime <= total):
        raise ControlRangeError(f"cut time {t_prime} outside [0, {total}]")
    if t_prime == 0.0:
        return c
    if t_prime == total:
        return zero_control(c.channels)
    bounds = c.boundaries
    idx = int(np.searchsorted(bounds, t_prime, side="right")) - 1
    durations = np.array(c.durations[idx:], copy=True)
    durations[0] = bounds[idx + 1] - t_prime
    return ControlSchedule(c.channels, durations, c.amplitudes[idx:])


def retract(c: ControlSchedule, s: float) -> ControlSchedule:
    """rho_s(C) = truncate(C, (1 - s) T); rho_0 is the identity, rho_1 the zero control."""
    if not (0.0 <= s <= 1.0):
        raise ControlRangeError(f"retraction parameter {s} outside [0, 1]")
    if s == 0.0:
        return c
    if s == 1.0:
        return zero_control(c.channels)
    return truncate(c, min((1.0 - s) * c.final_time, c.final_time))


def random_schedule(
    m: int,
    rng: np.random.Generator,
    segments: Optional[int] = None,
    max_duration: float = 1.0,
    max_amplitude: float = 2.0,
) -> ControlSchedule:
    """Random piecewise-constant schedule used by tests and the verify suite."""
    if segments is None:
        segments = int(rng.integers(1, 6))
    durations = rng.uniform(0.05, max_duration, size=segments)
    amplitudes = rng.uniform(-max_amplitude, max_amplitude, size=(segments, m))
    return ControlSchedule(m, durations, amplitudes)


def jitter(
    c: ControlSchedule,
    scale: float,
    rng: np.random.Generator,
) -> ControlSchedule:
    """Perturb amplitudes and durations by relative noise of size ``scale``."""
    if c.is_zero_time:
        return c
    durations = c.durations * (1.0 + scale * rng.uniform(-1.0, 1.0, size=c.durations.shape))
    amplitudes = c.amplitudes + scale * rng.uniform(-1.0, 1.0, size=c.amplitudes.shape)
    return ControlSchedule(c.channels, np.maximum(durations, 0.0), amplitudes)
