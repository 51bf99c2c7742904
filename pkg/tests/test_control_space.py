import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from control_engine.control_space import (
    ControlSchedule,
    concat,
    concat_all,
    drop_prefix,
    jitter,
    metric,
    retract,
    truncate,
    zero_control,
)
from control_engine.errors import ChannelMismatchError, ControlRangeError, FormatError, InvalidScheduleError
from tests.strategies import schedules


def test_zero_control():
    z = zero_control(2)
    assert z.is_zero_time
    assert z.final_time == 0.0
    assert z.channels == 2
    with pytest.raises(ControlRangeError):
        zero_control(0)


def test_zero_duration_segments_are_dropped():
    c = ControlSchedule.from_segments([(0.5, [1.0]), (0.0, [3.0]), (0.25, [-1.0])])
    assert c.segment_count == 2
    assert c.final_time == pytest.approx(0.75)
    assert c == ControlSchedule.from_segments([(0.5, [1.0]), (0.25, [-1.0])])


@pytest.mark.parametrize(
    "durations, amplitudes",
    [
        ([-0.1], [[1.0]]),
        ([np.inf], [[1.0]]),
        ([0.1], [[np.nan]]),
        ([0.1, 0.2], [[1.0]]),
    ],
)
def test_invalid_schedules_are_rejected(durations, amplitudes):
    with pytest.raises(InvalidScheduleError):
        ControlSchedule(1, np.array(durations), np.array(amplitudes))


def test_amplitudes_vanish_after_final_time():
    c = ControlSchedule.from_segments([(1.0, [2.0, -1.0])])
    np.testing.assert_array_equal(c.amplitudes_at([0.0, 0.5, 1.0, 3.0]), [[2, -1], [2, -1], [0, 0], [0, 0]])


def test_concat_shifts_second_grid():
    c = ControlSchedule.from_segments([(1.0, [1.0])])
    d = ControlSchedule.from_segments([(0.5, [-2.0])])
    cd = concat(c, d)
    assert cd.final_time == pytest.approx(1.5)
    np.testing.assert_array_equal(cd.amplitudes_at([0.5, 1.25]), [[1.0], [-2.0]])


def test_concat_with_zero_control_is_identity():
    c = ControlSchedule.from_segments([(1.0, [1.0, 0.0])])
    assert concat(c, zero_control(2)) is c
    assert concat(zero_control(2), c) is c


def test_channel_mismatch():
    with pytest.raises(ChannelMismatchError):
        concat(zero_control(1), zero_control(2))
    with pytest.raises(ChannelMismatchError):
        metric(zero_control(1), zero_control(2))
    with pytest.raises(ChannelMismatchError):
        concat_all([zero_control(1)], channels=2)


@given(c=schedules(), d=schedules(), e=schedules())
@settings(max_examples=60, deadline=None)
def test_concat_is_associative(c, d, e):
    assert metric(concat(concat(c, d), e), concat(c, concat(d, e))) <= 1e-12


@given(c=schedules(), d=schedules(), e=schedules())
@settings(max_examples=60, deadline=None)
def test_metric_axioms(c, d, e):
    assert metric(c, c) == 0.0
    assert metric(c, d) == pytest.approx(metric(d, c), abs=1e-12)
    assert metric(c, e) <= metric(c, d) + metric(d, e) + 1e-9


@given(c=schedules(), d=schedules(), e=schedules())
@settings(max_examples=60, deadline=None)
def test_metric_is_left_invariant(c, d, e):
    assert metric(concat(c, d), concat(c, e)) == pytest.approx(metric(d, e), abs=1e-9)


@given(c=schedules())
@settings(max_examples=40, deadline=None)
def test_distance_to_zero_control(c):
    assert metric(zero_control(2), c) == pytest.approx(c.final_time + c.l1_norm(), abs=1e-12)


@given(c=schedules(), u=st.floats(min_value=0.0, max_value=1.0))
@settings(max_examples=60, deadline=None)
def test_truncate_and_drop_prefix_split_the_schedule(c, u):
    t = u * c.final_time
    head, tail = truncate(c, t), drop_prefix(c, t)
    assert head.final_time == pytest.approx(t, abs=1e-12)
    assert metric(concat(head, tail), c) <= 1e-12


def test_truncate_out_of_range():
    c = ControlSchedule.from_segments([(1.0, [1.0])])
    with pytest.raises(ControlRangeError):
        truncate(c, 1.5)
    with pytest.raises(ControlRangeError):
        drop_prefix(c, -0.1)


def test_truncate_at_final_time_returns_schedule():
    c = ControlSchedule.from_segments([(1.0, [1.0]), (0.5, [2.0])])
    assert truncate(c, c.final_time) is c
    assert truncate(c, 0.0).is_zero_time


@given(c=schedules())
@settings(max_examples=40, deadline=None)
def test_retraction_endpoints(c):
    assert retract(c, 0.0) is c
    assert retract(c, 1.0).is_zero_time
    half = retract(c, 0.5)
    assert half.final_time == pytest.approx(0.5 * c.final_time, abs=1e-12)
    with pytest.raises(ControlRangeError):
        retract(c, 1.5)


def test_retraction_is_continuous_in_s():
    c = ControlSchedule.from_segments([(1.0, [1.0, -1.0]), (1.0, [0.5, 2.0])])
    gaps = [metric(retract(c, s), retract(c, s + 1e-3)) for s in np.linspace(0.0, 0.99, 12)]
    assert max(gaps) < 1e-2


def test_dict_round_trip():
    c = ControlSchedule.from_segments([(0.4, [0.8, -0.3]), (0.6, [-0.5, 1.1])])
    data = c.to_dict()
    assert data["final_time"] == pytest.approx(1.0)
    assert ControlSchedule.from_dict(data) == c


def test_from_dict_rejects_inconsistent_final_time():
    data = ControlSchedule.from_segments([(0.4, [0.8])]).to_dict()
    data["final_time"] = 2.0
    with pytest.raises((FormatError, InvalidScheduleError)):
        ControlSchedule.from_dict(data)


def _jitter_bound(c):
    """d(C, jitter(C, eps)) / eps for eps <= 1e-3: shifted boundaries, tail and amplitude noise."""
    if c.is_zero_time:
        return 0.0
    peak = c.max_amplitude() + 1.0
    return c.final_time * (1.0 + c.channels * (c.segment_count + 2) * 2.0 * peak)


@given(c=schedules(), eps=st.floats(min_value=1e-7, max_value=1e-3), seed=st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_metric_is_continuous_under_jitter(c, eps, seed):
    rng = np.random.default_rng(seed)
    assert metric(c, jitter(c, eps, rng)) <= _jitter_bound(c) * eps + 1e-12
    assert metric(c, jitter(c, 0.0, rng)) <= 1e-12


@given(c=schedules(), d=schedules(), eps=st.floats(min_value=1e-7, max_value=1e-3), seed=st.integers(0, 2**16))
@settings(max_examples=60, deadline=None)
def test_concat_is_continuous(c, d, eps, seed):
    rng = np.random.default_rng(seed)
    near = concat(jitter(c, eps, rng), jitter(d, eps, rng))
    assert metric(concat(c, d), near) <= 1000.0 * eps
