from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from control_engine.control_space import ControlSchedule, zero_control
from control_engine.errors import (
    DegenerateCurveError,
    FormatError,
    FrameError,
    LarcViolationError,
    ProjectiveFiberError,
    SpeedViolationError,
)
from control_engine.persistence import read_json
from control_engine.su_algebra import PAULI_X, PAULI_Z
from features.qubit_frame import (
    control_from_curve,
    curve_from_json,
    curve_to_dict,
    frame_constants,
    frame_from_function,
    integrate_frame,
    reconstruct_amplitudes,
    segment_speeds,
    su2_component_invariant,
    to_bloch,
    write_frame_csv,
)

DEMO = Path(__file__).resolve().parents[1] / "demo_data"


@pytest.fixture
def constants():
    return frame_constants(PAULI_Z, PAULI_X)


def _great_circle(times, speed=2.0):
    return np.stack([np.cos(speed * times), -np.sin(speed * times), np.zeros_like(times)], axis=1)


def test_pauli_frame_constants(constants):
    assert constants.alpha == pytest.approx(2.0)
    assert constants.beta == pytest.approx(0.0, abs=1e-15)
    assert constants.gamma == pytest.approx(2.0)
    np.testing.assert_allclose(to_bloch(constants.a0), [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(to_bloch(constants.b0), [0, -1, 0], atol=1e-15)
    np.testing.assert_allclose(to_bloch(constants.c0), [0, 0, 1], atol=1e-15)
    assert constants.orientation == -1.0


def test_tilted_drift_gives_nonzero_beta():
    tilted = frame_constants(PAULI_Z + 0.5 * PAULI_X, PAULI_X)
    assert tilted.alpha == pytest.approx(2.0)
    assert tilted.beta == pytest.approx(1.0)
    assert tilted.gamma == pytest.approx(2.0)


def test_collinear_pair_violates_larc():
    with pytest.raises(LarcViolationError):
        frame_constants(PAULI_X, 2.0 * PAULI_X)
    with pytest.raises(FrameError):
        frame_constants(np.diag([1.0, 0.0, -1.0]), np.diag([0.0, 1.0, -1.0]))


def test_free_precession_traces_great_circle(qubit_system):
    c = ControlSchedule.from_segments([(2.0, [0.0])])
    frame = integrate_frame(qubit_system, c, samples=41)
    np.testing.assert_allclose(frame.bloch(), _great_circle(frame.times), atol=1e-12)


@pytest.mark.parametrize("method", ["conjugation", "ode"])
def test_frame_stays_orthonormal(qubit_system, schedule_factory, method):
    frame = integrate_frame(qubit_system, schedule_factory(m=1), samples=51, method=method)
    assert frame.gram_deviation() <= 1e-8
    np.testing.assert_allclose(to_bloch(frame.a[0]), [1, 0, 0], atol=1e-12)


def test_ode_and_conjugation_agree(qubit_system, schedule_factory):
    c = schedule_factory(m=1, segments=6)
    exact = integrate_frame(qubit_system, c, samples=81)
    numeric = integrate_frame(qubit_system, c, samples=81, method="ode")
    assert exact.distance_to(numeric) <= 1e-8


def test_frame_rejects_bad_input(qubit_system, su2_system):
    c = ControlSchedule.from_segments([(1.0, [0.5])])
    with pytest.raises(FrameError):
        integrate_frame(qubit_system, c, method="euler")
    with pytest.raises(FrameError):
        integrate_frame(qubit_system, c, times=[0.0, 2.0])
    with pytest.raises(FrameError):
        integrate_frame(su2_system, zero_control(2))


def test_segment_speed_is_alpha(qubit_system, schedule_factory):
    c = schedule_factory(m=1, max_amplitude=1.0)
    np.testing.assert_allclose(segment_speeds(qubit_system, c), 2.0, atol=1e-6)


def test_great_circle_needs_amplitude_minus_beta_over_gamma(constants):
    times = np.linspace(0.0, 1.0, 201)
    eps = reconstruct_amplitudes(times, _great_circle(times), constants)
    np.testing.assert_allclose(eps, -constants.beta / constants.gamma, atol=1e-9)


def test_piecewise_control_round_trip(qubit_system, constants):
    c = ControlSchedule.from_segments([(1.0, [0.7]), (1.0, [-0.4])])
    times = np.linspace(0.0, 2.0, 401)
    frame = integrate_frame(qubit_system, c, times=times)
    eps = reconstruct_amplitudes(times, frame.a, constants)
    np.testing.assert_allclose(eps[5:195], 0.7, atol=1e-3)
    np.testing.assert_allclose(eps[205:396], -0.4, atol=1e-3)


def test_smooth_control_reconstruction_converges(constants):
    def amplitude(t):
        return 0.5 * np.cos(t) + 0.2

    errors, steps = [], []
    for k in (101, 201, 401):
        times = np.linspace(0.0, 2.0, k)
        frame = frame_from_function(constants, amplitude, times)
        eps = reconstruct_amplitudes(times, frame.a, constants)
        errors.append(float(np.max(np.abs(eps - amplitude(times)))))
        steps.append(times[1])
    assert errors[0] > errors[1] > errors[2]
    order = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert order >= 0.9


def test_reconstruction_rejects_bad_curves(constants):
    times = np.linspace(0.0, 1.0, 51)
    with pytest.raises(SpeedViolationError):
        reconstruct_amplitudes(times, _great_circle(times, speed=3.0), constants)
    with pytest.raises(DegenerateCurveError):
        reconstruct_amplitudes(times, np.tile([1.0, 0.0, 0.0], (51, 1)), constants)
    with pytest.raises(DegenerateCurveError):
        reconstruct_amplitudes(times, np.roll(_great_circle(times), 1, axis=1), constants)
    with pytest.raises(DegenerateCurveError):
        reconstruct_amplitudes(times[:2], _great_circle(times[:2]), constants)


def test_demo_curve_to_control(constants):
    times, vecs = curve_from_json(read_json(DEMO / "great_circle_curve.json"))
    c = control_from_curve(times, vecs, constants)
    assert c.channels == 1
    assert c.final_time == pytest.approx(times[-1])
    np.testing.assert_allclose(c.amplitudes, 0.0, atol=1e-9)


def test_curve_json(constants):
    times = np.linspace(0.0, 0.5, 6)
    data = curve_to_dict(times, _great_circle(times))
    again_t, again_v = curve_from_json(data)
    np.testing.assert_allclose(again_v, _great_circle(times))
    with pytest.raises(FormatError):
        curve_from_json({"points": [{"t": 0.0}]})


def test_component_sign(driftless_system):
    flip = ControlSchedule.from_segments([(np.pi, [1.0, 0.0])])
    assert su2_component_invariant(driftless_system, zero_control(2), np.eye(2)) == 1
    assert su2_component_invariant(driftless_system, flip, np.eye(2)) == -1
    assert su2_component_invariant(driftless_system, zero_control(2), 1j * np.eye(2)) == 1
    quarter = ControlSchedule.from_segments([(np.pi / 2, [1.0, 0.0])])
    with pytest.raises(ProjectiveFiberError):
        su2_component_invariant(driftless_system, quarter, np.eye(2))


def test_frame_csv(qubit_system, tmp_path):
    frame = integrate_frame(qubit_system, ControlSchedule.from_segments([(1.0, [0.3])]), samples=11)
    table = pd.read_csv(write_frame_csv(frame, tmp_path / "frame.csv"))
    assert list(table.columns) == ["t"] + [f"{v}_{a}" for v in "abc" for a in "xyz"]
    assert len(table) == 11
