import numpy as np
import pytest

from control_engine.control_space import ControlSchedule, concat, metric, zero_control
from control_engine.errors import AnchorDriftError, FiberCertificateError, PathError, PhaseClassError
from control_engine.lifting_topology import (
    FiberPath,
    ManifoldPath,
    _sample_count,
    connect_in_fiber,
    eta,
    fiber_path_to_eta,
    lift,
    loop_around,
    phase_class,
    shoot_two_segment,
)
from control_engine.propagation import arc_times, endpoint, propagators_at
from control_engine.su_algebra import PAULI_X, PAULI_Y, PAULI_Z, expm_anti_hermitian, hs_norm, random_su


def _small_step(x, axis, angle):
    return expm_anti_hermitian(-1j * angle * axis) @ x


def test_path_construction_and_concat():
    x = np.eye(2, dtype=complex)
    y = _small_step(x, PAULI_X, 0.1)
    z = _small_step(y, PAULI_Y, 0.1)
    first = ManifoldPath.geodesic(x, y, 5)
    second = ManifoldPath.geodesic(y, z, 4)
    joined = first.concat(second)
    assert len(joined) == 8
    assert joined.breakpoints == (4,)
    np.testing.assert_allclose(joined.end, z)
    assert joined.reversed().breakpoints == (3,)
    with pytest.raises(PathError):
        second.concat(first)
    with pytest.raises(PathError):
        ManifoldPath(np.eye(2)[None])


def test_path_dict_round_trip():
    path = ManifoldPath.geodesic(np.eye(2), _small_step(np.eye(2), PAULI_Z, 0.2), 4)
    again = ManifoldPath.from_dict(path.to_dict())
    np.testing.assert_allclose(again.points, path.points)


def test_loop_around_is_closed():
    loop = loop_around(np.stack([-1j * PAULI_X, -1j * PAULI_Y]), radius=0.1, samples=12)
    assert loop.closed
    np.testing.assert_allclose(loop.start, np.eye(2))


def test_lift_follows_path(su2_system, su2_atlas, schedule_factory):
    c = schedule_factory()
    x = endpoint(su2_system, c)
    path = ManifoldPath.geodesic(x, _small_step(x, PAULI_X, 0.1), 6)
    lifts = lift(su2_system, c, path, su2_atlas)
    assert len(lifts) == len(path)
    assert lifts[0] is c
    for li, point in zip(lifts, path.points):
        assert hs_norm(endpoint(su2_system, li) - point) <= 1e-8


@pytest.mark.parametrize("strategy", ["auto", "every"])
def test_lift_of_concatenation_equals_chained_lift(su2_system, su2_atlas, schedule_factory, strategy):
    c = schedule_factory()
    x = endpoint(su2_system, c)
    y = _small_step(x, PAULI_X, 0.08)
    z = _small_step(y, PAULI_Y, 0.08)
    first = ManifoldPath.geodesic(x, y, 5)
    second = ManifoldPath.geodesic(y, z, 5)
    joined = lift(su2_system, c, first.concat(second), su2_atlas, strategy=strategy)[-1]
    head = lift(su2_system, c, first, su2_atlas, strategy=strategy)[-1]
    chained = lift(su2_system, head, second, su2_atlas, strategy=strategy)[-1]
    assert metric(joined, chained) <= 1e-9


def test_lift_rejects_misplaced_path(su2_system, su2_atlas):
    path = ManifoldPath.geodesic(_small_step(np.eye(2), PAULI_X, 0.3), np.eye(2), 4)
    with pytest.raises(AnchorDriftError):
        lift(su2_system, zero_control(2), path, su2_atlas)
    with pytest.raises(ValueError):
        lift(su2_system, zero_control(2), ManifoldPath.constant(np.eye(2)), su2_atlas, strategy="sideways")


def test_eta_of_constant_loop_is_zero_control(su2_system, su2_atlas):
    assert eta(su2_system, ManifoldPath.constant(np.eye(2), 4), su2_atlas).is_zero_time


def test_eta_of_small_loop_returns_to_identity(su2_system, su2_atlas):
    loop = loop_around(np.stack([-1j * PAULI_X, -1j * PAULI_Y]), radius=0.05, samples=10)
    c = eta(su2_system, loop, su2_atlas)
    assert hs_norm(endpoint(su2_system, c) - np.eye(2)) <= 1e-8


def test_eta_needs_loop_at_identity(su2_system, su2_atlas, rng):
    open_path = ManifoldPath.geodesic(np.eye(2), _small_step(np.eye(2), PAULI_X, 0.1), 4)
    with pytest.raises(PathError):
        eta(su2_system, open_path, su2_atlas)
    with pytest.raises(PathError):
        eta(su2_system, ManifoldPath.constant(random_su(2, rng)), su2_atlas)


def test_fiber_path_certificate(su2_system):
    c = ControlSchedule.from_segments([(1.0, [0.3, 0.0])])
    target = endpoint(su2_system, c)
    path = FiberPath.certify(su2_system, [c, c], target)
    assert path.deviation <= 1e-12
    assert path.metric_length() == 0.0
    assert path.reversed().first == c
    assert len(path.concat(path)) == 3
    with pytest.raises(FiberCertificateError):
        FiberPath.certify(su2_system, [c, zero_control(2)], target)
    with pytest.raises(FiberCertificateError):
        FiberPath.certify(su2_system, [], target)
    assert path.to_dict()["certificate"]["fiber_tol"] == 1e-8


def test_phase_class(driftless_system):
    minus_identity = ControlSchedule.from_segments([(np.pi, [1.0, 0.0])])
    assert phase_class(driftless_system, zero_control(2), np.eye(2)) == 0
    assert phase_class(driftless_system, minus_identity, np.eye(2)) == 1
    quarter = ControlSchedule.from_segments([(np.pi / 2, [1.0, 0.0])])
    with pytest.raises(PhaseClassError):
        phase_class(driftless_system, quarter, np.eye(2))


def test_shooting_hits_target(su2_system, rng):
    w = random_su(2, rng)
    c = shoot_two_segment(su2_system, w, rng)
    assert c.segment_count == 2
    assert hs_norm(endpoint(su2_system, c) - w) <= 1e-10


def test_connect_rejects_controls_in_different_fibers(su2_system, su2_atlas):
    c = ControlSchedule.from_segments([(1.0, [0.3, 0.0])])
    with pytest.raises(PathError):
        connect_in_fiber(su2_system, c, zero_control(2), su2_atlas)


def test_connect_identical_controls(su2_system, su2_atlas):
    c = ControlSchedule.from_segments([(1.0, [0.3, 0.0])])
    path = connect_in_fiber(su2_system, c, c, su2_atlas)
    assert len(path) == 1


def _short_control():
    return ControlSchedule.from_segments([(0.3, [0.5, 0.0])])


def _trajectory_lift(sys, c, atlas):
    points = _sample_count(sys, [c], 2, atlas.step_limit)
    path = ManifoldPath(propagators_at(sys, c, arc_times(sys, c, points)))
    return lift(sys, zero_control(sys.m), path, atlas, strategy="every")[-1]


@pytest.mark.parametrize("homotopy", ["prefix", "retract"])
def test_fiber_path_to_eta_at_default_step(su2_system, su2_atlas, homotopy):
    c = _short_control()
    path = fiber_path_to_eta(su2_system, c, su2_atlas, homotopy=homotopy)
    assert path.first == c
    assert metric(path.last, _trajectory_lift(su2_system, c, su2_atlas)) <= 1e-12
    assert path.deviation <= 1e-8
    assert path.step <= 0.5
    assert path.path_step == 0.5


def test_fiber_path_to_eta_of_zero_time_control(su2_system, su2_atlas):
    path = fiber_path_to_eta(su2_system, zero_control(2), su2_atlas)
    assert len(path) == 1
    with pytest.raises(ValueError):
        fiber_path_to_eta(su2_system, _short_control(), su2_atlas, homotopy="sideways")


def test_eta_of_doubled_loop_is_doubled_eta(su2_system, su2_atlas):
    loop = loop_around(np.stack([-1j * PAULI_X, -1j * PAULI_Y]), radius=0.05, samples=10)
    once = eta(su2_system, loop, su2_atlas)
    twice = eta(su2_system, loop.concat(loop), su2_atlas)
    assert metric(twice, concat(once, once)) <= 1e-12


def test_appending_eta_of_a_loop_keeps_the_endpoint(su2_system, su2_atlas, schedule_factory):
    c = schedule_factory()
    loop = loop_around(np.stack([-1j * PAULI_Y, -1j * PAULI_Z]), radius=0.05, samples=10)
    c_prime = concat(c, eta(su2_system, loop, su2_atlas))
    assert c_prime.final_time > c.final_time
    assert hs_norm(endpoint(su2_system, c_prime) - endpoint(su2_system, c)) <= 1e-8


@pytest.mark.slow
def test_fiber_path_to_eta_of_two_segment_control(su2_system, su2_atlas):
    c = ControlSchedule.from_segments([(0.5, [0.6, -0.2]), (0.5, [0.1, 0.4])])
    path = fiber_path_to_eta(su2_system, c, su2_atlas)
    assert path.first == c
    assert path.deviation <= 1e-8
    assert path.step <= 0.5


@pytest.mark.slow
def test_connect_eta_of_loop_to_zero_control(su2_system, su2_atlas):
    loop = loop_around(np.stack([-1j * PAULI_X, -1j * PAULI_Y]), radius=0.05, samples=10)
    c = eta(su2_system, loop, su2_atlas)
    path = connect_in_fiber(su2_system, c, zero_control(2), su2_atlas)
    assert path.first == c
    assert path.last.is_zero_time
    assert path.deviation <= 1e-8
    assert path.step <= 0.5
    assert {phase_class(su2_system, k, np.eye(2)) for k in path.controls} == {0}
