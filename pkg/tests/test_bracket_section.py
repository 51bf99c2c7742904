import numpy as np
import pytest

from control_engine.bracket_section import (
    SectionSettings,
    build_chart,
    chart_schedule,
    forward_map,
    q_word,
    r_schedule,
    section,
    section_coordinates,
    word_alpha,
    word_element,
    word_from_indices,
    word_length,
    xi_from_r,
)
from control_engine.control_space import metric, zero_control
from control_engine.errors import (
    AmplitudeOverflowError,
    InvalidScheduleError,
    OutOfNeighborhoodError,
    RankDeficiencyError,
    TrustRadiusError,
)
from control_engine.propagation import QuantumSystem, endpoint, endpoint_from
from control_engine.su_algebra import (
    PAULI_X,
    PAULI_Y,
    commutator,
    expm_anti_hermitian,
    hs_norm,
    random_hermitian,
    random_su,
    random_su_near,
    su_coords,
    su_log,
)


@pytest.mark.parametrize("depth, alpha, length", [(1, 1, 1), (2, 2, 4), (3, 2, 10), (4, 3, 22)])
def test_word_constants(depth, alpha, length):
    assert word_alpha(depth) == alpha
    assert word_length(depth) == length
    assert q_word(depth, np.eye(depth)).length == length


def test_depth_two_word_is_group_commutator():
    word = q_word(2, [[1.0, 0.0], [0.0, 1.0]])
    assert word.slots == ((1, 1), (0, 1), (1, -1), (0, -1))


def test_word_bracket_of_paulis(su2_system):
    word = word_from_indices((0, 1), 2)
    y1, y2 = su2_system.control_generators()
    np.testing.assert_allclose(word.bracket(su2_system), commutator(y2, y1))


def test_inverted_word_cancels_without_drift():
    gens = [-1j * PAULI_X, -1j * PAULI_Y]
    drift = np.zeros((2, 2), dtype=complex)
    word = word_from_indices((0, 1, 0), 2)
    xi = [0.3, 0.2, 0.4]
    product = word_element(word, xi, drift, gens) @ word_element(word.inverted(), xi, drift, gens)
    np.testing.assert_allclose(product, np.eye(2), atol=1e-12)
    assert word.inverted().inverted() == word


@pytest.mark.parametrize("indices", [(0,), (1, 0), (0, 1, 1)])
def test_r_schedule_realizes_word_element(su2_system, indices):
    word = word_from_indices(indices, 2)
    xi = [0.35, 0.3, 0.25][: len(indices)]
    c = r_schedule(word, xi)
    assert c.segment_count == word.length
    expected = word_element(word, xi, su2_system.drift_generator(), su2_system.control_generators())
    np.testing.assert_allclose(endpoint(su2_system, c), expected, atol=1e-12)


def test_r_schedule_edge_cases():
    word = word_from_indices((0, 1), 2)
    assert r_schedule(word, [0.0, 0.0]).is_zero_time
    with pytest.raises(AmplitudeOverflowError):
        r_schedule(word, [1e-6, 1e-6], amplitude_cap=1e3)
    with pytest.raises(InvalidScheduleError):
        r_schedule(word, [0.1, -0.1])


def test_xi_from_r():
    np.testing.assert_allclose(xi_from_r(-8.0, 3), [-2.0, 2.0, 2.0])
    np.testing.assert_array_equal(xi_from_r(0.0, 2), [0.0, 0.0])


def test_pauli_chart_words():
    chart = build_chart(QuantumSystem(0.5 * np.diag([1.0, -1.0]), (PAULI_X, PAULI_Y)), calibrate=False)
    assert chart.dimension == 3
    assert chart.depths == (1, 1, 2)
    assert np.isfinite(chart.condition)


def test_chart_calibration(su2_atlas):
    chart = su2_atlas.chart
    assert 0.0 < chart.radius <= chart.settings.calibration_radius
    assert chart.trust_radius == pytest.approx(2 * chart.radius)
    assert su2_atlas.step_limit > 0


def test_single_control_fails_rank():
    sys1 = QuantumSystem(np.zeros((2, 2)), (PAULI_X,))
    with pytest.raises(RankDeficiencyError):
        build_chart(sys1, calibrate=False)


def test_section_of_point_to_itself_is_zero_control(su2_atlas, rng):
    x = random_su(2, rng)
    assert section(su2_atlas.chart_for(x), x, x) == zero_control(2)


def test_section_reaches_nearby_targets(su2_system, su2_atlas, rng):
    chart = su2_atlas.chart
    reach = 0.5 * chart.settings.safety * chart.radius * float(np.linalg.svd(chart.jacobian, compute_uv=False)[-1])
    for _ in range(10):
        y = random_su_near(np.eye(2), reach * rng.uniform(0.1, 1.0), rng)
        c = section(chart, np.eye(2), y)
        assert hs_norm(endpoint(su2_system, c) - y) <= chart.settings.tol_section


def test_section_at_other_basepoint(su2_system, su2_atlas, rng):
    x = random_su(2, rng)
    y = expm_anti_hermitian(-0.05j * PAULI_X) @ x
    c = section(su2_atlas.chart_for(x), x, y)
    assert hs_norm(endpoint_from(su2_system, x, c) - y) <= 1e-9


def test_far_target_is_out_of_neighborhood(su2_atlas):
    far = expm_anti_hermitian(-1.2j * PAULI_X)
    with pytest.raises(OutOfNeighborhoodError):
        section_coordinates(su2_atlas.chart, np.eye(2), far)


def test_forward_map(su2_system, su2_atlas):
    chart = su2_atlas.chart
    x = np.eye(2, dtype=complex)
    np.testing.assert_array_equal(forward_map(chart, x, np.zeros(3)), x)
    r = chart.radius * np.array([0.05, -0.03, 0.02])
    np.testing.assert_allclose(forward_map(chart, x, r), endpoint(su2_system, chart_schedule(chart, r)), atol=1e-12)
    with pytest.raises(TrustRadiusError):
        forward_map(chart, x, np.full(3, 10.0))


def test_settings_from_app_config():
    settings = SectionSettings.from_app_config(tol_section=1e-10, max_iter=None)
    assert settings.tol_section == 1e-10
    assert settings.max_iter == 50


@pytest.mark.slow
def test_su3_chart_needs_depth_four(rng):
    sys3 = QuantumSystem(random_hermitian(3, rng), (random_hermitian(3, rng), random_hermitian(3, rng)))
    chart = build_chart(sys3, settings=SectionSettings(condition_bound=1e12), calibrate=False)
    assert chart.dimension == 8
    assert max(chart.depths) == 4


def test_tiny_bracket_coordinate_snaps_to_zero_word(su2_atlas):
    chart = su2_atlas.chart
    assert chart_schedule(chart, np.array([0.0, 0.0, 1e-9])).is_zero_time


def test_section_detours_around_snapped_coordinates(su2_system, su2_atlas):
    chart = su2_atlas.chart
    y = expm_anti_hermitian(1e-9 * chart.brackets[2])
    c = section(chart, np.eye(2), y)
    assert hs_norm(endpoint(su2_system, c) - y) <= 2 * chart.settings.tol_section
    assert c.max_amplitude() <= chart.settings.amplitude_cap


@pytest.mark.parametrize("k", [0, 1, 2])
def test_forward_map_derivative_is_bracket(su2_atlas, k):
    chart = su2_atlas.chart
    column = chart.jacobian[:, k]

    def gap(h):
        r = np.zeros(3)
        r[k] = h
        return np.linalg.norm(su_coords(su_log(forward_map(chart, np.eye(2), r))) / h - column)

    coarse, fine = gap(1e-4), gap(1e-6)
    assert coarse <= 0.05 * np.linalg.norm(column)
    assert fine < coarse
    # leading order of the word expansion is r_k Xi_k; the remainder is O(r_k^{3/2}) or better
    slope = np.log(coarse * 1e-4 / (fine * 1e-6)) / np.log(100.0)
    assert slope >= 1.3


def test_r_schedule_shrinks_to_zero_control():
    word = word_from_indices((0, 1), 2)
    distances = []
    for r in [1e-2, 1e-4, 1e-6]:
        d = metric(r_schedule(word, xi_from_r(r, 2)), zero_control(2))
        assert d == pytest.approx(4 * np.sqrt(r) + 4 * r**2, rel=1e-9)
        distances.append(d)
    assert distances == sorted(distances, reverse=True)
