"""
✅ Verification Suite
Reduced-size property checks across the whole toolkit

This module implements the checks behind ``fiberlift verify``: propagation
against an ODE oracle, control-space algebra, bracket order, cross-sections,
lifting, fiber connection, component labels, symbolic tables and qubit frames.
Reports contain no timings and are emitted with sorted keys, so a fixed seed
gives byte-identical output.
"""

import logging
import math
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config.app_config import SCHEMA_VERSION, AppConfig
from config.experiment_config import ExperimentConfig
from control_engine.bracket_section import (
    ChartAtlas,
    SectionSettings,
    build_chart,
    section,
    word_element,
    word_from_indices,
)
from control_engine.control_space import (
    ControlSchedule,
    concat,
    metric,
    random_schedule,
    retract,
    zero_control,
)
from control_engine.errors import FiberliftError, LiftError, SectionError
from control_engine.lifting_topology import ManifoldPath, connect_in_fiber, lift, phase_class, shoot_two_segment
from control_engine.propagation import QuantumSystem, endpoint, endpoint_from, ode_endpoint
from control_engine.su_algebra import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    expm_anti_hermitian,
    from_coords,
    hs_norm,
    random_hermitian,
    random_su,
    random_su_near,
)

from .qubit_frame import (
    frame_constants,
    frame_from_function,
    integrate_frame,
    reconstruct_amplitudes,
    segment_speeds,
    su2_component_invariant,
)
from .topo_tables import (
    SU_HOMOTOPY_REFERENCE,
    SpaceSpec,
    binomial_total,
    dynamical_critical_betti,
    fiber_homotopy_groups,
    gate_critical_manifolds,
    grassmannian_poincare,
    loop_su_series,
    observable_critical_manifolds,
)

logger = logging.getLogger(__name__)

SUITES = ("propagation", "algebra", "bch", "section", "lift", "connect", "components", "tables", "qubit")


def pauli_system(drift: float = 0.5) -> QuantumSystem:
    """SU(2) with controls {sigma_x, sigma_y} and drift ``drift`` * sigma_z."""
    return QuantumSystem(drift * PAULI_Z, (PAULI_X, PAULI_Y))


def _slope(xs: np.ndarray, ys: np.ndarray) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


class VerificationSuite:
    """
    Runs the property suites and collects a JSON-ready report.

    A failing check is recorded with ``passed: false`` and, where an exception
    was the cause, its error code; the remaining suites still run.
    """

    def __init__(self, config: Optional[ExperimentConfig] = None, scale: float = 1.0):
        self.config = config or ExperimentConfig()
        self.scale = scale
        self.tol = self.config.tolerances
        self._connected: List[Dict[str, Any]] = []

    def _count(self, base: int) -> int:
        return max(1, int(round(base * self.scale)))

    def _rng(self, offset: int) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, offset])

    def run(self, suites: Optional[List[str]] = None) -> Dict[str, Any]:
        """Run ``suites`` (all by default) in their canonical order."""
        selected = list(SUITES) if not suites or "all" in suites else [s for s in SUITES if s in suites]
        runners: Dict[str, Callable[[], Dict[str, Any]]] = {
            "propagation": self.check_propagation,
            "algebra": self.check_control_algebra,
            "bch": self.check_bch_order,
            "section": self.check_section,
            "lift": self.check_lift,
            "connect": self.check_connect,
            "components": self.check_components,
            "tables": self.check_tables,
            "qubit": self.check_qubit_frame,
        }
        results = {}
        for name in selected:
            try:
                results[name] = runners[name]()
            except FiberliftError as e:
                logger.error(f"suite {name} aborted: {e}")
                results[name] = {"passed": False, "error": e.to_dict()}
            logger.info(f"suite {name}: {'passed' if results[name]['passed'] else 'FAILED'}")
        return {
            "schema": SCHEMA_VERSION,
            "config": self.config.echo(),
            "scale": self.scale,
            "suites": results,
            "passed": all(r["passed"] for r in results.values()),
        }

    def check_propagation(self) -> Dict[str, Any]:
        rng = self._rng(1)
        errors = {}
        for n, count in ((2, self._count(20)), (3, self._count(5))):
            sys = QuantumSystem(random_hermitian(n, rng), tuple(random_hermitian(n, rng) for _ in range(2)))
            worst = 0.0
            for _ in range(count):
                c = random_schedule(2, rng)
                worst = max(worst, hs_norm(endpoint(sys, c) - ode_endpoint(sys, c)))
            errors[f"SU({n})"] = {"cases": count, "max_error": worst}
        return {"results": errors, "bound": 1e-9, "passed": all(r["max_error"] <= 1e-9 for r in errors.values())}

    def check_control_algebra(self) -> Dict[str, Any]:
        rng = self._rng(2)
        cases = self._count(100)
        violations = {"triangle": 0, "symmetry": 0, "identity": 0, "associativity": 0, "left_invariance": 0, "retraction": 0}
        for _ in range(cases):
            a, b, d = (random_schedule(2, rng) for _ in range(3))
            if metric(a, d) > metric(a, b) + metric(b, d) + 1e-12:
                violations["triangle"] += 1
            if abs(metric(a, b) - metric(b, a)) > 1e-12:
                violations["symmetry"] += 1
            if metric(a, a) != 0.0:
                violations["identity"] += 1
            if metric(concat(concat(a, b), d), concat(a, concat(b, d))) > 1e-12:
                violations["associativity"] += 1
            if abs(metric(concat(a, b), concat(a, d)) - metric(b, d)) > 1e-9:
                violations["left_invariance"] += 1
            if retract(a, 0.0) != a or retract(a, 1.0) != zero_control(2):
                violations["retraction"] += 1
        return {"cases": cases, "violations": violations, "passed": not any(violations.values())}

    def check_bch_order(self) -> Dict[str, Any]:
        sys = pauli_system()
        word = word_from_indices([0, 1], sys.m)
        gens = sys.control_generators()
        bracket = word.bracket(sys)
        zero = np.zeros((2, 2), dtype=complex)
        eps = np.logspace(-3, -1, 7)
        bch_err = []
        drift_gap = []
        for e in eps:
            xi = np.array([e, e])
            plain = word_element(word, xi, zero, gens)
            bch_err.append(hs_norm(plain - expm_anti_hermitian(e * e * bracket)))
            drift_gap.append(hs_norm(word_element(word, xi, sys.drift_generator(), gens) - plain))
        p = _slope(eps, np.array(bch_err))
        q = _slope(eps, np.array(drift_gap))
        two_alpha = 2 * word.alpha
        return {
            "bch_order": p,
            "drift_order": q,
            "two_alpha": two_alpha,
            "passed": p >= 2.8 and q >= two_alpha - 0.2,
        }

    def check_section(self) -> Dict[str, Any]:
        sys = pauli_system()
        settings = SectionSettings(tol_section=self.tol.tol_section, xi_floor=self.tol.xi_floor, max_iter=self.config.max_iter)
        chart = build_chart(sys, settings=settings, seed=self.config.seed)
        rng = self._rng(4)
        targets = self._count(50)
        successes, worst, failures = 0, 0.0, {}
        x = random_su(2, rng)
        local = chart.at(x)
        for _ in range(targets):
            d = rng.normal(size=chart.dimension)
            d *= rng.uniform(0.0, 0.8 * settings.safety * chart.radius) / np.linalg.norm(d)
            y = expm_anti_hermitian(from_coords(chart.jacobian @ d, 2)) @ x
            try:
                c = section(local, x, y)
            except SectionError as e:
                failures[e.code] = failures.get(e.code, 0) + 1
                continue
            err = hs_norm(endpoint_from(sys, x, c) - y)
            worst = max(worst, err)
            if err <= self.tol.tol_section:
                successes += 1
        rate = successes / targets
        return {
            "targets": targets,
            "success_rate": rate,
            "max_error": worst,
            "failures": failures,
            "chart": chart.to_dict(),
            "passed": rate >= 0.99 and worst <= self.tol.tol_section,
        }

    def check_lift(self) -> Dict[str, Any]:
        sys = pauli_system()
        atlas = ChartAtlas(sys, seed=self.config.seed)
        rng = self._rng(5)
        fiber_tol = self.tol.fiber_tol
        c = random_schedule(2, rng, segments=3)
        x = endpoint(sys, c)
        mid = random_su_near(x, 0.6, rng)
        y = random_su_near(mid, 0.6, rng)
        samples = self.config.samples
        g1 = ManifoldPath.geodesic(x, mid, samples)
        g2 = ManifoldPath.geodesic(mid, y, samples)
        max_depth = self.config.max_depth
        joined = lift(sys, c, g1.concat(g2), atlas, fiber_tol, max_depth=max_depth)
        worst = max(hs_norm(endpoint(sys, li) - p) for li, p in zip(joined, g1.concat(g2).points))
        head = lift(sys, c, g1, atlas, fiber_tol, max_depth=max_depth)[-1]
        chained = lift(sys, head, g2, atlas, fiber_tol, max_depth=max_depth)[-1]
        gap = metric(joined[-1], chained)
        return {
            "samples": len(joined),
            "max_fidelity_error": worst,
            "concatenation_gap": gap,
            "passed": worst <= fiber_tol and gap <= 1e-9,
        }

    def check_connect(self) -> Dict[str, Any]:
        sys = pauli_system()
        atlas = ChartAtlas(sys, seed=self.config.seed)
        rng = self._rng(6)
        pairs = self._count(10)
        rows = []
        for k in range(pairs):
            c = random_schedule(2, rng, segments=2, max_duration=0.5, max_amplitude=1.0)
            w = endpoint(sys, c)
            row: Dict[str, Any] = {"pair": k}
            try:
                c_prime = shoot_two_segment(sys, w, rng)
                path = connect_in_fiber(
                    sys,
                    c,
                    c_prime,
                    atlas,
                    samples=self.config.fiber_samples,
                    fiber_tol=self.tol.fiber_tol,
                    path_step=self.tol.path_step,
                    max_refinements=self.config.max_refinements,
                    max_depth=self.config.max_depth,
                    max_midpoints=self.config.max_midpoints,
                    seed=self.config.seed + k,
                    threads=self.config.threads,
                )
            except LiftError as e:
                row.update(passed=False, error=e.code)
            else:
                row.update(
                    passed=True,
                    controls=len(path),
                    deviation=path.deviation,
                    step=path.step,
                    metric_length=path.metric_length(),
                )
                self._connected.append({"target": w, "path": path})
            rows.append(row)
        return {"pairs": rows, "path_step": self.tol.path_step, "passed": all(r["passed"] for r in rows)}

    def check_components(self) -> Dict[str, Any]:
        sys = pauli_system()
        rng = self._rng(7)
        cases = self._count(4)
        violations = 0
        classes = set()
        for _ in range(cases):
            w = endpoint(sys, random_schedule(2, rng, segments=2))
            plus = shoot_two_segment(sys, w, rng)
            minus = shoot_two_segment(sys, -w, rng)
            kp, km = phase_class(sys, plus, w), phase_class(sys, minus, w)
            sp, sm = su2_component_invariant(sys, plus, w), su2_component_invariant(sys, minus, w)
            classes.update((kp, km))
            if kp == km or sp != 1 or sm != -1:
                violations += 1
        for item in self._connected:
            signs = {su2_component_invariant(sys, c, item["target"]) for c in item["path"].controls}
            labels = {phase_class(sys, c, item["target"]) for c in item["path"].controls}
            if len(signs) != 1 or len(labels) != 1:
                violations += 1
        return {
            "cases": cases,
            "fiber_paths_checked": len(self._connected),
            "classes_found": sorted(classes),
            "violations": violations,
            "passed": violations == 0 and len(classes) == 2,
        }

    def check_tables(self) -> Dict[str, Any]:
        mismatches: List[str] = []
        for n, reference in SU_HOMOTOPY_REFERENCE.items():
            table = fiber_homotopy_groups(SpaceSpec.su(n), 2 * n - 2)
            for i in range(2 * n - 1):
                if i + 1 in reference and str(table[i]) != str(reference[i + 1]):
                    mismatches.append(f"SU({n}) pi_{i}")
        for n in range(2, 6):
            table = fiber_homotopy_groups(SpaceSpec.cp(n), 2 * n - 2)
            expected = {i: ("Z" if i in (1, 2 * n - 2) else "0") for i in range(2 * n - 1)}
            if {i: str(g) for i, g in table.items()} != expected:
                mismatches.append(f"CP^{n - 1}")
        flag = fiber_homotopy_groups(SpaceSpec.flag(1, 1, 2), 1)
        if str(flag[0]) != "0" or str(flag[1]) != "Z^2":
            mismatches.append("flag pi_0/pi_1")
        for n in range(1, 7):
            for nu in range(n + 1):
                if grassmannian_poincare(nu, n).total() != binomial_total(nu, n):
                    mismatches.append(f"Gr({nu},{n}) total")
        if list(grassmannian_poincare(2, 4).coefficients) != [1, 0, 1, 0, 2, 0, 1, 0, 1]:
            mismatches.append("Gr(2,4)")
        if list(loop_su_series(3, 8).coefficients) != [1, 0, 1, 0, 2, 0, 2, 0, 3]:
            mismatches.append("Omega SU(3)")
        for crit in gate_critical_manifolds((2, 1), 3):
            if not dynamical_critical_betti(crit, 3, 12).odd_vanishing():
                mismatches.append(f"betti {crit.nu}")
        if len(observable_critical_manifolds((1, 1, 1), (1, 1, 1))) != math.factorial(3):
            mismatches.append("observable permutations")
        return {"mismatches": mismatches, "passed": not mismatches}

    def check_qubit_frame(self) -> Dict[str, Any]:
        sys = QuantumSystem(PAULI_Z, (PAULI_X,))
        constants = frame_constants(PAULI_Z, PAULI_X)
        rng = self._rng(9)
        horizon = 10.0 / constants.alpha
        c = random_schedule(1, rng, segments=8)
        c = ControlSchedule(1, c.durations * horizon / c.final_time, c.amplitudes)
        frame_settings = AppConfig().FRAME_SETTINGS
        conj = integrate_frame(sys, c, samples=201)
        ode = integrate_frame(
            sys, c, samples=201, method="ode", rtol=frame_settings["ode_rtol"], atol=frame_settings["ode_atol"]
        )
        speed_error = float(np.max(np.abs(segment_speeds(sys, c) - constants.alpha)))

        def smooth(t):
            return 0.5 * math.cos(t) + 0.2

        errors = []
        steps = []
        for k in (101, 201, 401):
            times = np.linspace(0.0, horizon, k)
            curve = frame_from_function(constants, smooth, times).a
            eps = reconstruct_amplitudes(times, curve, constants)
            errors.append(float(np.max(np.abs(eps - np.array([smooth(t) for t in times])))))
            steps.append(times[1] - times[0])
        order = _slope(np.array(steps), np.array(errors))
        return {
            "alpha": constants.alpha,
            "orthonormality_drift": max(conj.gram_deviation(), ode.gram_deviation()),
            "ode_vs_conjugation": conj.distance_to(ode),
            "speed_error": speed_error,
            "roundtrip_errors": errors,
            "roundtrip_order": order,
            "passed": max(conj.gram_deviation(), ode.gram_deviation()) <= 1e-8
            and conj.distance_to(ode) <= 1e-8
            and speed_error <= 1e-6 and order >= 0.9,
        }


def run_verification(config: Optional[ExperimentConfig] = None, suites: Optional[List[str]] = None, scale: float = 1.0) -> Dict[str, Any]:
    return VerificationSuite(config, scale).run(suites)
