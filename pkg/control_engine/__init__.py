"""
fiberlift Control Engine Package

This package contains the constructive machinery of the toolkit:

1. control_space - piecewise-constant controls, metric, concatenation, retraction
2. propagation - QuantumSystem, endpoint map, trajectories, LARC check
3. bracket_section - commutator words, section charts, the cross-section sigma
4. lifting_topology - path lifts, eta, certified fiber paths, phase classes
5. persistence - JSON codecs for systems, controls, targets and paths
"""

from .bracket_section import BracketWord, ChartAtlas, SectionChart, SectionSettings, build_chart, section
from .control_space import ControlSchedule, concat, metric, retract, truncate, zero_control
from .errors import FiberliftError
from .lifting_topology import FiberPath, ManifoldPath, connect_in_fiber, eta, fiber_path_to_eta, lift, phase_class
from .propagation import QuantumSystem, endpoint, larc_check, trajectory

__all__ = [
    "BracketWord",
    "ChartAtlas",
    "ControlSchedule",
    "FiberPath",
    "FiberliftError",
    "ManifoldPath",
    "QuantumSystem",
    "SectionChart",
    "SectionSettings",
    "build_chart",
    "concat",
    "connect_in_fiber",
    "endpoint",
    "eta",
    "fiber_path_to_eta",
    "larc_check",
    "lift",
    "metric",
    "phase_class",
    "retract",
    "section",
    "trajectory",
    "truncate",
    "zero_control",
]
