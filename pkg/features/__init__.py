"""
fiberlift Features Package

This package contains the analysis layers built on the control engine:
- Topology tables for fibers, loop spaces and critical manifolds
- Rotating frames of scalar-controlled qubits
- The verification suite behind ``fiberlift verify``
"""

from .qubit_frame import FrameConstants, FrameTrajectory, control_from_curve, frame_constants, integrate_frame
from .topo_tables import AbelianGroupExpr, PoincareSeries, SpaceSpec, fiber_homotopy_groups
from .verification import VerificationSuite, run_verification

__all__ = [
    "AbelianGroupExpr",
    "FrameConstants",
    "FrameTrajectory",
    "PoincareSeries",
    "SpaceSpec",
    "VerificationSuite",
    "control_from_curve",
    "fiber_homotopy_groups",
    "frame_constants",
    "integrate_frame",
    "run_verification",
]
