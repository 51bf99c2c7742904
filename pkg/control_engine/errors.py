"""
Error taxonomy for fiberlift.

Each error carries a stable ``code`` and the ``exit_code`` the CLI returns for it.
Exit codes are grouped by module: control_space 10, propagation 20,
bracket_section 30, lifting_topology 40, topo_tables 50, qubit_frame 60,
configuration/CLI 2.
"""

from typing import Any, Dict


class FiberliftError(Exception):
    """Base class for all fiberlift errors."""

    code = "E_FIBERLIFT"
    module = "fiberlift"
    exit_code = 1

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "module": self.module, "message": str(self)}


# control_space

class ControlSpaceError(FiberliftError):
    code = "E_CONTROL"
    module = "control_space"
    exit_code = 10


class ChannelMismatchError(ControlSpaceError, ValueError):
    code = "E_CONTROL_CHANNELS"


class ControlRangeError(ControlSpaceError, ValueError):
    code = "E_CONTROL_RANGE"


class InvalidScheduleError(ControlSpaceError, ValueError):
    code = "E_CONTROL_SCHEDULE"


# propagation

class PropagationError(FiberliftError):
    code = "E_PROPAGATION"
    module = "propagation"
    exit_code = 20


class NonHermitianError(PropagationError, ValueError):
    code = "E_PROP_HERMITIAN"


class NonFiniteControlError(PropagationError, ValueError):
    code = "E_PROP_NONFINITE"


class InvalidStateError(PropagationError, ValueError):
    code = "E_PROP_STATE"


class InvalidSystemError(PropagationError, ValueError):
    code = "E_PROP_SYSTEM"


# bracket_section

class SectionError(FiberliftError):
    code = "E_SECTION"
    module = "bracket_section"
    exit_code = 30


class OutOfNeighborhoodError(SectionError):
    """Target not reachable inside one chart; the caller must subdivide."""

    code = "E_SECTION_NEIGHBORHOOD"


class AmplitudeOverflowError(SectionError):
    code = "E_SECTION_AMPLITUDE"


class TrustRadiusError(SectionError, ValueError):
    code = "E_SECTION_TRUST_RADIUS"


class ChartError(SectionError):
    code = "E_CHART"


class RankDeficiencyError(ChartError):
    code = "E_CHART_RANK"


class ConditionError(ChartError):
    code = "E_CHART_CONDITION"


# lifting_topology

class LiftError(FiberliftError):
    code = "E_LIFT"
    module = "lifting_topology"
    exit_code = 40


class AnchorDriftError(LiftError):
    code = "E_LIFT_ANCHOR"


class SubdivisionLimitError(LiftError):
    code = "E_LIFT_SUBDIVISION"


class FiberCertificateError(LiftError):
    code = "E_LIFT_CERTIFICATE"


class LogBranchError(LiftError):
    code = "E_LIFT_LOG_BRANCH"


class PhaseClassError(LiftError, ValueError):
    code = "E_LIFT_PHASE_CLASS"


class PathError(LiftError, ValueError):
    code = "E_LIFT_PATH"


# topo_tables

class TopologyError(FiberliftError):
    code = "E_TOPO"
    module = "topo_tables"
    exit_code = 50


class UnsupportedSpaceError(TopologyError, ValueError):
    code = "E_TOPO_SPACE"


class MultiplicityError(TopologyError, ValueError):
    code = "E_TOPO_MULTIPLICITY"


# qubit_frame

class FrameError(FiberliftError):
    code = "E_FRAME"
    module = "qubit_frame"
    exit_code = 60


class LarcViolationError(FrameError, ValueError):
    code = "E_FRAME_LARC"


class SpeedViolationError(FrameError, ValueError):
    code = "E_FRAME_SPEED"


class DegenerateCurveError(FrameError, ValueError):
    code = "E_FRAME_DEGENERATE"


class ProjectiveFiberError(FrameError, ValueError):
    code = "E_FRAME_FIBER"


# configuration / io

class ConfigError(FiberliftError, ValueError):
    code = "E_CONFIG"
    module = "cli"
    exit_code = 2


class FormatError(FiberliftError, ValueError):
    code = "E_FORMAT"
    module = "cli"
    exit_code = 2
