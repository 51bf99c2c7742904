"""
Experiment configuration for CLI runs.

Every report written by the CLI embeds ``ExperimentConfig.echo()`` so that each
tolerance that affected a result is recorded next to it.
"""

from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field

from .app_config import SCHEMA_VERSION, AppConfig


class Tolerances(BaseModel):
    """Numerical tolerances; all strictly positive."""

    model_config = ConfigDict(frozen=True)

    fiber_tol: float = Field(1e-8, gt=0)
    tol_section: float = Field(1e-9, gt=0)
    xi_floor: float = Field(1e-4, gt=0)
    path_step: float = Field(0.5, gt=0)


class ExperimentConfig(BaseModel):
    """Validated settings for one CLI invocation."""

    model_config = ConfigDict(frozen=True)

    system: Optional[Path] = None
    seed: int = 7
    tolerances: Tolerances = Field(default_factory=Tolerances)
    samples: int = Field(16, ge=2)
    fiber_samples: int = Field(2, ge=2)
    max_depth: int = Field(12, ge=0)
    max_refinements: int = Field(20, ge=0)
    max_midpoints: int = Field(4, ge=0)
    max_iter: int = Field(50, ge=1)
    threads: int = Field(1, ge=1)
    out: Path = Path("reports")

    @classmethod
    def from_app_config(cls, app_config: AppConfig, **overrides: Any) -> "ExperimentConfig":
        """Build from environment defaults, then apply explicit overrides."""
        tolerances = {
            "fiber_tol": app_config.FIBER_TOL,
            "tol_section": app_config.TOL_SECTION,
            "xi_floor": app_config.XI_FLOOR,
            "path_step": app_config.PATH_STEP,
        }
        tolerances.update({k: v for k, v in overrides.pop("tolerances", {}).items() if v is not None})
        values = {
            "seed": app_config.SEED,
            "samples": app_config.get_lift_setting("samples"),
            "fiber_samples": app_config.get_lift_setting("fiber_samples"),
            "max_depth": app_config.get_lift_setting("max_depth"),
            "max_refinements": app_config.get_lift_setting("max_refinements"),
            "max_midpoints": app_config.get_lift_setting("max_midpoints"),
            "max_iter": app_config.MAX_ITER,
            "threads": app_config.THREADS,
            "tolerances": Tolerances(**tolerances),
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def echo(self) -> Dict[str, Any]:
        """JSON-ready copy of the configuration for report embedding."""
        return {
            "schema": SCHEMA_VERSION,
            "system": str(self.system) if self.system is not None else None,
            "seed": self.seed,
            "tolerances": self.tolerances.model_dump(),
            "samples": self.samples,
            "fiber_samples": self.fiber_samples,
            "max_depth": self.max_depth,
            "max_refinements": self.max_refinements,
            "max_midpoints": self.max_midpoints,
            "max_iter": self.max_iter,
            "out": str(self.out),
        }
