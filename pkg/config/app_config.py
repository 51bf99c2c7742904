"""
🔧 Application Configuration
Centralized configuration management for the fiberlift toolkit
"""

import os
from typing import Any, Dict, List

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

SCHEMA_VERSION = "fiberlift/1"


def _env_float(name: str, default: str) -> float:
    return float(os.getenv(name, default))


def _env_int(name: str, default: str) -> int:
    return int(os.getenv(name, default))


class AppConfig:
    """
    Centralized configuration class for fiberlift
    Manages numerical tolerances, solver settings and environment variables
    """

    def __init__(self):
        # Application Settings
        self.APP_NAME = os.getenv("FIBERLIFT_APP_NAME", "fiberlift")
        self.APP_VERSION = os.getenv("FIBERLIFT_APP_VERSION", "1.0.0")
        self.LOG_LEVEL = os.getenv("FIBERLIFT_LOG_LEVEL", "INFO")
        self.SEED = _env_int("FIBERLIFT_SEED", "7")

        # Parallelism
        default_threads = str(min(8, os.cpu_count() or 1))
        self.THREADS = max(1, _env_int("FIBERLIFT_THREADS", default_threads))

        # Tolerances
        self.FIBER_TOL = _env_float("FIBERLIFT_FIBER_TOL", "1e-8")
        self.TOL_SECTION = _env_float("FIBERLIFT_TOL_SECTION", "1e-9")
        self.XI_FLOOR = _env_float("FIBERLIFT_XI_FLOOR", "1e-4")
        self.AMPLITUDE_CAP = _env_float("FIBERLIFT_AMPLITUDE_CAP", "1e12")
        self.PATH_STEP = _env_float("FIBERLIFT_PATH_STEP", "0.5")
        self.MAX_ITER = _env_int("FIBERLIFT_MAX_ITER", "50")

        # Initialize grouped settings
        self._init_tolerances()
        self._init_solver_settings()

    def _init_tolerances(self):
        """Initialize tolerance table"""
        self.TOLERANCES = {
            "fiber_tol": self.FIBER_TOL,
            "tol_section": self.TOL_SECTION,
            "xi_floor": self.XI_FLOOR,
            "path_step": self.PATH_STEP,
            "unitarity": 1e-10,
            "hermiticity": 1e-12,
            "rank": 1e-8,
            "phase_class": 0.1,
        }

    def _init_solver_settings(self):
        """Initialize section, lift and frame settings"""
        self.SECTION_SETTINGS = {
            "max_iter": self.MAX_ITER,
            "max_depth": 5,
            "condition_bound": 1e6,
            "amplitude_cap": self.AMPLITUDE_CAP,
            "safety": 0.9,
            "fd_step": 1e-6,
            "calibration_directions": 20,
            "calibration_bisections": 6,
            "calibration_radius": 1.0,
        }

        self.LIFT_SETTINGS = {
            "max_depth": 12,
            "samples": 16,
            "fiber_samples": 2,
            "max_refinements": 20,
            "max_midpoints": 4,
        }

        self.FRAME_SETTINGS = {
            "speed_tolerance": 0.02,
            "ode_rtol": 1e-12,
            "ode_atol": 1e-12,
        }

    def get_tolerance(self, name: str, default=None):
        """Get tolerance value by name"""
        return self.TOLERANCES.get(name, default)

    def get_section_setting(self, name: str, default=None):
        """Get cross-section solver setting"""
        return self.SECTION_SETTINGS.get(name, default)

    def get_lift_setting(self, name: str, default=None):
        """Get lifting setting"""
        return self.LIFT_SETTINGS.get(name, default)

    def validate_config(self) -> List[str]:
        """Validate configuration and return any issues"""
        issues = []

        for name, value in self.TOLERANCES.items():
            if not value > 0:
                issues.append(f"Tolerance {name} must be positive")

        if self.THREADS < 1:
            issues.append("FIBERLIFT_THREADS must be at least 1")

        if self.MAX_ITER < 1:
            issues.append("FIBERLIFT_MAX_ITER must be at least 1")

        if self.TOL_SECTION > self.FIBER_TOL:
            issues.append("FIBERLIFT_TOL_SECTION must not exceed FIBERLIFT_FIBER_TOL")

        if self.AMPLITUDE_CAP <= 0:
            issues.append("FIBERLIFT_AMPLITUDE_CAP must be positive")

        return issues

    def get_config_summary(self) -> Dict[str, Any]:
        """Get configuration summary for debugging"""
        return {
            "app_name": self.APP_NAME,
            "app_version": self.APP_VERSION,
            "threads": self.THREADS,
            "tolerances": self.TOLERANCES,
            "lift_settings": self.LIFT_SETTINGS,
            "validation_issues": self.validate_config(),
        }

    def update_setting(self, setting_name: str, value: Any):
        """Update a configuration setting"""
        if hasattr(self, setting_name.upper()):
            setattr(self, setting_name.upper(), value)
            self._init_tolerances()
            self._init_solver_settings()
        else:
            raise ValueError(f"Unknown setting: {setting_name}")

    def export_config(self) -> Dict[str, Any]:
        """Export configuration as dictionary"""
        return {
            "schema": SCHEMA_VERSION,
            "app_name": self.APP_NAME,
            "app_version": self.APP_VERSION,
            "log_level": self.LOG_LEVEL,
            "seed": self.SEED,
            "threads": self.THREADS,
            "tolerances": dict(self.TOLERANCES),
            "section_settings": dict(self.SECTION_SETTINGS),
            "lift_settings": dict(self.LIFT_SETTINGS),
            "frame_settings": dict(self.FRAME_SETTINGS),
        }
