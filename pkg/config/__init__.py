"""
fiberlift Configuration Package

This package contains all configuration settings for the fiberlift toolkit.
"""

from .app_config import SCHEMA_VERSION, AppConfig
from .experiment_config import ExperimentConfig, Tolerances

__all__ = ["AppConfig", "ExperimentConfig", "Tolerances", "SCHEMA_VERSION"]
