import pytest
from pydantic import ValidationError

from config.app_config import SCHEMA_VERSION, AppConfig
from config.experiment_config import ExperimentConfig, Tolerances


def test_defaults_are_valid():
    config = AppConfig()
    assert config.validate_config() == []
    assert config.get_tolerance("fiber_tol") == config.FIBER_TOL
    assert config.get_section_setting("safety") == 0.9
    assert config.export_config()["schema"] == SCHEMA_VERSION


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("FIBERLIFT_FIBER_TOL", "1e-6")
    monkeypatch.setenv("FIBERLIFT_SEED", "11")
    config = AppConfig()
    assert config.FIBER_TOL == 1e-6
    assert config.SEED == 11


def test_section_tolerance_may_not_exceed_fiber_tolerance():
    config = AppConfig()
    config.update_setting("tol_section", 1.0)
    assert any("TOL_SECTION" in issue for issue in config.validate_config())
    with pytest.raises(ValueError):
        config.update_setting("no_such_setting", 1)


def test_experiment_config_overrides():
    config = ExperimentConfig.from_app_config(AppConfig(), tolerances={"fiber_tol": 1e-7, "path_step": None}, seed=3)
    assert config.seed == 3
    assert config.tolerances.fiber_tol == 1e-7
    assert config.tolerances.path_step == AppConfig().PATH_STEP
    echo = config.echo()
    assert echo["schema"] == SCHEMA_VERSION
    assert echo["tolerances"]["fiber_tol"] == 1e-7


def test_tolerances_must_be_positive():
    with pytest.raises(ValidationError):
        Tolerances(fiber_tol=-1.0)
    with pytest.raises(ValidationError):
        ExperimentConfig(samples=1)


def test_lift_settings_flow_into_experiment_config():
    app_config = AppConfig()
    config = ExperimentConfig.from_app_config(app_config)
    assert config.max_depth == app_config.get_lift_setting("max_depth") == 12
    assert config.max_refinements == app_config.get_lift_setting("max_refinements") == 20
    assert config.max_midpoints == app_config.get_lift_setting("max_midpoints") == 4
    assert config.fiber_samples == app_config.get_lift_setting("fiber_samples") == 2
    echo = config.echo()
    for key in ("fiber_samples", "max_depth", "max_refinements", "max_midpoints"):
        assert echo[key] == getattr(config, key)


def test_config_summary():
    summary = AppConfig().get_config_summary()
    assert set(summary) == {"app_name", "app_version", "threads", "tolerances", "lift_settings", "validation_issues"}
    assert summary["validation_issues"] == []
    assert summary["lift_settings"]["max_refinements"] == 20
    with pytest.raises(ValidationError):
        ExperimentConfig(fiber_samples=1)
