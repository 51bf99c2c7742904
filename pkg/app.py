"""
🧵 fiberlift
Command-line front end: endpoint maps, cross-sections, lifts, fiber paths,
topology tables and qubit frames as reproducible JSON reports.

Usage:
    python app.py simulate --system demo_data/su2_system.json --control demo_data/control_a.json
    python app.py tables --space su 3 --imax 4
    python app.py verify --suite all --seed 7

Run options (--seed, --tol-*, --samples, --out) go before or after the subcommand name.
"""

import functools
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import click
import numpy as np
from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console
from rich.logging import RichHandler

# Add the project root to Python path and load environment
project_root = Path(__file__).parent
sys.path.append(str(project_root))
load_dotenv(dotenv_path=project_root / ".env")

from config.app_config import SCHEMA_VERSION, AppConfig  # noqa: E402
from config.experiment_config import ExperimentConfig  # noqa: E402
from control_engine.bracket_section import ChartAtlas, SectionSettings, section  # noqa: E402
from control_engine.control_space import ControlSchedule  # noqa: E402
from control_engine.errors import (  # noqa: E402
    ConfigError,
    FiberliftError,
    MultiplicityError,
    TopologyError,
    UnsupportedSpaceError,
)
from control_engine.lifting_topology import ManifoldPath, connect_in_fiber, lift, phase_class  # noqa: E402
from control_engine.persistence import (  # noqa: E402
    dumps,
    matrix_to_json,
    read_json,
    target_from_dict,
    write_json,
)
from control_engine.propagation import (  # noqa: E402
    QuantumSystem,
    endpoint,
    endpoint_from,
    larc_check,
    trajectory,
)
from control_engine.su_algebra import hs_norm  # noqa: E402
from features import topo_tables  # noqa: E402
from features.qubit_frame import (  # noqa: E402
    control_from_curve,
    curve_from_json,
    frame_constants,
    integrate_frame,
    su2_component_invariant,
    write_frame_csv,
)
from features.verification import SUITES, run_verification  # noqa: E402

logger = logging.getLogger("fiberlift")

ANCHORS = {
    "simulate": "endpoint map e_x(C) = U(T) x of the piecewise-constant Schrodinger flow",
    "larc": "Lie algebra rank condition: brackets of the control fields span su(N)",
    "section": "cross-section sigma(x, y) = F(phi(x, y)) built from nested commutator words",
    "lift": "lifting function C * sigma(e(C), gamma(s)), chained along re-anchored samples",
    "connect": "fibers of the endpoint map are path connected when M is simply connected",
    "phase-class": "PU(N) level sets split into N components e^{2 pi i k / N} W",
    "qubit": "scalar qubit control <-> constant-speed regular curves on S^2 in su(2)",
    "verify": "desk-scale property checks of the endpoint fibration and its topology",
}


def setup_logging(level: str):
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True, show_path=False)],
        force=True,
    )


def _emit(ctx: click.Context, command: str, result: Dict[str, Any]) -> Dict[str, Any]:
    config: ExperimentConfig = ctx.obj["config"]
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "anchor": ANCHORS.get(command, ""),
        "config": config.echo(),
        "result": result,
    }
    path = write_json(config.out / f"{command}.json", report)
    logger.info(f"report written to {path}")
    click.echo(dumps(report))
    return report


def handle_errors(fn: Callable) -> Callable:
    """Turn library errors into a JSON error document and the module's exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FiberliftError as e:
            logger.error(f"{e.code}: {e}")
            click.echo(dumps({"error": e.to_dict()}))
            sys.exit(e.exit_code)
        except ValidationError as e:
            err = ConfigError(str(e))
            logger.error(f"{err.code}: invalid configuration")
            click.echo(dumps({"error": err.to_dict()}))
            sys.exit(err.exit_code)

    return wrapper


def _config(ctx: click.Context, system: Optional[Path] = None) -> ExperimentConfig:
    """The group's configuration with this subcommand's run options applied on top."""
    config: ExperimentConfig = ctx.obj["config"]
    overrides = {k: v for k, v in ctx.meta.pop("run_overrides", {}).items() if v is not None}
    tolerances = {TOLERANCE_FLAGS[k]: overrides.pop(k) for k in list(overrides) if k in TOLERANCE_FLAGS}
    if system is not None:
        overrides["system"] = system
    if overrides or tolerances:
        data = config.model_dump()
        data["tolerances"].update(tolerances)
        data.update(overrides)
        config = ExperimentConfig.model_validate(data)
        ctx.obj["config"] = config
    return config


TOLERANCE_FLAGS = {
    "tol_fiber": "fiber_tol",
    "tol_section": "tol_section",
    "tol_xi_floor": "xi_floor",
    "tol_path_step": "path_step",
}

RUN_OPTIONS = (
    click.option("--seed", "run_seed", type=int, default=None, help="Random seed"),
    click.option("--tol-fiber", "run_tol_fiber", type=float, default=None, help="Fiber membership tolerance"),
    click.option("--tol-section", "run_tol_section", type=float, default=None, help="Cross-section Newton tolerance"),
    click.option("--tol-xi-floor", "run_tol_xi_floor", type=float, default=None, help="Smallest xi realized by a word"),
    click.option(
        "--tol-path-step", "run_tol_path_step", type=float, default=None, help="Largest metric step of a fiber path"
    ),
    click.option("--samples", "run_samples", type=int, default=None, help="Trajectory / path sample count"),
    click.option(
        "--out", "run_out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Report directory"
    ),
)


def run_options(fn: Callable) -> Callable:
    """Accept the group's run options after the subcommand name too; values given there win."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        overrides = {name[len("run_") :]: kwargs.pop(name) for name in list(kwargs) if name.startswith("run_")}
        click.get_current_context().meta["run_overrides"] = overrides
        return fn(*args, **kwargs)

    for option in reversed(RUN_OPTIONS):
        wrapper = option(wrapper)
    return wrapper


def load_system(path: Path) -> QuantumSystem:
    return QuantumSystem.from_dict(read_json(path))


def load_control(path: Path) -> ControlSchedule:
    return ControlSchedule.from_dict(read_json(path))


def load_target(path: Path) -> np.ndarray:
    return target_from_dict(read_json(path))


def _atlas(sys_: QuantumSystem, config: ExperimentConfig) -> ChartAtlas:
    settings = SectionSettings.from_app_config(
        tol_section=config.tolerances.tol_section,
        xi_floor=config.tolerances.xi_floor,
        max_iter=config.max_iter,
    )
    return ChartAtlas(sys_, settings=settings, seed=config.seed)


existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@click.group()
@click.option("--log-level", default=None, help="Logging level (default FIBERLIFT_LOG_LEVEL)")
@click.option("--seed", type=int, default=None, help="Random seed")
@click.option("--tol-fiber", type=float, default=None, help="Fiber membership tolerance")
@click.option("--tol-section", type=float, default=None, help="Cross-section Newton tolerance")
@click.option("--tol-xi-floor", type=float, default=None, help="Smallest xi realized by a word")
@click.option("--tol-path-step", type=float, default=None, help="Largest metric step of a fiber path")
@click.option("--samples", type=int, default=None, help="Trajectory / path sample count")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("reports"), show_default=True)
@click.pass_context
@handle_errors
def cli(ctx, log_level, seed, tol_fiber, tol_section, tol_xi_floor, tol_path_step, samples, out):
    """Endpoint fibers of quantum control systems, constructively."""
    app_config = AppConfig()
    setup_logging(log_level or app_config.LOG_LEVEL)
    issues = app_config.validate_config()
    if issues:
        raise ConfigError("; ".join(issues))
    logger.debug(f"configuration summary: {app_config.get_config_summary()}")
    config = ExperimentConfig.from_app_config(
        app_config,
        tolerances={
            "fiber_tol": tol_fiber,
            "tol_section": tol_section,
            "xi_floor": tol_xi_floor,
            "path_step": tol_path_step,
        },
        seed=seed,
        samples=samples,
        out=out,
    )
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@cli.command()
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--control", "control_path", type=existing_file, required=True)
@click.option("--trajectory/--no-trajectory", "with_trajectory", default=False, help="Include sampled U(t)")
@run_options
@click.pass_context
@handle_errors
def simulate(ctx, system_path, control_path, with_trajectory):
    """Endpoint (and optionally the trajectory) of a control file."""
    config = _config(ctx, system_path)
    sys_ = load_system(system_path)
    c = load_control(control_path)
    u = endpoint(sys_, c)
    result: Dict[str, Any] = {
        "final_time": c.final_time,
        "segments": c.segment_count,
        "endpoint": matrix_to_json(u),
        "unitarity_error": hs_norm(u.conj().T @ u - np.eye(sys_.dimension)),
    }
    if with_trajectory:
        traj = trajectory(sys_, c, config.samples)
        result["trajectory"] = {"s": traj.s.tolist(), "points": [matrix_to_json(p) for p in traj.points]}
    _emit(ctx, "simulate", result)


@cli.command()
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--max-depth", type=int, default=8, show_default=True)
@run_options
@click.pass_context
@handle_errors
def larc(ctx, system_path, max_depth):
    """Rank of the Lie algebra generated by the control fields."""
    _config(ctx, system_path)
    sys_ = load_system(system_path)
    n = sys_.dimension * sys_.dimension - 1
    rank = larc_check(sys_.control_generators(), sys_.dimension, max_depth=max_depth)
    with_drift = larc_check([sys_.drift_generator()] + sys_.control_generators(), sys_.dimension, max_depth=max_depth)
    _emit(
        ctx,
        "larc",
        {"dimension": n, "rank": rank, "rank_with_drift": with_drift, "holds": rank == n, "max_depth": max_depth},
    )


@cli.command(name="section")
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--target", "target_path", type=existing_file, required=True)
@click.option("--start", "start_path", type=existing_file, default=None, help="Initial unitary (identity by default)")
@run_options
@click.pass_context
@handle_errors
def section_command(ctx, system_path, target_path, start_path):
    """Build a chart and steer x to y with the cross-section."""
    config = _config(ctx, system_path)
    sys_ = load_system(system_path)
    y = load_target(target_path)
    x = load_target(start_path) if start_path else np.eye(sys_.dimension, dtype=complex)
    atlas = _atlas(sys_, config)
    c = section(atlas.chart_for(x), x, y)
    control_file = write_json(config.out / "section_control.json", c.to_dict())
    _emit(
        ctx,
        "section",
        {
            "chart": atlas.chart.to_dict(),
            "control": c.to_dict(),
            "control_file": str(control_file),
            "error": hs_norm(endpoint_from(sys_, x, c) - y),
        },
    )


@cli.command(name="lift")
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--control", "control_path", type=existing_file, required=True)
@click.option("--path", "path_file", type=existing_file, required=True)
@click.option("--strategy", type=click.Choice(["auto", "every"]), default="auto", show_default=True)
@run_options
@click.pass_context
@handle_errors
def lift_command(ctx, system_path, control_path, path_file, strategy):
    """Lift a path file starting at the endpoint of a control."""
    config = _config(ctx, system_path)
    sys_ = load_system(system_path)
    c = load_control(control_path)
    path = ManifoldPath.from_dict(read_json(path_file))
    lifts = lift(sys_, c, path, _atlas(sys_, config), config.tolerances.fiber_tol, strategy, config.max_depth)
    errors = [hs_norm(endpoint(sys_, li) - p) for li, p in zip(lifts, path.points)]
    control_file = write_json(config.out / "lift_control.json", lifts[-1].to_dict())
    _emit(
        ctx,
        "lift",
        {
            "samples": len(lifts),
            "strategy": strategy,
            "max_error": max(errors),
            "final_times": [li.final_time for li in lifts],
            "control": lifts[-1].to_dict(),
            "control_file": str(control_file),
        },
    )


@cli.command()
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--control", "control_path", type=existing_file, required=True)
@click.option("--control-prime", "prime_path", type=existing_file, required=True)
@click.option("--homotopy", type=click.Choice(["prefix", "retract"]), default="prefix", show_default=True)
@run_options
@click.pass_context
@handle_errors
def connect(ctx, system_path, control_path, prime_path, homotopy):
    """Certified fiber path between two controls with the same endpoint."""
    config = _config(ctx, system_path)
    sys_ = load_system(system_path)
    path = connect_in_fiber(
        sys_,
        load_control(control_path),
        load_control(prime_path),
        _atlas(sys_, config),
        samples=config.fiber_samples,
        fiber_tol=config.tolerances.fiber_tol,
        path_step=config.tolerances.path_step,
        max_refinements=config.max_refinements,
        max_depth=config.max_depth,
        max_midpoints=config.max_midpoints,
        homotopy=homotopy,
        seed=config.seed,
        threads=config.threads,
    )
    path_file = write_json(config.out / "fiber_path.json", path.to_dict())
    _emit(ctx, "connect", {"certificate": path.to_dict()["certificate"], "controls": len(path), "path_file": str(path_file)})


@cli.command(name="phase-class")
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--control", "control_path", type=existing_file, required=True)
@click.option("--target", "target_path", type=existing_file, required=True)
@click.option("--tol", type=float, default=0.1, show_default=True)
@run_options
@click.pass_context
@handle_errors
def phase_class_command(ctx, system_path, control_path, target_path, tol):
    """Root-of-unity label k with endpoint(C) = e^{2 pi i k / N} W."""
    _config(ctx, system_path)
    sys_ = load_system(system_path)
    k = phase_class(sys_, load_control(control_path), load_target(target_path), tol)
    _emit(ctx, "phase-class", {"k": k, "N": sys_.dimension, "tol": tol})


def _ints(values: Sequence[str], label: str) -> list:
    try:
        return [int(v) for v in values]
    except ValueError as e:
        raise TopologyError(f"{label} must be integers: {list(values)}") from e


@cli.command()
@click.option(
    "--space",
    type=click.Choice(["su", "cp", "flag", "grassmannian", "gate", "observable"]),
    required=True,
)
@click.argument("params", nargs=-1)
@click.option("--imax", type=int, default=6, show_default=True)
@click.option("--degree-max", type=int, default=12, show_default=True)
@click.option("--observable-mults", default=None, help="Comma-separated eigenvalue multiplicities of the observable")
@run_options
@click.pass_context
@handle_errors
def tables(ctx, space, params, imax, degree_max, observable_mults):
    """Homotopy, Poincare and critical-manifold tables (JSON + CSV)."""
    config = _config(ctx)
    values = _ints(params, "space parameters")
    if space == "gate":
        report = topo_tables.gate_report(values, sum(values), degree_max)
    elif space == "observable":
        if not observable_mults:
            raise MultiplicityError("--observable-mults is required for observable tables")
        report = topo_tables.observable_report(values, _ints(observable_mults.split(","), "observable multiplicities"))
    else:
        builders = {
            "su": topo_tables.SpaceSpec.su,
            "cp": topo_tables.SpaceSpec.cp,
            "flag": topo_tables.SpaceSpec.flag,
            "grassmannian": topo_tables.SpaceSpec.grassmannian,
        }
        try:
            spec = builders[space](*values)
        except TypeError as e:
            raise UnsupportedSpaceError(f"wrong parameters for {space}: {values}") from e
        report = topo_tables.space_report(spec, imax, degree_max)
    csv_path = topo_tables.write_csv(report["rows"], config.out / f"tables_{space}.csv")
    report["csv"] = str(csv_path)
    _emit(ctx, "tables", report)


@cli.command()
@click.option("--system", "system_path", type=existing_file, required=True)
@click.option("--control", "control_path", type=existing_file, default=None)
@click.option("--curve", "curve_path", type=existing_file, default=None, help="Curve file to turn into a control")
@click.option("--target", "target_path", type=existing_file, default=None, help="Target for the PU(2) component sign")
@click.option("--method", type=click.Choice(["conjugation", "ode"]), default="conjugation", show_default=True)
@click.option("--frame-samples", type=int, default=101, show_default=True)
@run_options
@click.pass_context
@handle_errors
def qubit(ctx, system_path, control_path, curve_path, target_path, method, frame_samples):
    """Frame constants, frame trajectories, curve -> control and the PU(2) sign."""
    config = _config(ctx, system_path)
    sys_ = load_system(system_path)
    if sys_.m != 1:
        raise ConfigError(f"qubit frames need a scalar-control system, got m={sys_.m}")
    constants = frame_constants(sys_.drift, sys_.controls[0])
    frame_settings = AppConfig().FRAME_SETTINGS
    result: Dict[str, Any] = {"constants": constants.to_dict()}

    if curve_path is not None:
        times, vecs = curve_from_json(read_json(curve_path))
        recovered = control_from_curve(times, vecs, constants, frame_settings["speed_tolerance"])
        result["control_from_curve"] = recovered.to_dict()
        write_json(config.out / "curve_control.json", recovered.to_dict())
    if control_path is not None:
        c = load_control(control_path)
        frame = integrate_frame(
            sys_,
            c,
            samples=frame_samples,
            method=method,
            rtol=frame_settings["ode_rtol"],
            atol=frame_settings["ode_atol"],
        )
        csv_path = write_frame_csv(frame, config.out / "frame.csv")
        result["frame"] = {
            "method": method,
            "samples": len(frame),
            "gram_deviation": frame.gram_deviation(),
            "bloch_final": frame.bloch()[-1].tolist(),
            "csv": str(csv_path),
        }
        if target_path is not None:
            result["component_sign"] = su2_component_invariant(sys_, c, load_target(target_path))
    _emit(ctx, "qubit", result)


@cli.command()
@click.option("--suite", "suites", multiple=True, type=click.Choice(("all",) + SUITES), default=("all",), show_default=True)
@click.option("--scale", type=float, default=1.0, show_default=True, help="Multiplier on case counts")
@run_options
@click.pass_context
@handle_errors
def verify(ctx, suites, scale):
    """Run the property suites and write a deterministic report."""
    config = _config(ctx)
    report = run_verification(config, list(suites), scale)
    _emit(ctx, "verify", report)
    if not report["passed"]:
        sys.exit(1)


if __name__ == "__main__":
    cli(obj={})
