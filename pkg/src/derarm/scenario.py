"""Scenario configuration, reference waveforms, comparisons, and CSV export.

A scenario names a bend-angle maneuver (which segments move, how far,
how fast), optional plant perturbations, and controller settings.  The
comparison pipeline generates an input schedule per controller on the
nominal model, replays both open loop on the (possibly perturbed) plant,
and summarizes tip tracking error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import fixtures
from .actuation import ActuationModel
from .elastic import RodParams
from .errors import ScenarioError
from .geometry import RodState, build_state, tip_position
from .pcc import pcc_generate
from .simulate import SimConfig, Trajectory, rollout
from .trajgen import Gains, generate

CASE_KINDS = ("asynchronous", "synchronous_same", "synchronous_opposite",
              "custom")

# key -> (type, default); nested sections hold their own tables.
_SCALAR_SCHEMA = {
    "name": (str, "scenario"),
    "case": (str, "asynchronous"),
    "amplitude": (float, 0.6),
    "period": (float, 10.0),
    "control_rate": (float, 20.0),
    "dt": (float, 0.005),
    "seed": (int, 0),
    "custom_schedule": (list, None),
}
_PLANT_SCHEMA = {
    "stretch_factor": (float, 1.0),
    "bend_factor": (float, 1.0),
    "twist_factor": (float, 1.0),
    "damping_factor": (float, 1.0),
}
_CONTROLLER_SCHEMA = {
    "natural_frequency": (float, 20.0),
    "damping_ratio": (float, 1.0),
    "u_max": (float, 10.0),
}


@dataclass(frozen=True)
class PlantPerturbation:
    stretch_factor: float = 1.0
    bend_factor: float = 1.0
    twist_factor: float = 1.0
    damping_factor: float = 1.0

    def apply(self, params: RodParams) -> RodParams:
        return params.scaled(
            EA=params.EA * self.stretch_factor,
            EI=params.EI * self.bend_factor,
            GJ=params.GJ * self.twist_factor,
            damping_factor=self.damping_factor,
        )


@dataclass(frozen=True)
class Scenario:
    """Validated maneuver description."""

    name: str = "scenario"
    case: str = "asynchronous"
    amplitude: float = 0.6
    period: float = 10.0
    control_rate: float = 20.0
    dt: float = 0.005
    seed: int = 0
    custom_schedule: tuple | None = None
    plant: PlantPerturbation = field(default_factory=PlantPerturbation)
    controller: Gains = field(default_factory=Gains)

    def __post_init__(self):
        if self.case not in CASE_KINDS:
            raise ScenarioError(
                f"case must be one of {CASE_KINDS}, got {self.case!r}",
                key="case",
            )
        for key in ("amplitude", "period", "control_rate", "dt"):
            if getattr(self, key) <= 0.0 and key != "amplitude":
                raise ScenarioError(f"{key} must be positive", key=key)
        if self.case == "custom":
            if self.custom_schedule is None:
                raise ScenarioError(
                    "case 'custom' requires custom_schedule",
                    key="custom_schedule",
                )
            arr = np.asarray(self.custom_schedule, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 3:
                raise ScenarioError(
                    "custom_schedule must be a (K>=3, 2) table of bend angles",
                    key="custom_schedule",
                )
        elif self.custom_schedule is not None:
            raise ScenarioError(
                "custom_schedule is only valid with case 'custom'",
                key="custom_schedule",
            )

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate

    def sim_config(self) -> SimConfig:
        return SimConfig(dt=self.dt)


def _coerce(value, expected, key):
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ScenarioError(f"{key} must be a number", key=key)
        return float(value)
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ScenarioError(f"{key} must be an integer", key=key)
        return value
    if not isinstance(value, expected):
        raise ScenarioError(
            f"{key} must be {expected.__name__}", key=key
        )
    return value


def _parse_section(data, schema, prefix):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError(f"{prefix or 'scenario'} must be a mapping",
                            key=prefix or None)
    out = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in schema:
            raise ScenarioError(f"unknown key: {path}", key=path)
        expected, _default = schema[key]
        if value is not None:
            out[key] = _coerce(value, expected, path)
    return out


def scenario_from_dict(data) -> Scenario:
    """Build a Scenario from parsed YAML, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must contain a mapping")
    top = dict(data)
    plant_raw = top.pop("plant", None)
    ctrl_raw = top.pop("controller", None)
    fields = _parse_section(top, _SCALAR_SCHEMA, "")
    plant_fields = _parse_section(plant_raw, _PLANT_SCHEMA, "plant")
    ctrl_fields = _parse_section(ctrl_raw, _CONTROLLER_SCHEMA, "controller")
    if "custom_schedule" in fields:
        fields["custom_schedule"] = tuple(
            tuple(row) for row in fields["custom_schedule"]
        )
    try:
        return Scenario(
            plant=PlantPerturbation(**plant_fields),
            controller=Gains(**ctrl_fields),
            **fields,
        )
    except ScenarioError:
        raise
    except Exception as exc:  # gains/perturbation validation
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"could not parse {path}: {exc}") from exc
    return scenario_from_dict(data)


def schema_text() -> str:
    """Human-readable schema for the scenario file."""
    lines = ["# scenario file keys (YAML mapping; all optional)"]
    for key, (tp, default) in _SCALAR_SCHEMA.items():
        lines.append(f"{key}: {tp.__name__} (default {default!r})")
    lines.append("plant:")
    for key, (tp, default) in _PLANT_SCHEMA.items():
        lines.append(f"  {key}: {tp.__name__} (default {default!r})")
    lines.append("controller:")
    for key, (tp, default) in _CONTROLLER_SCHEMA.items():
        lines.append(f"  {key}: {tp.__name__} (default {default!r})")
    lines.append(f"# case is one of {CASE_KINDS}")
    return "\n".join(lines)


def _smooth_ramp(x: np.ndarray) -> np.ndarray:
    """Cycloidal 0->1 ramp: zero velocity and acceleration at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x - np.sin(2.0 * math.pi * x) / (2.0 * math.pi)


def _bend_profile(t: np.ndarray, period: float, lag: float) -> np.ndarray:
    """Rise over a quarter period, hold, return, rest."""
    quarter = period / 4.0
    tl = t - lag
    up = _smooth_ramp(tl / quarter)
    down = 1.0 - _smooth_ramp((tl - 2.0 * quarter) / quarter)
    profile = np.where(tl < 2.0 * quarter, up, down)
    profile[tl < 0.0] = 0.0
    profile[tl > 3.0 * quarter] = 0.0
    return profile


def build_reference(scenario: Scenario) -> tuple[np.ndarray, np.ndarray]:
    """(times, bend schedule (K, 2)) on the control grid."""
    if scenario.case == "custom":
        sched = np.asarray(scenario.custom_schedule, dtype=float)
        times = scenario.control_dt * np.arange(sched.shape[0])
        return times, sched
    n_samples = int(round(scenario.period * scenario.control_rate)) + 1
    times = scenario.control_dt * np.arange(n_samples)
    base = _bend_profile(times, scenario.period, 0.0)
    amp = scenario.amplitude
    if scenario.case == "asynchronous":
        lagged = _bend_profile(times, scenario.period, scenario.period / 4.0)
        sched = np.column_stack([amp * base, amp * lagged])
    elif scenario.case == "synchronous_same":
        sched = np.column_stack([amp * base, amp * base])
    else:                               # synchronous_opposite
        sched = np.column_stack([amp * base, -amp * base])
    return times, sched


def straight_state(params: RodParams) -> RodState:
    """The clamped rest configuration every maneuver starts from."""
    n = params.n_nodes
    x = params.rest_edge_length * np.arange(n)
    nodes = np.column_stack([x, np.zeros(n), np.zeros(n)])
    return build_state(nodes, np.zeros(n - 1))


@dataclass(frozen=True)
class MetricsReport:
    """Tip tracking error summary for one replayed trajectory."""

    times: np.ndarray
    errors: np.ndarray                  # ||tip - ref_tip|| per sample
    component_mean: np.ndarray          # mean |error| per axis
    integrated_error: float             # trapezoidal integral of e(t)
    mean_error: float
    std_error: float
    max_error: float
    saturation_fraction: float

    @staticmethod
    def from_tips(times, tips, ref_tips, saturation_fraction=0.0):
        diff = np.asarray(tips) - np.asarray(ref_tips)
        errors = np.linalg.norm(diff, axis=1)
        times = np.asarray(times)
        integrated = float(np.trapezoid(errors, times))
        duration = float(times[-1] - times[0]) if len(times) > 1 else 0.0
        # Mean error is the time average (1/T) integral of e(t), trapezoidal,
        # so it can be re-derived exactly from the exported table.
        mean = integrated / duration if duration > 0.0 else float(errors.mean())
        return MetricsReport(
            times=times,
            errors=errors,
            component_mean=np.abs(diff).mean(axis=0),
            integrated_error=integrated,
            mean_error=mean,
            std_error=float(errors.std()),
            max_error=float(errors.max()),
            saturation_fraction=float(saturation_fraction),
        )

    def summary_rows(self):
        # Mean error first, total then per-axis, then the spread stats.
        return [
            ("mean_error_total", self.mean_error),
            ("mean_error_x", float(self.component_mean[0])),
            ("mean_error_y", float(self.component_mean[1])),
            ("std_error", self.std_error),
            ("max_error", self.max_error),
            ("integrated_error", self.integrated_error),
            ("saturation_fraction", self.saturation_fraction),
        ]


@dataclass(frozen=True)
class ComparisonResult:
    scenario: Scenario
    reference_tips: np.ndarray
    elastic: MetricsReport
    elastic_trajectory: Trajectory
    pcc: MetricsReport
    pcc_trajectory: Trajectory


def run_comparison(scenario: Scenario,
                   params: RodParams | None = None,
                   actuation: ActuationModel | None = None) -> ComparisonResult:
    """Generate both controllers on the nominal model, replay on the plant.

    The plant applies the scenario's perturbation factors; generation
    always uses the nominal model, mirroring a controller designed
    offline and deployed on a mismatched arm.
    """
    params = fixtures.default_params() if params is None else params
    actuation = fixtures.default_actuation() if actuation is None else actuation
    config = scenario.sim_config()
    _, sched = build_reference(scenario)
    state0 = straight_state(params)

    gen = generate(state0, sched, params, actuation, scenario.controller,
                   config, scenario.control_dt)
    pcc_inputs, ref_tips = pcc_generate(sched, params, actuation,
                                        scenario.control_dt)

    plant = scenario.plant.apply(params)
    der_traj = rollout(state0, gen.input_schedule, plant, actuation, config,
                       scenario.control_dt)
    pcc_traj = rollout(state0, pcc_inputs, plant, actuation, config,
                       scenario.control_dt)

    der_metrics = MetricsReport.from_tips(
        der_traj.times, der_traj.tips, ref_tips, gen.saturation_fraction)
    pcc_metrics = MetricsReport.from_tips(
        pcc_traj.times, pcc_traj.tips, ref_tips)
    return ComparisonResult(
        scenario=scenario,
        reference_tips=ref_tips,
        elastic=der_metrics,
        elastic_trajectory=der_traj,
        pcc=pcc_metrics,
        pcc_trajectory=pcc_traj,
    )


def export_trajectory(trajectory: Trajectory, ref_tips=None, path=None) -> str:
    """CSV with one row per control instant.

    Columns: t, per-node x/y/z, per-edge twist, inputs, tip, and the tip
    error norm (zero when no reference is given).  Returns the CSV text;
    writes it to `path` when given.
    """
    n = trajectory.states[0].n_nodes
    m = trajectory.inputs.shape[1]
    header = ["t"]
    for i in range(n):
        header += [f"x{i}", f"y{i}", f"z{i}"]
    header += [f"phi{i}" for i in range(n - 1)]
    header += [f"u{i}" for i in range(m)]
    header += ["tip_x", "tip_y", "tip_z", "tip_error"]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for k, (t, state) in enumerate(zip(trajectory.times, trajectory.states)):
        tip = trajectory.tips[k]
        err = 0.0
        if ref_tips is not None:
            err = float(np.linalg.norm(tip - ref_tips[k]))
        row = ([f"{t:.6f}"]
               + [f"{v:.9e}" for v in state.nodes.reshape(-1)]
               + [f"{v:.9e}" for v in state.twists]
               + [f"{v:.9e}" for v in trajectory.inputs[k]]
               + [f"{v:.9e}" for v in tip]
               # Full precision so error metrics re-derived from the table
               # match the reported ones exactly.
               + [f"{err:.17e}"])
        writer.writerow(row)
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def metrics_text(name: str, report: MetricsReport) -> str:
    lines = [f"[{name}]"]
    for label, value in report.summary_rows():
        lines.append(f"  {label}: {value:.6e}")
    return "\n".join(lines)
