"""Command-line interface for the soft-arm scenarios.

Subcommands:
    simulate  - open-loop rollout of a scenario's reference maneuver
                under one controller's input schedule
    generate  - produce and export an input schedule (der or pcc)
    compare   - run both controllers on a (possibly perturbed) plant
                and print tracking metrics
    verify    - internal consistency checks (gradients, localization,
                kinematic agreement)
    schema    - print the scenario file schema

Exit codes: 0 success, 2 invalid input or scenario, 3 numerical failure
(including a verification discrepancy), 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import fixtures
from .actuation import localization_report
from .configurations import bend_state
from .elastic import internal_forces, internal_forces_fd
from .errors import NumericalError, ValidationError
from .geometry import tip_position
from .pcc import pcc_forward_kinematics, pcc_generate
from .scenario import (
    ComparisonResult,
    Scenario,
    build_reference,
    export_trajectory,
    load_scenario,
    metrics_text,
    run_comparison,
    schema_text,
    straight_state,
)
from .simulate import rollout
from .trajgen import generate as generate_closed_loop

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _add_scenario_args(parser):
    parser.add_argument("--scenario", help="scenario YAML file (defaults "
                        "to the built-in asynchronous maneuver)")
    parser.add_argument("--dt", type=float, help="integrator step override")
    parser.add_argument("--perturb", type=float,
                        help="plant bend/twist stiffness factor override")
    parser.add_argument("--seed", type=int, help="scenario seed override")


def _load(args) -> Scenario:
    scenario = (load_scenario(args.scenario) if args.scenario
                else Scenario())
    overrides = {}
    if args.dt is not None:
        overrides["dt"] = args.dt
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace
        scenario = replace(scenario, **overrides)
    if args.perturb is not None:
        from dataclasses import replace
        scenario = replace(
            scenario,
            plant=type(scenario.plant)(
                bend_factor=args.perturb, twist_factor=args.perturb),
        )
    return scenario


def _schedules(scenario: Scenario, model: str):
    params = fixtures.default_params()
    actuation = fixtures.default_actuation()
    _, sched = build_reference(scenario)
    state0 = straight_state(params)
    if model == "pcc":
        inputs, ref_tips = pcc_generate(sched, params, actuation,
                                        scenario.control_dt)
        nominal = None
    else:
        result = generate_closed_loop(
            state0, sched, params, actuation, scenario.controller,
            scenario.sim_config(), scenario.control_dt)
        inputs = result.input_schedule
        ref_tips = result.reference_tips
        nominal = result.trajectory
    return params, actuation, state0, inputs, ref_tips, nominal


def _cmd_simulate(args) -> int:
    scenario = _load(args)
    params, actuation, state0, inputs, ref_tips, _ = _schedules(
        scenario, args.model)
    plant = scenario.plant.apply(params)
    trajectory = rollout(state0, inputs, plant, actuation,
                         scenario.sim_config(), scenario.control_dt)
    text = export_trajectory(trajectory, ref_tips, path=args.out)
    if args.out:
        print(f"wrote {args.out} ({len(trajectory.times)} samples)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_generate(args) -> int:
    scenario = _load(args)
    params, actuation, state0, inputs, ref_tips, nominal = _schedules(
        scenario, args.model)
    lines = ["t," + ",".join(f"u{i}" for i in range(inputs.shape[1]))]
    for k, u in enumerate(inputs):
        lines.append(f"{k * scenario.control_dt:.6f},"
                     + ",".join(f"{v:.9e}" for v in u))
    text = "\n".join(lines) + "\n"
    if not args.out:
        sys.stdout.write(text)
        return EXIT_OK
    inputs_path = f"{args.out}_inputs.csv"
    with open(inputs_path, "w", encoding="utf-8") as fh:
        fh.write(text)
    if nominal is None:
        # The reduced model has no full-order states; roll its schedule
        # out on the nominal plant to get the q(t) record.
        nominal = rollout(state0, inputs, params, actuation,
                          scenario.sim_config(), scenario.control_dt)
    states_path = f"{args.out}_states.csv"
    export_trajectory(nominal, ref_tips, path=states_path)
    print(f"wrote {inputs_path} and {states_path}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    scenario = _load(args)
    result: ComparisonResult = run_comparison(scenario)
    print(f"scenario: {scenario.name} ({scenario.case})")
    print(metrics_text("elastic", result.elastic))
    print(metrics_text("pcc", result.pcc))
    better = result.elastic.integrated_error < result.pcc.integrated_error
    print(f"elastic beats pcc: {'yes' if better else 'no'}")
    if args.out:
        export_trajectory(result.elastic_trajectory, result.reference_tips,
                          path=args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    params = fixtures.default_params()
    actuation = fixtures.default_actuation()
    rng = np.random.default_rng(0)
    failures = []

    # Analytic forces against the finite-difference oracle.
    state = bend_state(params.segment_nodes, (0.5, -0.4),
                       params.rest_edge_length)
    nodes = state.nodes + rng.normal(0.0, 1e-3, state.nodes.shape)
    nodes[0] = state.nodes[0]
    from .geometry import build_state
    probe = build_state(nodes, rng.normal(0.0, 0.1, params.n_nodes - 1))
    f = internal_forces(probe, params)
    f_fd = internal_forces_fd(probe, params)
    gerr = float(np.max(np.abs(f - f_fd)) / max(1.0, np.max(np.abs(f))))
    print(f"gradient vs oracle: {gerr:.3e}")
    if gerr > 1e-6:
        failures.append("gradient")

    # Boundary localization on a piecewise-uniform bend.
    report = localization_report(state, params, actuation)
    print(f"interior/boundary force ratio: {report.max_interior_ratio:.3e}")
    if report.max_interior_ratio > 1e-10:
        failures.append("localization")

    # Reduced and full kinematics agree at the tip.
    angles = (0.37, -0.61)
    ref = bend_state(params.segment_nodes, angles, params.rest_edge_length)
    kerr = float(np.linalg.norm(
        pcc_forward_kinematics(angles, params) - tip_position(ref)))
    print(f"kinematic tip agreement: {kerr:.3e}")
    if kerr > 1e-9:
        failures.append("kinematics")

    if failures:
        print(f"FAILED: {', '.join(failures)}")
        return EXIT_NUMERICAL
    print("all checks passed")
    return EXIT_OK


def _cmd_schema(_args) -> int:
    print(schema_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="derarm",
        description="Control-oriented elastic rod simulation of a "
                    "two-segment planar soft arm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="roll out a scenario")
    _add_scenario_args(p_sim)
    p_sim.add_argument("--model", choices=("der", "pcc"), default="der")
    p_sim.add_argument("--out", help="trajectory CSV path (default stdout)")
    p_sim.set_defaults(func=_cmd_simulate)

    p_gen = sub.add_parser("generate", help="produce an input schedule")
    _add_scenario_args(p_gen)
    p_gen.add_argument("--model", choices=("der", "pcc"), default="der")
    p_gen.add_argument("--out", help="schedule CSV path (default stdout)")
    p_gen.set_defaults(func=_cmd_generate)

    p_cmp = sub.add_parser("compare", help="compare both controllers")
    _add_scenario_args(p_cmp)
    p_cmp.add_argument("--out", help="elastic trajectory CSV path")
    p_cmp.set_defaults(func=_cmd_compare)

    p_ver = sub.add_parser("verify", help="run consistency checks")
    p_ver.set_defaults(func=_cmd_verify)

    p_sch = sub.add_parser("schema", help="print the scenario schema")
    p_sch.set_defaults(func=_cmd_schema)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
