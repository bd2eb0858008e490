"""Command line front end: ``funnelcbf {simulate,compare,verify,export} ...``.

Exit codes: 0 success, 1 run failure (violation, divergence, failed check),
2 invalid scenario or arguments.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from funnelcbf.scenario import ScenarioError, load_scenario
from funnelcbf.sim import atomic_write_text, input_reference_fn, read_trajectory_csv, trajectory_csv
from funnelcbf.suite import compare_scenarios, run_scenario, verify_scenario
from funnelcbf.svg import trajectory_svg

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def _overrides(args) -> dict:
    return {"seed": args.seed, "step": args.step, "horizon": args.horizon, "out_dir": args.out_dir}


def _load(path, args):
    return load_scenario(path, _overrides(args))


def _plot(scenario, runs, path):
    u_ref = input_reference_fn(scenario.controller.u_ref, scenario.reference)
    svg = trajectory_svg(runs, scenario.boundary, scenario.reference, u_ref=u_ref, title=scenario.name)
    atomic_write_text(path, svg)


def cmd_simulate(args) -> int:
    scenario = _load(args.scenario, args)
    result = run_scenario(scenario)
    out = scenario.output_dir
    atomic_write_text(out / f"{scenario.name}_trajectory.csv", trajectory_csv(result.trajectory))
    summary = result.summary()
    atomic_write_text(out / f"{scenario.name}_metrics.txt", summary)
    if not args.no_plot and len(result.trajectory) > 1:
        _plot(scenario, [(scenario.name, result.trajectory)], out / f"{scenario.name}_plot.svg")
    sys.stdout.write(summary)
    return EXIT_OK if result.trajectory.completed else EXIT_FAIL


def cmd_compare(args) -> int:
    a = _load(args.scenario_a, args)
    b = _load(args.scenario_b, args)
    result = compare_scenarios(a, b)
    out = a.output_dir
    stem = f"compare_{a.name}_vs_{b.name}"
    atomic_write_text(out / f"{stem}.csv", result.combined_csv())
    lines = ["== run a ==", result.a.summary(), "== run b ==", result.b.summary()]
    if result.reduction is None:
        lines.append("input_mse_reduction: undefined")
    else:
        lines.append(f"input_mse_reduction: {result.reduction:.10g}")
    text = "\n".join(lines) + "\n"
    atomic_write_text(out / f"{stem}.txt", text)
    if not args.no_plot and min(len(result.a.trajectory), len(result.b.trajectory)) > 1:
        _plot(a, [(b.name, result.b.trajectory), (a.name, result.a.trajectory)], out / f"{stem}.svg")
    sys.stdout.write(text)
    ok = result.a.trajectory.completed and result.b.trajectory.completed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    scenario = _load(args.scenario, args)
    result = verify_scenario(scenario)
    out = scenario.output_dir
    atomic_write_text(out / f"{scenario.name}_verify.txt", result.report())
    atomic_write_text(out / f"{scenario.name}_inclusion.csv", result.audit_csv())
    sys.stdout.write(result.report())
    return EXIT_OK if result.passed else EXIT_FAIL


def cmd_export(args) -> int:
    """Write trajectory CSV and SVG; with ``--from-csv`` only re-render a saved trajectory."""
    scenario = _load(args.scenario, args)
    out = scenario.output_dir
    if args.from_csv:
        traj = read_trajectory_csv(args.from_csv)
    else:
        traj = run_scenario(scenario).trajectory
        atomic_write_text(out / f"{scenario.name}_trajectory.csv", trajectory_csv(traj))
    if not args.no_plot and len(traj) > 1:
        _plot(scenario, [(scenario.name, traj)], out / f"{scenario.name}_plot.svg")
    print(f"exported {scenario.name} to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the scenario seed")
    common.add_argument("--step", type=float, help="override the logging/integration step")
    common.add_argument("--horizon", type=float, help="override the simulation horizon")
    common.add_argument("--out-dir", help="override the output directory")
    common.add_argument("--no-plot", action="store_true", help="skip SVG output")

    parser = argparse.ArgumentParser(prog="funnelcbf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("simulate", parents=[common], help="run one scenario")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("compare", parents=[common], help="input-MSE comparison of two scenarios")
    p.add_argument("scenario_a")
    p.add_argument("scenario_b")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("verify", parents=[common], help="sampled verification suite")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("export", parents=[common], help="write trajectory CSV and SVG plot")
    p.add_argument("scenario")
    p.add_argument("--from-csv", help="render an existing trajectory CSV instead of simulating")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        # e.g. an interior controller started outside the safe set
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
