"""Command-line driver: solve, plan, check and bench subcommands.

Exit codes: 0 converged/optimal, 2 not converged, 3 infeasible, 1 input
error. Results land in --out (default: alongside the scenario) as a
trajectory CSV, a canonical JSON report and, on request, per-iteration
solver problem dumps.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from .centroidal import check_feasibility, convergence_error, integrate
from .contacts import plan_contacts
from .scenario import (ScenarioError, build_plan_settings, build_scp_settings,
                       build_spec, canonical_json, load_scenario,
                       load_terrain_file, read_trajectory_csv,
                       write_trajectory_csv)
from .scp import solve_scp

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_CONVERGED = 2
EXIT_INFEASIBLE = 3


def _out_dir(args, scenario_path: str) -> str:
    out = args.out or os.path.dirname(os.path.abspath(scenario_path))
    os.makedirs(out, exist_ok=True)
    return out


def _apply_overrides(args, settings):
    if args.tol is not None:
        settings.eps_tol = args.tol
    if args.max_iters is not None:
        settings.max_outer_iters = args.max_iters
    if args.dump_problems:
        os.makedirs(args.dump_problems, exist_ok=True)
        settings.dump_dir = args.dump_problems
    return settings


def _scp_exit(status: str) -> int:
    if status == "converged":
        return EXIT_OK
    if status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_NOT_CONVERGED


def cmd_solve(args) -> int:
    doc = load_scenario(args.scenario)
    spec = build_spec(doc)
    settings = _apply_overrides(args, build_scp_settings(
        doc, mode=args.mode, relax=args.relax,
        torque_limits=args.torque_limits))
    report = solve_scp(spec, settings)
    out = _out_dir(args, args.scenario)
    doc_out = report.to_dict()
    doc_out["final_eps"] = report.final_eps
    if report.trajectory is not None:
        traj_path = os.path.join(out, "trajectory.csv")
        write_trajectory_csv(traj_path, spec, report.trajectory)
        doc_out["trajectory_file"] = os.path.basename(traj_path)
    with open(os.path.join(out, "report.json"), "w") as fh:
        fh.write(canonical_json(doc_out))
    print(f"solve: {report.status} after {report.total_iterations} "
          f"iterations, final eps {report.final_eps:.3e}")
    return _scp_exit(report.status)


def cmd_plan(args) -> int:
    doc = load_scenario(args.scenario)
    spec = build_spec(doc)
    if args.terrain:
        surfaces = load_terrain_file(args.terrain)
        worst = max(spec.schedule.surface_assignment.values(), default=-1)
        if worst >= len(surfaces):
            raise ScenarioError(
                f"terrain file has {len(surfaces)} surfaces but the schedule "
                f"references surface {worst}")
        spec.surfaces = surfaces
    settings = build_plan_settings(doc)
    report = plan_contacts(spec, settings)
    out = _out_dir(args, args.scenario)
    with open(os.path.join(out, "plan.json"), "w") as fh:
        fh.write(canonical_json(report.to_dict()))
    if report.trajectory is not None:
        write_trajectory_csv(os.path.join(out, "plan_trajectory.csv"), spec,
                             report.trajectory)
    print(f"plan: {report.status}, nodes {report.nodes_explored}, "
          f"objective {report.objective:.6g}, gap {report.gap:.2e}")
    if report.status == "infeasible" or report.assignment is None:
        return EXIT_INFEASIBLE if report.status == "infeasible" \
            else EXIT_NOT_CONVERGED
    if args.refine:
        refined_spec = _spec_with_plan(spec, report)
        scp_settings = _apply_overrides(args, build_scp_settings(
            doc, mode=args.mode, relax=args.relax))
        scp_settings.optimize_contacts = False
        scp_report = solve_scp(refined_spec, scp_settings)
        doc_out = scp_report.to_dict()
        doc_out["final_eps"] = scp_report.final_eps
        if scp_report.trajectory is not None:
            write_trajectory_csv(os.path.join(out, "trajectory.csv"),
                                 refined_spec, scp_report.trajectory)
            doc_out["trajectory_file"] = "trajectory.csv"
        with open(os.path.join(out, "report.json"), "w") as fh:
            fh.write(canonical_json(doc_out))
        print(f"refine: {scp_report.status} after "
              f"{scp_report.total_iterations} iterations, final eps "
              f"{scp_report.final_eps:.3e}")
        return _scp_exit(scp_report.status)
    return EXIT_OK if report.status == "optimal" else EXIT_NOT_CONVERGED


def _spec_with_plan(spec, report):
    """Pin the planned footholds and surfaces into a copy of the spec."""
    from dataclasses import replace

    from .centroidal import ContactSchedule

    assignment = dict(spec.schedule.surface_assignment)
    locations = dict(spec.contact_locations)
    for slot in report.assignment.free_contacts:
        surface = report.assignment.surface_of(slot.index)
        locations[(slot.eff, slot.start)] = \
            report.assignment.positions[slot.index]
        if surface is not None:
            for t in range(slot.start, slot.end + 1):
                assignment[(slot.eff, t)] = surface
    schedule = ContactSchedule(
        horizon=spec.schedule.horizon, active_set=spec.schedule.active_set,
        surface_assignment=assignment)
    return replace(spec, schedule=schedule, contact_locations=locations)


def cmd_check(args) -> int:
    doc = load_scenario(args.scenario)
    spec = build_spec(doc)
    try:
        traj = read_trajectory_csv(args.trajectory, spec)
    except (OSError, ValueError, IndexError) as exc:
        raise ScenarioError(f"cannot read trajectory: {exc}") from exc
    violations = check_feasibility(traj, spec, tol=args.tol)
    integrated = integrate(spec, traj.wrenches, traj.contact_points,
                           traj.timesteps)
    err = convergence_error(traj, integrated)
    result = {
        "violations": {
            "friction": violations.friction,
            "cop": violations.cop,
            "timestep": violations.timestep,
            "reach": violations.reach,
            "membership": violations.membership,
            "max": violations.max_violation,
        },
        "integration_mismatch": {
            "eps_r": err.eps_r, "eps_l": err.eps_l, "eps_k": err.eps_k,
            "eps": err.eps,
        },
        "ok": violations.ok(args.tol),
    }
    sys.stdout.write(canonical_json(result))
    return EXIT_OK if result["ok"] else EXIT_INFEASIBLE


def _rescaled_doc(doc: dict, target: int) -> dict:
    """Schedule stretched to `target` timesteps at constant total duration."""
    import copy

    out = copy.deepcopy(doc)
    sched = out["schedule"]
    steps = []
    for phase in sched["phases"]:
        count = phase.get("steps")
        if count is None:
            count = max(1, round(float(phase["duration"]) / sched["dt_init"]))
            del phase["duration"]
        steps.append(int(count))
    total = sum(steps)
    scaled = [max(1, round(s * target / total)) for s in steps]
    scaled[-1] += target - sum(scaled)
    if scaled[-1] < 1:
        raise ScenarioError(f"cannot rescale schedule to horizon {target}")
    ratio = total / target
    for phase, count in zip(sched["phases"], scaled):
        phase["steps"] = count
    for key in ("dt_init", "dt_min", "dt_max"):
        sched[key] = sched[key] * ratio
    return out


def cmd_bench(args) -> int:
    doc = load_scenario(args.scenario)
    try:
        horizons = [int(h) for h in args.horizons.split(",") if h]
    except ValueError as exc:
        raise ScenarioError(f"bad --horizons value: {exc}") from exc
    if not horizons:
        raise ScenarioError("--horizons must list at least one horizon")
    horizons.sort()
    rows = []
    for horizon in horizons:
        variant = _rescaled_doc(doc, horizon)
        spec = build_spec(variant)
        settings = _apply_overrides(args, build_scp_settings(
            variant, mode=args.mode, relax=args.relax))
        t0 = time.perf_counter()
        report = solve_scp(spec, settings)
        wall = time.perf_counter() - t0
        rows.append((horizon, wall, report.total_iterations,
                     report.final_eps, report.status))
    lines = ["horizon,wall_time,iterations,final_eps,status"]
    lines += [f"{h},{w!r},{it},{eps!r},{status}"
              for h, w, it, eps, status in rows]
    table = "\n".join(lines) + "\n"
    sys.stdout.write(table)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bench.csv"), "w") as fh:
            fh.write(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multicontact",
        description="Multi-contact centroidal trajectory optimization")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, modes=True):
        p.add_argument("scenario", help="scenario JSON file")
        if modes:
            p.add_argument("--mode", choices=["momentum", "time", "contacts",
                                              "time+contacts"])
            p.add_argument("--relax", choices=["trust", "soft"])
            p.add_argument("--tol", type=float, default=None,
                           help="convergence tolerance on eps")
            p.add_argument("--max-iters", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")

    p_solve = sub.add_parser("solve", help="run the SCP trajectory optimizer")
    common(p_solve)
    p_solve.add_argument("--torque-limits", action="store_true",
                         help="enable the joint-torque band constraints")
    p_solve.add_argument("--dump-problems", default=None, metavar="DIR",
                         help="dump each conic subproblem as JSON")
    p_solve.set_defaults(func=cmd_solve, dump_problems=None)

    p_plan = sub.add_parser("plan", help="mixed-integer contact planning")
    common(p_plan)
    p_plan.add_argument("--terrain", default=None,
                        help="terrain JSON overriding the scenario surfaces")
    p_plan.add_argument("--refine", action="store_true",
                        help="run the SCP optimizer on the planned contacts")
    p_plan.set_defaults(func=cmd_plan, dump_problems=None,
                        torque_limits=False)

    p_check = sub.add_parser("check", help="audit a trajectory CSV")
    p_check.add_argument("scenario")
    p_check.add_argument("trajectory", help="trajectory CSV file")
    p_check.add_argument("--tol", type=float, default=1e-6)
    p_check.set_defaults(func=cmd_check)

    p_bench = sub.add_parser("bench", help="horizon-sweep timing table")
    common(p_bench)
    p_bench.add_argument("--horizons", default="20,40,60,80,100",
                         help="comma-separated horizon lengths")
    p_bench.set_defaults(func=cmd_bench, dump_problems=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None:
        np.random.seed(args.seed)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
