"""Scenario files: validated JSON input, canonical output, trajectory CSV.

A scenario document collects the robot data, the terrain, the contact
schedule, the cost weights and the run settings in one JSON file. Documents
are validated against the published schema (scenario_schema.json, unknown
keys rejected) with violations reported as JSON-pointer paths. Serialization
is canonical: sorted keys, two-space indent, shortest round-trip decimals, so
parse -> serialize -> parse is byte-identical.
"""

from __future__ import annotations

import csv
import json
from functools import lru_cache
from importlib import resources

import jsonschema
import numpy as np

from .centroidal import (CentroidalState, ContactSchedule, ContactWrench,
                         CostWeights, EndeffectorConfig, ProblemSpec,
                         ReferenceTrajectories, Trajectory)
from .contacts import PlanSettings
from .scp import ScpSettings, TorqueLimitData
from .terrain import TerrainSurface


class ScenarioError(ValueError):
    """Invalid scenario document; message lists JSON-pointer paths."""


@lru_cache(maxsize=1)
def scenario_schema() -> dict:
    text = resources.files("multicontact").joinpath(
        "scenario_schema.json").read_text()
    return json.loads(text)


def _pointer(error: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in error.absolute_path)


def validate_scenario(doc: dict):
    """Schema validation; raises ScenarioError with JSON-pointer paths."""
    validator = jsonschema.Draft202012Validator(scenario_schema())
    errors = sorted(validator.iter_errors(doc), key=_pointer)
    if errors:
        lines = [f"{_pointer(e)}: {e.message}" for e in errors]
        raise ScenarioError("invalid scenario:\n" + "\n".join(lines))


def canonical_json(doc) -> str:
    """Canonical serialization: sorted keys, stable layout, shortest decimals."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_scenario(path: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario is not valid JSON: {exc}") from exc
    validate_scenario(doc)
    return doc


def save_scenario(doc: dict, path: str):
    validate_scenario(doc)
    with open(path, "w") as fh:
        fh.write(canonical_json(doc))


# ---------------------------------------------------------------------------
# Document -> problem data
# ---------------------------------------------------------------------------


def _expand_phases(schedule_doc: dict):
    """Phase list -> per-timestep active sets, assignments and locations."""
    dt_init = float(schedule_doc["dt_init"])
    active = [()]
    assignment = {}
    location_at = {}
    for phase in schedule_doc["phases"]:
        steps = phase.get("steps")
        if steps is None:
            steps = max(1, round(float(phase["duration"]) / dt_init))
        contacts = phase.get("contacts", [])
        start = len(active)
        for _ in range(int(steps)):
            t = len(active)
            active.append(tuple(c["endeffector"] for c in contacts))
            for c in contacts:
                assignment[(c["endeffector"], t)] = int(c["surface"])
                if "location" in c:
                    location_at[(c["endeffector"], t)] = np.asarray(
                        c["location"], dtype=float)
        del start
    return active, assignment, location_at


def build_spec(doc: dict) -> ProblemSpec:
    """Construct the full problem data from a validated scenario document."""
    robot = doc["robot"]
    effs = [
        EndeffectorConfig(
            id=e["id"],
            rotation=np.asarray(e.get("rotation", np.eye(3)), dtype=float),
            cop_min=e["cop_min"], cop_max=e["cop_max"],
            max_reach=float(e["max_reach"]),
            is_hand=bool(e.get("is_hand", False)),
        )
        for e in robot["endeffectors"]
    ]
    known = {e.id for e in effs}
    surfaces = [
        TerrainSurface.from_corners(s["corners"], friction=s.get("friction"))
        for s in doc["terrain"]["surfaces"]
    ]
    sched_doc = doc["schedule"]
    active, assignment, location_at = _expand_phases(sched_doc)
    for (eff, t) in assignment:
        if eff not in known:
            raise ScenarioError(f"/schedule/phases: unknown endeffector '{eff}'")
        if assignment[(eff, t)] >= len(surfaces):
            raise ScenarioError(
                f"/schedule/phases: surface {assignment[(eff, t)]} out of range")
    horizon = len(active) - 1
    if horizon < 1:
        raise ScenarioError("/schedule/phases: empty schedule")
    schedule = ContactSchedule(horizon=horizon, active_set=tuple(active),
                               surface_assignment=assignment)
    # Keyed by the first timestep of each contiguous stance run.
    contact_locations = {}
    for eff in known:
        for start, end, _surf in schedule.contact_phases(eff):
            for t in range(start, end + 1):
                loc = location_at.get((eff, t))
                if loc is not None:
                    contact_locations[(eff, start)] = loc
                    break
    weights = CostWeights(**doc.get("costs", {}))
    references = None
    refs_doc = doc.get("references")
    if refs_doc is not None:
        momenta = {int(r["t"]): np.asarray(r["value"], dtype=float)
                   for r in refs_doc.get("momenta", [])} or None
        eff_refs = {(r["endeffector"], int(r["t"])):
                    np.asarray(r["position"], dtype=float)
                    for r in refs_doc.get("endeffectors", [])} or None
        references = ReferenceTrajectories(momenta=momenta,
                                           endeffectors=eff_refs)
    torque_data = None
    tl = doc.get("torque_limits")
    if tl is not None:
        offsets = {int(r["t"]): np.asarray(r["value"], dtype=float)
                   for r in tl.get("offsets", [])}
        maps = {}
        for entry in tl["maps"]:
            eff = entry["endeffector"]
            mat = np.asarray(entry["matrix"], dtype=float)
            if "t" in entry:
                maps[(eff, int(entry["t"]))] = mat
            else:
                for t in range(1, horizon + 1):
                    if eff in schedule.active(t):
                        maps[(eff, t)] = mat
        torque_data = TorqueLimitData(offsets=offsets, maps=maps,
                                      tau_min=tl["tau_min"],
                                      tau_max=tl["tau_max"])
    return ProblemSpec(
        mass=float(robot["mass"]),
        gravity=np.asarray(robot["gravity"], dtype=float),
        friction=float(doc["terrain"]["friction"]),
        schedule=schedule,
        endeffectors=effs,
        surfaces=surfaces,
        dt_init=float(sched_doc["dt_init"]),
        dt_min=float(sched_doc["dt_min"]),
        dt_max=float(sched_doc["dt_max"]),
        initial_state=CentroidalState(
            com=robot["initial_state"]["com"],
            lin_momentum=robot["initial_state"].get("lin_momentum", np.zeros(3)),
            ang_momentum=robot["initial_state"].get("ang_momentum", np.zeros(3)),
        ),
        contact_locations=contact_locations,
        cost_weights=weights,
        references=references,
        torque_limit_data=torque_data,
    )


_MODE_FLAGS = {
    "momentum": (False, False),
    "time": (True, False),
    "contacts": (False, True),
    "time+contacts": (True, True),
}


def build_scp_settings(doc: dict, mode: str | None = None,
                       relax: str | None = None,
                       torque_limits: bool = False) -> ScpSettings:
    """Run settings from the scenario's settings section plus CLI overrides."""
    cfg = doc.get("settings", {})
    mode = mode or cfg.get("mode", "momentum")
    if mode not in _MODE_FLAGS:
        raise ScenarioError(f"/settings/mode: unknown mode '{mode}'")
    opt_time, opt_contacts = _MODE_FLAGS[mode]
    settings = ScpSettings(
        optimize_time=opt_time,
        optimize_contacts=opt_contacts,
        torque_limits=torque_limits,
        relaxation=relax or cfg.get("relax", "trust"),
        eps_tol=float(cfg.get("eps_tol", 1e-4)),
        eps_stall_tol=float(cfg.get("eps_stall_tol", 1e-6)),
        max_outer_iters=int(cfg.get("max_outer_iters", 20)),
        trust_rho0=float(cfg.get("trust_rho0", 1.0)),
        trust_decay=float(cfg.get("trust_decay", 0.4)),
        soft_penalty=float(cfg.get("soft_penalty", 1e5)),
    )
    if "solver_tol" in cfg:
        settings.solver.tol = float(cfg["solver_tol"])
    return settings


def build_plan_settings(doc: dict) -> PlanSettings:
    cfg = dict(doc.get("settings", {}).get("plan", {}))
    if "optimize_time" not in cfg:
        mode = doc.get("settings", {}).get("mode", "momentum")
        cfg["optimize_time"] = _MODE_FLAGS.get(mode, (False, False))[0]
    return PlanSettings(**cfg)


def load_terrain_file(path: str):
    """Standalone terrain file: JSON array of {corners, friction} surfaces."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read terrain file: {exc}") from exc
    schema = {
        "type": "array", "minItems": 1,
        "items": scenario_schema()["$defs"]["surface"],
        "$defs": scenario_schema()["$defs"],
    }
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=_pointer)
    if errors:
        lines = [f"{_pointer(e)}: {e.message}" for e in errors]
        raise ScenarioError("invalid terrain file:\n" + "\n".join(lines))
    return [TerrainSurface.from_corners(s["corners"],
                                        friction=s.get("friction"))
            for s in doc]


# ---------------------------------------------------------------------------
# Trajectory CSV
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    return repr(float(value))


def trajectory_header(spec: ProblemSpec):
    cols = ["t", "dt", "com_x", "com_y", "com_z", "l_x", "l_y", "l_z",
            "k_x", "k_y", "k_z"]
    for cfg in spec.endeffectors:
        e = cfg.id
        cols += [f"{e}_active", f"{e}_p_x", f"{e}_p_y", f"{e}_p_z",
                 f"{e}_f_x", f"{e}_f_y", f"{e}_f_z",
                 f"{e}_cop_x", f"{e}_cop_y", f"{e}_lam"]
    return cols


def write_trajectory_csv(path: str, spec: ProblemSpec, traj: Trajectory):
    """One row per timestep 0..N; controls populate rows 1..N."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_header(spec))
        for t in range(traj.horizon + 1):
            st = traj.states[t]
            row = [str(t), _fmt(traj.timesteps[t - 1]) if t >= 1 else ""]
            row += [_fmt(v) for v in np.concatenate(
                [st.com, st.lin_momentum, st.ang_momentum])]
            for cfg in spec.endeffectors:
                key = (cfg.id, t)
                if t >= 1 and key in traj.wrenches:
                    w = traj.wrenches[key]
                    p = traj.contact_points[key]
                    row.append("1")
                    row += [_fmt(v) for v in p]
                    row += [_fmt(v) for v in w.force]
                    row += [_fmt(v) for v in w.cop]
                    row.append(_fmt(w.normal_torque))
                else:
                    row += ["0"] + [""] * 9
            writer.writerow(row)


def read_trajectory_csv(path: str, spec: ProblemSpec) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = trajectory_header(spec)
        if header != expected:
            raise ScenarioError("trajectory CSV header does not match scenario")
        states, wrenches, points, timesteps = [], {}, {}, []
        for row in reader:
            t = int(row[0])
            vals = row[2:11]
            states.append(CentroidalState(
                com=[float(v) for v in vals[0:3]],
                lin_momentum=[float(v) for v in vals[3:6]],
                ang_momentum=[float(v) for v in vals[6:9]],
            ))
            if t >= 1:
                timesteps.append(float(row[1]))
            base = 11
            for cfg in spec.endeffectors:
                block = row[base:base + 10]
                base += 10
                if t >= 1 and block[0] == "1":
                    points[(cfg.id, t)] = np.array(
                        [float(v) for v in block[1:4]])
                    wrenches[(cfg.id, t)] = ContactWrench(
                        force=[float(v) for v in block[4:7]],
                        cop=[float(v) for v in block[7:9]],
                        normal_torque=float(block[9]),
                    )
    return Trajectory(states=states, wrenches=wrenches, contact_points=points,
                      timesteps=np.array(timesteps))
