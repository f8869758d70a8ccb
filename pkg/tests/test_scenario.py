"""Scenario document validation, canonical JSON, trajectory CSV."""

import copy
import glob
import json
import os

import numpy as np
import pytest

from multicontact.centroidal import ContactWrench, integrate
from multicontact.scenario import (ScenarioError, build_plan_settings,
                                   build_scp_settings, build_spec,
                                   canonical_json, load_scenario,
                                   load_terrain_file, read_trajectory_csv,
                                   save_scenario, validate_scenario,
                                   write_trajectory_csv)

SCENARIO_DIR = os.path.join(os.path.dirname(__file__), "..", "scenarios")


def bundled_scenarios():
    return sorted(glob.glob(os.path.join(SCENARIO_DIR, "*.json")))


def test_bundled_scenarios_exist_and_validate():
    paths = bundled_scenarios()
    assert len(paths) == 8
    for path in paths:
        doc = load_scenario(path)
        spec = build_spec(doc)
        assert spec.horizon >= 1


@pytest.mark.parametrize("path", bundled_scenarios())
def test_canonical_round_trip_is_byte_identical(path, tmp_path):
    with open(path) as fh:
        original = fh.read()
    doc = json.loads(original)
    # Bundled files are already canonical.
    assert canonical_json(doc) == original
    out = tmp_path / "copy.json"
    save_scenario(doc, str(out))
    reparsed = json.loads(out.read_text())
    assert canonical_json(reparsed) == original
    assert reparsed == doc


def test_validation_reports_json_pointer_paths():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "static_stand.json"))
    bad = copy.deepcopy(doc)
    bad["robot"]["mass"] = "heavy"
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert "/robot/mass" in str(exc.value)
    bad = copy.deepcopy(doc)
    bad["terrain"]["surfaces"][0]["corners"][1] = [1.0, 2.0]
    with pytest.raises(ScenarioError) as exc:
        validate_scenario(bad)
    assert "/terrain/surfaces/0/corners/1" in str(exc.value)
    bad = copy.deepcopy(doc)
    bad["unknown_section"] = {}
    with pytest.raises(ScenarioError):
        validate_scenario(bad)


def test_load_scenario_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(str(tmp_path / "missing.json"))
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(str(broken))


def test_build_spec_schedule_expansion():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "flat_walk.json"))
    spec = build_spec(doc)
    total_steps = sum(p.get("steps", 1) for p in doc["schedule"]["phases"])
    assert spec.horizon == total_steps
    # Every active (endeffector, timestep) pair carries a surface assignment.
    for t in range(1, spec.horizon + 1):
        for eff in spec.schedule.active(t):
            assert (eff, t) in spec.schedule.surface_assignment


def test_build_spec_rejects_bad_references():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "static_stand.json"))
    bad = copy.deepcopy(doc)
    bad["schedule"]["phases"][0]["contacts"][0]["surface"] = 7
    with pytest.raises(ScenarioError) as exc:
        build_spec(bad)
    assert "surface 7 out of range" in str(exc.value)
    bad = copy.deepcopy(doc)
    bad["schedule"]["phases"][0]["contacts"][0]["endeffector"] = "tail"
    with pytest.raises(ScenarioError) as exc:
        build_spec(bad)
    assert "unknown endeffector" in str(exc.value)


def test_build_scp_settings_modes():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "static_stand.json"))
    s = build_scp_settings(doc, mode="momentum")
    assert not s.optimize_time and not s.optimize_contacts
    s = build_scp_settings(doc, mode="time")
    assert s.optimize_time and not s.optimize_contacts
    s = build_scp_settings(doc, mode="contacts")
    assert not s.optimize_time and s.optimize_contacts
    s = build_scp_settings(doc, mode="time+contacts", relax="soft")
    assert s.optimize_time and s.optimize_contacts
    assert s.relaxation == "soft"
    with pytest.raises(ScenarioError):
        build_scp_settings(doc, mode="teleport")


def test_build_plan_settings_inherits_mode():
    doc = load_scenario(os.path.join(SCENARIO_DIR, "stepping_stones.json"))
    settings = build_plan_settings(doc)
    assert settings is not None
    timed = copy.deepcopy(doc)
    timed["settings"]["mode"] = "time"
    assert build_plan_settings(timed).optimize_time


def test_trajectory_csv_round_trip_exact(tmp_path):
    doc = load_scenario(os.path.join(SCENARIO_DIR, "static_stand.json"))
    spec = build_spec(doc)
    rng = np.random.default_rng(13)
    wrenches, points = {}, {}
    for t in range(1, spec.horizon + 1):
        for eff in spec.schedule.active(t):
            wrenches[(eff, t)] = ContactWrench(
                force=rng.standard_normal(3) * 100.0,
                cop=rng.uniform(-0.05, 0.05, 2),
                normal_torque=float(rng.standard_normal()))
            points[(eff, t)] = rng.standard_normal(3)
    timesteps = rng.uniform(spec.dt_min, spec.dt_max, spec.horizon)
    traj = integrate(spec, wrenches, points, timesteps)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(str(path), spec, traj)
    back = read_trajectory_csv(str(path), spec)
    assert back.horizon == traj.horizon
    assert np.array_equal(back.timesteps, traj.timesteps)
    for t in range(traj.horizon + 1):
        assert np.array_equal(back.states[t].com, traj.states[t].com)
        assert np.array_equal(back.states[t].lin_momentum,
                              traj.states[t].lin_momentum)
        assert np.array_equal(back.states[t].ang_momentum,
                              traj.states[t].ang_momentum)
    for key, w in traj.wrenches.items():
        assert np.array_equal(back.wrenches[key].force, w.force)
        assert np.array_equal(back.wrenches[key].cop, w.cop)
        assert back.wrenches[key].normal_torque == w.normal_torque
        assert np.array_equal(back.contact_points[key], points[key])
    # Row 0 is the initial state with empty control cells.
    first_rows = path.read_text().splitlines()[1].split(",")
    assert first_rows[0] == "0" and first_rows[1] == ""


def test_trajectory_csv_header_mismatch(tmp_path):
    doc = load_scenario(os.path.join(SCENARIO_DIR, "static_stand.json"))
    spec = build_spec(doc)
    path = tmp_path / "bad.csv"
    path.write_text("nope,nope\n1,2\n")
    with pytest.raises(ScenarioError):
        read_trajectory_csv(str(path), spec)


def test_load_terrain_file(tmp_path):
    path = tmp_path / "terrain.json"
    path.write_text(json.dumps([
        {"corners": [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
         "friction": 0.6}]))
    surfaces = load_terrain_file(str(path))
    assert len(surfaces) == 1 and surfaces[0].friction == 0.6
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"friction": 0.6}]))
    with pytest.raises(ScenarioError):
        load_terrain_file(str(bad))
