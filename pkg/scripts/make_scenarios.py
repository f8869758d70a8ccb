#!/usr/bin/env python3
"""Regenerate the bundled scenario files in scenarios/.

All geometry is authored here so the JSON files stay consistent; run this
script after changing any of the layouts below.
"""

import argparse
import os

import numpy as np

from multicontact.scenario import save_scenario


def rect(cx, cy, z, hx, hy):
    return [[cx - hx, cy - hy, z], [cx + hx, cy - hy, z],
            [cx + hx, cy + hy, z], [cx - hx, cy + hy, z]]


def tilted_rect(center, tilt, hx, hy):
    """Rectangle tilted by `tilt` radians about the y axis."""
    cx, cy, cz = center
    u = [np.cos(tilt), 0.0, -np.sin(tilt)]
    v = [0.0, 1.0, 0.0]
    return [[cx + sx * hx * u[0] + sy * hy * v[0],
             cy + sx * hx * u[1] + sy * hy * v[1],
             cz + sx * hx * u[2] + sy * hy * v[2]]
            for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1))]


def foot(eff_id, reach=1.3):
    return {"id": eff_id, "cop_min": [-0.06, -0.03], "cop_max": [0.06, 0.03],
            "max_reach": reach}


def paw(eff_id):
    return {"id": eff_id, "cop_min": [-0.02, -0.02], "cop_max": [0.02, 0.02],
            "max_reach": 0.9}


def static_stand():
    legs = ["lf", "rf", "lh", "rh"]
    locs = {"lf": [0.25, 0.18, 0.0], "rf": [0.25, -0.18, 0.0],
            "lh": [-0.25, 0.18, 0.0], "rh": [-0.25, -0.18, 0.0]}
    return {
        "robot": {
            "mass": 25.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.5]},
            "endeffectors": [paw(e) for e in legs],
        },
        "terrain": {"friction": 0.7,
                    "surfaces": [rect_surface(0.0, 0.0, 0.0, 1.0, 1.0)]},
        "schedule": {
            "dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.2,
            "phases": [{"steps": 8, "contacts": [
                {"endeffector": e, "surface": 0, "location": locs[e]}
                for e in legs]}],
        },
        "costs": {"com_displacement": [0.0, 0.0, 0.0]},
        "settings": {"mode": "momentum"},
    }


def rect_surface(cx, cy, z, hx, hy, friction=None):
    out = {"corners": rect(cx, cy, z, hx, hy)}
    if friction is not None:
        out["friction"] = friction
    return out


def _walk_phases(step_xs, swing=2, double=2, y=0.1):
    """Alternating-swing biped schedule over the given foothold x positions.

    step_xs: per double-support phase, the (lf_x, rf_x) foothold pair."""
    phases = []

    def stance(eff, x, sign, surface=0):
        return {"endeffector": eff, "surface": surface,
                "location": [x, sign * y, 0.0]}

    lf_x, rf_x = step_xs[0]
    phases.append({"steps": double, "contacts": [
        stance("lf", lf_x, 1), stance("rf", rf_x, -1)]})
    for i, (new_lf, new_rf) in enumerate(step_xs[1:]):
        if i % 2 == 0:
            phases.append({"steps": swing,
                           "contacts": [stance("rf", rf_x, -1)]})
            lf_x = new_lf
        else:
            phases.append({"steps": swing,
                           "contacts": [stance("lf", lf_x, 1)]})
            rf_x = new_rf
        phases.append({"steps": double, "contacts": [
            stance("lf", lf_x, 1), stance("rf", rf_x, -1)]})
    return phases


def flat_walk():
    phases = _walk_phases([(0.0, 0.0), (0.3, 0.0)], swing=2, double=2)
    phases[-1]["steps"] = 4
    doc = {
        "robot": {
            "mass": 60.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.85]},
            "endeffectors": [foot("lf"), foot("rf")],
        },
        "terrain": {"friction": 0.7,
                    "surfaces": [rect_surface(1.0, 0.0, 0.0, 2.0, 1.0)]},
        "schedule": {"dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.25,
                     "phases": phases},
        "costs": {"com_displacement": [0.25, 0.0, 0.0]},
        "settings": {"mode": "momentum"},
        "references": {"endeffectors": []},
    }
    _reference_from_locations(doc)
    return doc


def asymmetric_walk():
    """Fixed footholds zig-zag far laterally; freeing them pays off.

    The kinematic references sit on the centered walking line, while the
    scheduled footholds are shoved far to the outside. With the footholds
    pinned, the consensus cost and the lateral wobble are unavoidable;
    optimizing the contact locations recovers the centered line.
    """
    phases = _walk_phases([(0.0, 0.0), (0.3, 0.0)], swing=2, double=2, y=0.1)
    phases[-1]["steps"] = 4
    doc = {
        "robot": {
            "mass": 60.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.85]},
            "endeffectors": [foot("lf"), foot("rf")],
        },
        "terrain": {"friction": 0.7,
                    "surfaces": [rect_surface(1.0, 0.0, 0.0, 2.0, 1.0)]},
        "schedule": {"dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.25,
                     "phases": phases},
        "costs": {"com_displacement": [0.25, 0.0, 0.0],
                  "contact_consensus": 2000.0},
        "settings": {"mode": "contacts"},
        "references": {"endeffectors": []},
    }
    # References follow the centered footholds; then shove the swung
    # footholds far to the outside.
    _reference_from_locations(doc)
    for phase in phases[2:]:
        for c in phase["contacts"]:
            if c["location"][0] > 0.0:
                c["location"][1] *= 4.5
    return doc


def _reference_from_locations(doc):
    """Consensus references equal to the scheduled foothold locations."""
    refs = []
    t = 0
    for phase in doc["schedule"]["phases"]:
        for _ in range(phase["steps"]):
            t += 1
            for c in phase.get("contacts", []):
                refs.append({"endeffector": c["endeffector"], "t": t,
                             "position": list(c["location"])})
    doc["references"]["endeffectors"] = refs


def stairs(mu):
    """Aggressive two-step climb; the upper step is tilted 12 degrees.

    The stride onto the tilted step is long and the leg reach short, so the
    center of mass must cover real ground before the landing foot becomes
    active. At the nominal timestep that travel is friction-limited: high
    friction makes it, low friction needs the timestep optimization to
    stretch the early stance phases.
    """
    tilt = np.deg2rad(12.0)
    step_z = 0.12
    up_x = 1.2
    upper = tilted_rect([up_x, 0.0, 2 * step_z], tilt, 0.16, 0.4)
    lf0 = [0.0, 0.1, 0.0]
    rf0 = [0.0, -0.1, 0.0]
    lf1 = [0.45, 0.1, step_z]
    rf2 = [up_x, -0.1, 2 * step_z]
    phases = [
        {"steps": 1, "contacts": [
            {"endeffector": "lf", "surface": 0, "location": lf0},
            {"endeffector": "rf", "surface": 0, "location": rf0},
        ]},
        {"steps": 1, "contacts": [
            {"endeffector": "rf", "surface": 0, "location": rf0},
        ]},
        {"steps": 1, "contacts": [
            {"endeffector": "lf", "surface": 1, "location": lf1},
            {"endeffector": "rf", "surface": 0, "location": rf0},
        ]},
        {"steps": 1, "contacts": [
            {"endeffector": "lf", "surface": 1, "location": lf1},
        ]},
        {"steps": 2, "contacts": [
            {"endeffector": "lf", "surface": 1, "location": lf1},
            {"endeffector": "rf", "surface": 2, "location": rf2},
        ]},
    ]
    return {
        "robot": {
            "mass": 60.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.8]},
            "endeffectors": [foot("lf", reach=0.95), foot("rf", reach=0.95)],
        },
        "terrain": {"friction": mu, "surfaces": [
            rect_surface(0.0, 0.0, 0.0, 0.3, 0.4),
            rect_surface(0.45, 0.0, step_z, 0.14, 0.4),
            {"corners": upper},
        ]},
        "schedule": {"dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.2,
                     "phases": phases},
        "costs": {"com_displacement": [up_x, 0.0, 2 * step_z]},
        "settings": {"mode": "time" if mu < 0.3 else "momentum"},
    }


def hand_stairs():
    """Step up a tall ledge with a supporting hand on a side table."""
    step_z = 0.25
    phases = [
        {"steps": 2, "contacts": [
            {"endeffector": "lf", "surface": 0, "location": [0.0, 0.1, 0.0]},
            {"endeffector": "rf", "surface": 0, "location": [0.0, -0.1, 0.0]},
        ]},
        {"steps": 3, "contacts": [
            {"endeffector": "rf", "surface": 0, "location": [0.0, -0.1, 0.0]},
            {"endeffector": "hand", "surface": 2,
             "location": [0.35, 0.45, 0.8]},
        ]},
        {"steps": 3, "contacts": [
            {"endeffector": "lf", "surface": 1,
             "location": [0.45, 0.1, step_z]},
            {"endeffector": "rf", "surface": 0, "location": [0.0, -0.1, 0.0]},
            {"endeffector": "hand", "surface": 2,
             "location": [0.35, 0.45, 0.8]},
        ]},
        {"steps": 4, "contacts": [
            {"endeffector": "lf", "surface": 1,
             "location": [0.45, 0.1, step_z]},
            {"endeffector": "rf", "surface": 1,
             "location": [0.45, -0.1, step_z]},
        ]},
    ]
    hand = {"id": "hand", "cop_min": [-0.01, -0.01], "cop_max": [0.01, 0.01],
            "max_reach": 1.1, "is_hand": True}
    return {
        "robot": {
            "mass": 60.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.85]},
            "endeffectors": [foot("lf"), foot("rf"), hand],
        },
        "terrain": {"friction": 0.7, "surfaces": [
            rect_surface(0.0, 0.0, 0.0, 0.3, 0.35),
            rect_surface(0.5, 0.0, step_z, 0.2, 0.35),
            rect_surface(0.35, 0.45, 0.8, 0.15, 0.1),
        ]},
        "schedule": {"dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.3,
                     "phases": phases},
        "costs": {"com_displacement": [0.45, 0.0, step_z]},
        "settings": {"mode": "momentum"},
    }


def gallop():
    """Quadruped bound with a global flight phase."""
    legs = {"lf": [0.25, 0.15], "rf": [0.25, -0.15],
            "lh": [-0.25, 0.15], "rh": [-0.25, -0.15]}

    def stance(eff, dx):
        x0, y0 = legs[eff]
        return {"endeffector": eff, "surface": 0,
                "location": [x0 + dx, y0, 0.0]}

    phases = [
        {"steps": 2, "contacts": [stance(e, 0.0) for e in legs]},
        {"steps": 1, "contacts": [stance("lh", 0.0), stance("rh", 0.0)]},
        {"steps": 1, "contacts": []},
        {"steps": 1, "contacts": [stance("lf", 0.3), stance("rf", 0.3)]},
        {"steps": 3, "contacts": [stance("lf", 0.3), stance("rf", 0.3),
                                  stance("lh", 0.3), stance("rh", 0.3)]},
    ]
    return {
        "robot": {
            "mass": 25.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.5]},
            "endeffectors": [paw(e) for e in legs],
        },
        "terrain": {"friction": 0.8,
                    "surfaces": [rect_surface(0.5, 0.0, 0.0, 1.5, 1.0)]},
        "schedule": {"dt_init": 0.08, "dt_min": 0.04, "dt_max": 0.2,
                     "phases": phases},
        "costs": {"com_displacement": [0.3, 0.0, 0.0]},
        "settings": {"mode": "momentum"},
    }


def stepping_stones():
    """Single-foot hopper over a field of stones; surfaces chosen by the MIP."""
    stones = [
        rect_surface(0.0, 0.0, 0.0, 0.12, 0.12, friction=0.7),
        rect_surface(0.35, 0.0, 0.05, 0.12, 0.12, friction=0.7),
        rect_surface(0.35, 0.25, 0.0, 0.12, 0.12, friction=0.7),
    ]
    phases = [
        {"steps": 2, "contacts": [
            {"endeffector": "foot", "surface": 0,
             "location": [0.0, 0.0, 0.0]}]},
        {"steps": 1, "contacts": []},
        {"steps": 3, "contacts": [{"endeffector": "foot", "surface": 0}]},
    ]
    return {
        "robot": {
            "mass": 30.0, "gravity": [0.0, 0.0, -9.81],
            "initial_state": {"com": [0.0, 0.0, 0.8]},
            "endeffectors": [{"id": "foot", "cop_min": [-0.05, -0.05],
                              "cop_max": [0.05, 0.05], "max_reach": 1.2}],
        },
        "terrain": {"friction": 0.7, "surfaces": stones},
        "schedule": {"dt_init": 0.1, "dt_min": 0.05, "dt_max": 0.2,
                     "phases": phases},
        "costs": {"com_displacement": [0.35, 0.0, 0.05],
                  "contact_consensus": 10.0},
        "settings": {"mode": "contacts",
                     "plan": {"gap_tol": 1e-4, "max_nodes": 100,
                              "refine_iters": 2, "reachability": "linear",
                              "dp_min": [-0.6, -0.6, -0.3],
                              "dp_max": [0.6, 0.6, 0.3]}},
        "references": {"endeffectors": [
            {"endeffector": "foot", "t": t, "position": [0.35, 0.0, 0.05]}
            for t in (4, 5, 6)]},
    }


SCENARIOS = {
    "static_stand": static_stand,
    "flat_walk": flat_walk,
    "asymmetric_walk": asymmetric_walk,
    "stairs_mu035": lambda: stairs(0.35),
    "stairs_mu025": lambda: stairs(0.25),
    "hand_stairs": hand_stairs,
    "gallop": gallop,
    "stepping_stones": stepping_stones,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    default_dir = os.path.join(os.path.dirname(__file__), "..", "scenarios")
    parser.add_argument("--out", default=os.path.normpath(default_dir))
    args = parser.parse_args()
    os.makedirs(args.out, exist_ok=True)
    for name, make in SCENARIOS.items():
        path = os.path.join(args.out, f"{name}.json")
        save_scenario(make(), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
