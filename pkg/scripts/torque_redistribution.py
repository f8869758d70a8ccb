#!/usr/bin/env python3
"""Two-channel force redistribution under a joint-torque limit.

A standing robot on two symmetric contacts splits its weight evenly. Bounding
the joint torque of one channel (modeled as that contact's normal force
through the affine torque map) forces the optimizer to saturate the bounded
channel and route the remainder through the free one.
"""

import numpy as np

from multicontact.centroidal import (CentroidalState, ContactSchedule,
                                     CostWeights, EndeffectorConfig,
                                     ProblemSpec)
from multicontact.scp import ScpSettings, TorqueLimitData, solve_scp
from multicontact.terrain import TerrainSurface


def make_spec(horizon=4):
    surface = TerrainSurface.from_corners(
        [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0],
         [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]])
    locs = {"a": np.array([0.15, 0.0, 0.0]), "b": np.array([-0.15, 0.0, 0.0])}
    active = [()] + [("a", "b")] * horizon
    sched = ContactSchedule(
        horizon=horizon, active_set=tuple(active),
        surface_assignment={(e, t): 0 for e in ("a", "b")
                            for t in range(1, horizon + 1)})
    effs = [EndeffectorConfig(id=e, rotation=np.eye(3),
                              cop_min=np.array([-0.05, -0.05]),
                              cop_max=np.array([0.05, 0.05]), max_reach=1.0)
            for e in ("a", "b")]
    return ProblemSpec(
        mass=20.0, gravity=np.array([0.0, 0.0, -9.81]), friction=0.8,
        schedule=sched, endeffectors=effs, surfaces=[surface],
        dt_init=0.1, dt_min=0.05, dt_max=0.2,
        initial_state=CentroidalState(np.array([0.0, 0.0, 0.6]),
                                      np.zeros(3), np.zeros(3)),
        contact_locations={(e, 1): locs[e] for e in ("a", "b")},
        cost_weights=CostWeights(com_displacement=np.zeros(3)))


def torque_limit(spec, cap):
    """One joint whose torque equals channel a's normal force."""
    pick_fz = np.zeros((1, 6))
    pick_fz[0, 2] = 1.0
    maps = {}
    for t in range(1, spec.horizon + 1):
        maps[("a", t)] = pick_fz
        maps[("b", t)] = np.zeros((1, 6))
    return TorqueLimitData(offsets={}, maps=maps,
                           tau_min=np.array([0.0]), tau_max=np.array([cap]))


def normal_forces(traj, spec, t):
    return {e: traj.wrenches[(e, t)].force[2] for e in ("a", "b")}


def main():
    spec = make_spec()
    cap = 60.0

    base = solve_scp(spec, ScpSettings())
    print("baseline:", base.status)
    for t in range(1, spec.horizon + 1):
        print(f"  t={t}", {k: round(v, 3)
                           for k, v in normal_forces(base.trajectory, spec, t).items()})

    spec.torque_limit_data = torque_limit(spec, cap)
    limited = solve_scp(spec, ScpSettings(torque_limits=True))
    print(f"with channel a capped at {cap} N:", limited.status)
    for t in range(1, spec.horizon + 1):
        forces = normal_forces(limited.trajectory, spec, t)
        print(f"  t={t}", {k: round(v, 3) for k, v in forces.items()},
              f"(a at limit: {abs(forces['a'] - cap) <= 1e-6})")


if __name__ == "__main__":
    main()
