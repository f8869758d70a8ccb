"""Centroidal dynamics integration oracle and feasibility audit."""

import numpy as np
import pytest

from multicontact.centroidal import (CentroidalState, ContactSchedule,
                                     ContactWrench, CostWeights,
                                     EndeffectorConfig, ProblemSpec,
                                     check_feasibility, convergence_error,
                                     integrate)
from multicontact.terrain import TerrainSurface


FLAT = TerrainSurface.from_corners(
    [[-2.0, -2.0, 0.0], [2.0, -2.0, 0.0], [2.0, 2.0, 0.0], [-2.0, 2.0, 0.0]])


def _spec(horizon, active, mass=2.5, friction=0.8, com=(0.0, 0.0, 1.0),
          dt=0.01):
    sched = ContactSchedule(
        horizon=horizon, active_set=tuple(active),
        surface_assignment={(e, t): 0 for t in range(1, horizon + 1)
                            for e in active[t]})
    effs = sorted({e for grp in active for e in grp})
    return ProblemSpec(
        mass=mass, gravity=np.array([0.0, 0.0, -9.81]), friction=friction,
        schedule=sched,
        endeffectors=[EndeffectorConfig(id=e, rotation=np.eye(3),
                                        cop_min=np.array([-0.1, -0.1]),
                                        cop_max=np.array([0.1, 0.1]),
                                        max_reach=5.0) for e in effs],
        surfaces=[FLAT], dt_init=dt, dt_min=dt / 2, dt_max=dt * 4,
        initial_state=CentroidalState(np.asarray(com, dtype=float),
                                      np.zeros(3), np.zeros(3)),
        cost_weights=CostWeights(com_displacement=np.zeros(3)))


def test_free_fall_closed_form():
    n = 100
    dt = 0.01
    spec = _spec(n, [()] * (n + 1), mass=2.5, dt=dt)
    traj = integrate(spec, {}, {}, np.full(n, dt))
    g = spec.gravity
    for t in range(n + 1):
        st = traj.states[t]
        # Semi-implicit closed forms: momentum linear in t, CoM quadratic
        # through the triangular sum.
        lin_ref = spec.mass * g * (t * dt)
        com_ref = spec.initial_state.com + g * dt * dt * (t * (t + 1) / 2.0)
        assert np.max(np.abs(st.lin_momentum - lin_ref)) <= 1e-12
        assert np.max(np.abs(st.com - com_ref)) <= 1e-12
        # Nothing ever exerts torque: angular momentum is bitwise constant.
        assert np.array_equal(st.ang_momentum, np.zeros(3))


def test_hover_closed_form():
    n = 100
    dt = 0.01
    active = [()] + [("foot",)] * n
    spec = _spec(n, active, mass=3.0, dt=dt)
    wrench = ContactWrench(force=-spec.mass * spec.gravity,
                           cop=np.zeros(2))
    wrenches = {("foot", t): wrench for t in range(1, n + 1)}
    points = {("foot", t): np.array([0.0, 0.0, 0.0]) for t in range(1, n + 1)}
    traj = integrate(spec, wrenches, points, np.full(n, dt))
    for t in range(n + 1):
        st = traj.states[t]
        assert np.max(np.abs(st.com - spec.initial_state.com)) <= 1e-12
        assert np.max(np.abs(st.lin_momentum)) <= 1e-12
        assert np.max(np.abs(st.ang_momentum)) <= 1e-12


def _random_plan(rng, n, effs=("lf", "rf")):
    active = [()] + [effs] * n
    spec = _spec(n, active, mass=40.0, dt=0.05)
    wrenches = {}
    points = {}
    for t in range(1, n + 1):
        for e in effs:
            wrenches[(e, t)] = ContactWrench(
                force=rng.standard_normal(3) * 50.0,
                cop=rng.uniform(-0.1, 0.1, 2),
                normal_torque=float(rng.standard_normal()))
            points[(e, t)] = rng.standard_normal(3) * 0.3
    timesteps = rng.uniform(spec.dt_min, spec.dt_max, n)
    return spec, wrenches, points, timesteps


def test_split_is_bitwise_exact():
    rng = np.random.default_rng(17)
    n = 100
    spec, wrenches, points, timesteps = _random_plan(rng, n)
    full = integrate(spec, wrenches, points, timesteps)
    for j in (1, 37, 50, 99):
        head = integrate(
            _spec(j, [()] + [("lf", "rf")] * j, mass=40.0, dt=0.05),
            {k: v for k, v in wrenches.items() if k[1] <= j},
            {k: v for k, v in points.items() if k[1] <= j},
            timesteps[:j])
        tail_spec = _spec(n - j, [()] + [("lf", "rf")] * (n - j),
                          mass=40.0, dt=0.05)
        tail_spec.initial_state = head.states[-1]
        tail = integrate(
            tail_spec,
            {(e, t - j): w for (e, t), w in wrenches.items() if t > j},
            {(e, t - j): p for (e, t), p in points.items() if t > j},
            timesteps[j:])
        for k in range(n - j + 1):
            a, b = full.states[j + k], tail.states[k]
            assert np.array_equal(a.com, b.com)
            assert np.array_equal(a.lin_momentum, b.lin_momentum)
            assert np.array_equal(a.ang_momentum, b.ang_momentum)


def test_integrate_matches_independent_accumulation():
    # Independent re-implementation of the semi-implicit recursion, written
    # with explicit component arithmetic rather than the library's helpers.
    rng = np.random.default_rng(23)
    n = 20
    spec, wrenches, points, timesteps = _random_plan(rng, n)
    traj = integrate(spec, wrenches, points, timesteps)
    com = spec.initial_state.com.copy()
    lin = np.zeros(3)
    ang = np.zeros(3)
    for t in range(1, n + 1):
        dt = timesteps[t - 1]
        f = spec.mass * spec.gravity
        for e in ("lf", "rf"):
            f = f + wrenches[(e, t)].force
        lin = lin + f * dt
        com = com + lin / spec.mass * dt
        tau = np.zeros(3)
        for e in ("lf", "rf"):
            w = wrenches[(e, t)]
            lever3 = np.array([w.cop[0], w.cop[1], 0.0])
            arm = points[(e, t)] + lever3 - com
            cx = np.array([
                arm[1] * w.force[2] - arm[2] * w.force[1],
                arm[2] * w.force[0] - arm[0] * w.force[2],
                arm[0] * w.force[1] - arm[1] * w.force[0]])
            tau = tau + cx + np.array([0.0, 0.0, w.normal_torque])
        ang = ang + tau * dt
        st = traj.states[t]
        assert np.max(np.abs(st.com - com)) <= 1e-12
        assert np.max(np.abs(st.lin_momentum - lin)) <= 1e-12
        assert np.max(np.abs(st.ang_momentum - ang)) <= 1e-10


def test_convergence_error_zero_iff_equal():
    rng = np.random.default_rng(29)
    spec, wrenches, points, timesteps = _random_plan(rng, 10)
    traj = integrate(spec, wrenches, points, timesteps)
    rep = convergence_error(traj, traj)
    assert rep.eps == 0.0 and rep.eps_r == 0.0 and rep.eps_l == 0.0
    bumped = integrate(spec, wrenches, points, timesteps)
    bumped.states[4] = CentroidalState(
        bumped.states[4].com + np.array([0.3, 0.0, 0.0]),
        bumped.states[4].lin_momentum, bumped.states[4].ang_momentum)
    rep = convergence_error(bumped, traj)
    assert rep.eps_r == pytest.approx(0.3 ** 2 / 10, abs=1e-15)
    assert rep.eps == rep.eps_r > 0.0
    assert rep.eps_l == 0.0 and rep.eps_k == 0.0


def test_convergence_error_rejects_horizon_mismatch():
    rng = np.random.default_rng(31)
    spec_a = _random_plan(rng, 5)
    spec_b = _random_plan(rng, 6)
    a = integrate(spec_a[0], spec_a[1], spec_a[2], spec_a[3])
    b = integrate(spec_b[0], spec_b[1], spec_b[2], spec_b[3])
    with pytest.raises(ValueError):
        convergence_error(a, b)


def test_integrate_rejects_wrong_timestep_count():
    spec = _spec(5, [()] * 6)
    with pytest.raises(ValueError):
        integrate(spec, {}, {}, np.full(4, 0.1))


def _audit_traj(spec, force, point, dt=None):
    n = spec.horizon
    wrenches = {("foot", t): ContactWrench(force=force, cop=np.zeros(2))
                for t in range(1, n + 1)}
    points = {("foot", t): np.asarray(point, dtype=float)
              for t in range(1, n + 1)}
    timesteps = np.full(n, spec.dt_init if dt is None else dt)
    return integrate(spec, wrenches, points, timesteps)


def test_check_feasibility_friction_violation():
    spec = _spec(3, [()] + [("foot",)] * 3, friction=0.5)
    traj = _audit_traj(spec, np.array([6.0, 0.0, 10.0]), [0.0, 0.0, 0.0])
    rep = check_feasibility(traj, spec)
    assert rep.friction == pytest.approx(1.0, abs=1e-12)


def test_check_feasibility_membership_violation():
    spec = _spec(3, [()] + [("foot",)] * 3)
    traj = _audit_traj(spec, np.array([0.0, 0.0, 10.0]), [0.0, 0.0, 0.1])
    rep = check_feasibility(traj, spec)
    assert rep.membership == pytest.approx(0.1, abs=1e-12)


def test_check_feasibility_timestep_and_clean():
    spec = _spec(3, [()] + [("foot",)] * 3)
    good = _audit_traj(spec, np.array([0.0, 0.0, 10.0]), [0.0, 0.0, 0.0])
    assert check_feasibility(good, spec).max_violation == 0.0
    slow = _audit_traj(spec, np.array([0.0, 0.0, 10.0]), [0.0, 0.0, 0.0],
                       dt=spec.dt_max + 0.02)
    rep = check_feasibility(slow, spec)
    assert rep.timestep == pytest.approx(0.02, abs=1e-12)
    assert not rep.ok(1e-6) and good.timesteps.size == 3
