"""Sequential convex programming over the centroidal dynamics.

Each outer iteration assembles one second-order cone program in which every
bilinear dynamics term has been substituted through its difference-of-
quadratics atoms, solves it, integrates the resulting controls exactly, and
measures the state mismatch. Anchors and the relaxation schedule are then
updated and the loop repeats until the mismatch is negligible or stalls.

Four modes are supported through ScpSettings flags: momentum-only (fixed
time, fixed contacts), free contact locations, free step timings, and
joint-torque limit bands over the contact wrenches.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .affine import LinExpr, ProgramBuilder, expr_values, to_expr
from .bilinear import (BilinearAtom, RelaxationMode, RelaxationState,
                       atom_residuals, decompose_cross_product,
                       decompose_time_bilinears, make_atom,
                       relax_soft_constraint, relax_trust_region)
from .centroidal import (CentroidalState, ContactWrench, ProblemSpec,
                         Trajectory, convergence_error, integrate)
from .socp import ConicSolution, SolveStatus, SolverSettings, solve
from .terrain import surface_halfspaces


@dataclass
class ScpSettings:
    """Mode flags, relaxation choice and stopping rules for one SCP run."""

    optimize_time: bool = False
    optimize_contacts: bool = False
    torque_limits: bool = False
    relaxation: RelaxationMode = RelaxationMode.TRUST_REGION
    max_outer_iters: int = 20
    eps_tol: float = 1e-4
    eps_stall_tol: float = 1e-6
    warm_start: bool = True
    trust_rho0: float = 1.0
    trust_decay: float = 0.4
    soft_penalty: float = 1e5
    # Small linear cost on the substitution scalars; they enter the dynamics
    # only through their difference, so without this the optimal face is
    # unbounded and the interior-point solver loses centrality.
    atom_reg: float = 1e-6
    # When set, every assembled conic subproblem is written to this directory
    # in the JSON problem-dump format for offline cross-checks.
    dump_dir: str | None = None
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.eps_tol <= 0:
            raise ValueError("eps_tol must be positive")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        self.relaxation = RelaxationMode(self.relaxation)


@dataclass
class TorqueLimitData:
    """Affine joint-torque model tau_t = offset_t + sum_e D_{e,t} w_{e,t}.

    The wrench w stacks the force and the contact torque (6 entries per
    active endeffector)."""

    offsets: dict      # t -> (n_joints,) array
    maps: dict         # (eff id, t) -> (n_joints, 6) array
    tau_min: np.ndarray
    tau_max: np.ndarray

    def __post_init__(self):
        self.tau_min = np.asarray(self.tau_min, dtype=float).ravel()
        self.tau_max = np.asarray(self.tau_max, dtype=float).ravel()
        if np.any(self.tau_min > self.tau_max):
            raise ValueError("torque bounds must satisfy min <= max")


@dataclass
class IterationRecord:
    objective: float
    eps_r: float
    eps_l: float
    eps_k: float
    eps: float
    solver_status: str
    wall_time: float
    rho_or_eta: float
    max_atom_residual: float


@dataclass
class ScpReport:
    """Per-iteration history plus the final verdict and trajectory."""

    iterations: list = field(default_factory=list)
    converged: bool = False
    status: str = "not_converged"   # converged | stalled | infeasible | ...
    total_iterations: int = 0
    infeasible_iteration: int | None = None
    trajectory: Trajectory | None = None
    # Trust cuts are applied to both substitution variables of each atom.
    cuts_on_both_sides: bool = True

    @property
    def final_eps(self) -> float:
        return self.iterations[-1].eps if self.iterations else float("inf")

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "status": self.status,
            "total_iterations": self.total_iterations,
            "infeasible_iteration": self.infeasible_iteration,
            "cuts_on_both_sides": self.cuts_on_both_sides,
            "iterations": [vars(r) for r in self.iterations],
        }


@dataclass
class SubproblemMap:
    """Index map from problem entities into the flat variable vector."""

    state_idx: dict            # t -> dict(com=, ang=, lin=) index arrays
    wrench_idx: dict           # (eff, t) -> dict(force=, cop=, lam=)
    gamma_idx: dict            # (eff, t) -> index array (torque-limit mode)
    dt_idx: dict               # t -> index (time mode)
    point_idx: dict            # (eff, phase start) -> index array (contact mode)
    point_exprs: dict          # (eff, t) -> list of 3 expressions/constants
    atoms: list
    penalties: list            # (weight, epigraph var) objective penalty terms
    obj_offset: float
    core_var_count: int

    def base_objective(self, x: np.ndarray, linear_objective: np.ndarray) -> float:
        """Objective excluding relaxation penalty terms."""
        total = float(linear_objective @ x) + self.obj_offset
        for weight, var in self.penalties:
            total -= weight * x[var]
        return total


def build_subproblem(spec: ProblemSpec, settings: ScpSettings,
                     relax: RelaxationState):
    """Assemble one convex subproblem; returns (ConicProgram, SubproblemMap)."""
    builder = ProgramBuilder()
    n = spec.horizon
    state_idx, wrench_idx, gamma_idx, dt_idx = {}, {}, {}, {}
    atoms = []
    kappa_exprs = {}   # (eff, t) -> list of 3 affine torque-about-CoM exprs
    deferred_eqs = []  # gamma definitions needing atom product expressions

    # Pass A: create core variables and atoms, wire affine structure.
    for t in range(1, n + 1):
        com = builder.new_vars(3)
        ang = builder.new_vars(3)
        lin = builder.new_vars(3)
        state_idx[t] = {"com": com, "ang": ang, "lin": lin}
        for eff in spec.schedule.active(t):
            wrench_idx[(eff, t)] = {
                "force": builder.new_vars(3),
                "cop": builder.new_vars(2),
                "lam": builder.new_var(),
            }
            if settings.torque_limits:
                gamma_idx[(eff, t)] = builder.new_vars(3)
        if settings.optimize_time:
            dt_idx[t] = builder.new_var()

    point_idx, point_exprs = _contact_point_layout(spec, settings, builder)

    # Characteristic magnitudes used to balance the two sides of each
    # bilinear atom: forces are of order the body weight, CoM levers of order
    # one meter, CoP levers of order the CoP box, momenta of order the mass
    # (about 1 m/s) and timesteps of order the nominal step.
    fbar = max(spec.mass * float(np.linalg.norm(spec.gravity)), 1.0)
    bal_lever = np.sqrt(fbar)
    copbar = max(
        (float(np.max(np.abs(np.concatenate([e.cop_min, e.cop_max]))))
         for e in spec.endeffectors), default=0.05)
    bal_cop = np.sqrt(fbar / max(copbar, 1e-3))
    dtbar = spec.dt_init
    bal_mom_t = np.sqrt(dtbar / max(spec.mass, 1.0))
    bal_dyn_t = np.sqrt(dtbar / fbar)

    for t in range(1, n + 1):
        com_e = [LinExpr.var(i) for i in state_idx[t]["com"]]
        for eff in spec.schedule.active(t):
            w = wrench_idx[(eff, t)]
            cfg = spec.endeffector(eff)
            force = [LinExpr.var(i) for i in w["force"]]
            cop = [LinExpr.var(i) for i in w["cop"]]
            lam = LinExpr.var(w["lam"])
            rot = cfg.rotation
            cop_lever = [rot[i, 0] * cop[0] + rot[i, 1] * cop[1] for i in range(3)]
            normal_part = [rot[i, 2] * lam for i in range(3)]
            if settings.torque_limits:
                # Separate contact torque: gamma = (R_xy z) x f + R_z lam,
                # then kappa = (p - c) x f + gamma.
                gam = [LinExpr.var(i) for i in gamma_idx[(eff, t)]]
                for i, (a, b) in enumerate(decompose_cross_product(cop_lever, force)):
                    atom = make_atom(builder, f"gam/{eff}/{t}/{i}", a, b,
                                     balance=bal_cop)
                    atoms.append(atom)
                    deferred_eqs.append((gam[i], atom, normal_part[i]))
                lever = [point_exprs[(eff, t)][i] - com_e[i] for i in range(3)]
                kap = []
                for i, (a, b) in enumerate(decompose_cross_product(lever, force)):
                    atom = make_atom(builder, f"kap/{eff}/{t}/{i}", a, b,
                                     balance=bal_lever)
                    atoms.append(atom)
                    kap.append((atom, gam[i]))
                kappa_exprs[(eff, t)] = kap
            else:
                # Folded contact torque: one cross-product atom family on the
                # combined lever (p + R_xy z - c).
                lever = [point_exprs[(eff, t)][i] + cop_lever[i] - com_e[i]
                         for i in range(3)]
                kap = []
                for i, (a, b) in enumerate(decompose_cross_product(lever, force)):
                    atom = make_atom(builder, f"kap/{eff}/{t}/{i}", a, b,
                                     balance=bal_lever)
                    atoms.append(atom)
                    kap.append((atom, normal_part[i]))
                kappa_exprs[(eff, t)] = kap

    time_atoms = {}
    if settings.optimize_time:
        for t in range(1, n + 1):
            lin_e = [LinExpr.var(i) for i in state_idx[t]["lin"]]
            dt_e = LinExpr.var(dt_idx[t])
            active = spec.schedule.active(t)
            fsum = [sum((LinExpr.var(wrench_idx[(eff, t)]["force"][i])
                         for eff in active), LinExpr()) for i in range(3)]
            ksum = [sum((_kappa_component(kappa_exprs[(eff, t)], i)
                         for eff in active), LinExpr()) for i in range(3)]
            fams = decompose_time_bilinears(lin_e, ksum, fsum, dt_e)
            per_t = {}
            for fam, pairs in fams.items():
                if fam != "momentum_time" and not active:
                    continue
                bal = bal_mom_t if fam == "momentum_time" else bal_dyn_t
                per_t[fam] = []
                for i, (a, b) in enumerate(pairs):
                    atom = make_atom(builder, f"{fam}/{t}/{i}", a, b,
                                     balance=bal)
                    atoms.append(atom)
                    per_t[fam].append(atom)
            time_atoms[t] = per_t

    core_var_count = builder.num_vars

    # Pass B: constraints.
    for gam_var, atom, normal in deferred_eqs:
        builder.add_eq(gam_var - atom.product_expr() - normal)

    prev_state = {
        "com": [float(v) for v in spec.initial_state.com],
        "ang": [float(v) for v in spec.initial_state.ang_momentum],
        "lin": [float(v) for v in spec.initial_state.lin_momentum],
    }
    for t in range(1, n + 1):
        cur = {k: [LinExpr.var(i) for i in state_idx[t][k]] for k in state_idx[t]}
        active = spec.schedule.active(t)
        if settings.optimize_time:
            dt_e = LinExpr.var(dt_idx[t])
            builder.add_box(dt_e, spec.dt_min, spec.dt_max)
            fams = time_atoms[t]
            for i in range(3):
                lin_rhs = to_expr(prev_state["lin"][i]) + \
                    spec.mass * spec.gravity[i] * dt_e
                if "force_time" in fams:
                    lin_rhs = lin_rhs + fams["force_time"][i].product_expr()
                builder.add_eq(cur["lin"][i] - lin_rhs)
                builder.add_eq(
                    cur["com"][i] - to_expr(prev_state["com"][i])
                    - (1.0 / spec.mass) * fams["momentum_time"][i].product_expr()
                )
                ang_rhs = to_expr(prev_state["ang"][i])
                if "torque_time" in fams:
                    ang_rhs = ang_rhs + fams["torque_time"][i].product_expr()
                builder.add_eq(cur["ang"][i] - ang_rhs)
        else:
            dt = spec.dt_init
            for i in range(3):
                fsum = sum((LinExpr.var(wrench_idx[(eff, t)]["force"][i])
                            for eff in active), LinExpr())
                builder.add_eq(
                    cur["lin"][i] - to_expr(prev_state["lin"][i])
                    - (spec.mass * spec.gravity[i]) * dt - dt * fsum
                )
                builder.add_eq(
                    cur["com"][i] - to_expr(prev_state["com"][i])
                    - (dt / spec.mass) * cur["lin"][i]
                )
                ksum = sum((_kappa_component(kappa_exprs[(eff, t)], i)
                            for eff in active), LinExpr())
                builder.add_eq(
                    cur["ang"][i] - to_expr(prev_state["ang"][i]) - dt * ksum
                )
        prev_state = cur

        # Path constraints.
        for eff in active:
            cfg = spec.endeffector(eff)
            w = wrench_idx[(eff, t)]
            force = [LinExpr.var(i) for i in w["force"]]
            rot = cfg.rotation
            local = [sum((rot[j, i] * force[j] for j in range(3)), LinExpr())
                     for i in range(3)]
            builder.add_soc([spec.friction * local[2], local[0], local[1]])
            for k in range(2):
                builder.add_box(LinExpr.var(w["cop"][k]),
                                cfg.cop_min[k], cfg.cop_max[k])
            reach = [point_exprs[(eff, t)][i] - cur["com"][i] for i in range(3)]
            builder.add_soc([to_expr(cfg.max_reach)] + reach)

    if settings.optimize_contacts:
        _add_membership_rows(spec, builder, point_idx)

    if settings.torque_limits:
        if spec.torque_limit_data is None:
            raise ValueError("torque_limits enabled but torque_limit_data missing")
        apply_torque_limits(builder, spec, wrench_idx, gamma_idx,
                            spec.torque_limit_data)

    # Relaxation of all atoms.
    penalties = []
    relax.soft_penalty = settings.soft_penalty
    for atom in atoms:
        if settings.atom_reg > 0:
            builder.add_linear_cost(LinExpr.var(atom.plus_var), settings.atom_reg)
            builder.add_linear_cost(LinExpr.var(atom.minus_var), settings.atom_reg)
        if relax.mode is RelaxationMode.TRUST_REGION:
            relax_trust_region(builder, atom, relax)
        else:
            for var in relax_soft_constraint(builder, atom, relax):
                # Epigraph variables already carry the penalty weight.
                penalties.append((1.0, var))

    _add_costs(spec, settings, builder, state_idx, wrench_idx, dt_idx,
               point_exprs, n)

    pmap = SubproblemMap(
        state_idx=state_idx, wrench_idx=wrench_idx, gamma_idx=gamma_idx,
        dt_idx=dt_idx, point_idx=point_idx, point_exprs=point_exprs,
        atoms=atoms, penalties=penalties, obj_offset=builder.obj_const,
        core_var_count=core_var_count,
    )
    return builder.build(), pmap


def apply_torque_limits(builder: ProgramBuilder, spec: ProblemSpec,
                        wrench_idx: dict, gamma_idx: dict,
                        data: TorqueLimitData):
    """Add the linear torque bands tau_min <= offset + sum D w <= tau_max."""
    n_j = data.tau_min.size
    for t in range(1, spec.horizon + 1):
        offset = np.asarray(data.offsets.get(t, np.zeros(n_j)), dtype=float)
        rows = [to_expr(offset[j]) for j in range(n_j)]
        for eff in spec.schedule.active(t):
            d_mat = np.asarray(data.maps[(eff, t)], dtype=float)
            if d_mat.shape != (n_j, 6):
                raise ValueError(
                    f"torque map for ({eff}, {t}) has shape {d_mat.shape}, "
                    f"expected ({n_j}, 6)")
            wvars = list(wrench_idx[(eff, t)]["force"]) + list(gamma_idx[(eff, t)])
            for j in range(n_j):
                for k, var in enumerate(wvars):
                    if d_mat[j, k] != 0.0:
                        rows[j] = rows[j] + d_mat[j, k] * LinExpr.var(var)
        for j in range(n_j):
            builder.add_box(rows[j], data.tau_min[j], data.tau_max[j])


def _nominal_point(spec: ProblemSpec, eff: str, start: int) -> np.ndarray:
    """Best available guess for a foothold: given location, reference, or the
    reference point of the assigned surface."""
    loc = spec.contact_locations.get((eff, start))
    if loc is not None:
        return np.asarray(loc, dtype=float).reshape(3)
    refs = spec.references
    if refs is not None and refs.endeffectors is not None:
        ref = refs.endeffectors.get((eff, start))
        if ref is not None:
            return np.asarray(ref, dtype=float).reshape(3)
    surf = spec.surface(spec.schedule.surface_assignment[(eff, start)])
    return surf.reference_point


def seed_anchors(spec: ProblemSpec, settings: ScpSettings,
                 relax: RelaxationState, traj: Trajectory):
    """Anchor every atom at the states and controls of a given trajectory.

    Used to carry a fixed-timestep solution into a run that also optimizes
    the timesteps: with the products already anchored near a good point the
    shrinking trust region (or the penalty) only has to polish."""
    prog, pmap = build_subproblem(spec, settings, relax)
    x = np.zeros(prog.num_vars)
    for t, idx in pmap.state_idx.items():
        st = traj.states[t]
        x[idx["com"]] = st.com
        x[idx["lin"]] = st.lin_momentum
        x[idx["ang"]] = st.ang_momentum
    for (eff, t), w in pmap.wrench_idx.items():
        wrench = traj.wrenches[(eff, t)]
        x[w["force"]] = wrench.force
        x[w["cop"]] = wrench.cop
        x[w["lam"]] = wrench.normal_torque
    for (eff, t), idx in pmap.gamma_idx.items():
        cfg = spec.endeffector(eff)
        x[idx] = traj.wrenches[(eff, t)].torque(cfg.rotation)
    for t, i in pmap.dt_idx.items():
        x[i] = traj.timesteps[t - 1]
    for (eff, start), idx in pmap.point_idx.items():
        x[idx] = np.asarray(traj.contact_points[(eff, start)], dtype=float)
    # Atoms are anchored in creation order and their substitution values are
    # written back into the guess, so later atoms whose sides contain earlier
    # products (timestep atoms over the contact torques) see consistent data.
    for atom in pmap.atoms:
        p_plus, p_minus = atom.anchor_values(x)
        x[atom.plus_var] = float(p_plus @ p_plus)
        x[atom.minus_var] = float(p_minus @ p_minus)
        relax.anchor[atom.label] = (p_plus, p_minus)


def solve_scp(spec: ProblemSpec, settings: ScpSettings) -> ScpReport:
    """Run the outer SCP loop; returns the full iteration report.

    When the timesteps are free, a fixed-timestep pass runs first and its
    trajectory anchors the atoms of the full problem; the very first
    subproblem of an unanchored run is otherwise too loosely relaxed in the
    timestep products to yield a useful anchor."""
    relax = RelaxationState(
        mode=settings.relaxation, trust_radius=settings.trust_rho0,
        soft_penalty=settings.soft_penalty, iteration=1,
    )
    if settings.optimize_time:
        pre = replace(settings, optimize_time=False)
        stage = solve_scp(spec, pre)
        if stage.trajectory is None:
            # The problem can be infeasible at the nominal step yet solvable
            # with the timesteps free; anchor from the slowest fixed-step
            # problem instead.
            slow = replace(spec, dt_init=spec.dt_max)
            stage = solve_scp(slow, pre)
        if stage.trajectory is not None:
            seed_anchors(spec, settings, relax, stage.trajectory)
    report = ScpReport()
    prev_sol: ConicSolution | None = None
    prev_shape = None
    prev_eps = None

    for k in range(1, settings.max_outer_iters + 1):
        relax.iteration = k
        relax.trust_radius = settings.trust_rho0 * settings.trust_decay ** (k - 1)
        prog, pmap = build_subproblem(spec, settings, relax)
        if settings.dump_dir is not None:
            _dump_subproblem(prog, settings.dump_dir, k)
        shape = (prog.num_vars, prog.eq_rhs.size, prog.cone)
        warm = prev_sol if settings.warm_start and shape == prev_shape else None
        t0 = time.perf_counter()
        sol = solve(prog, settings.solver, warm)
        wall = time.perf_counter() - t0

        # Recovery: trust cuts around a poor anchor can make the subproblem
        # infeasible or numerically hard; retry cold with an enlarged radius
        # before giving up. Soft-mode subproblems are always feasible, so an
        # infeasibility certificate there is genuine.
        retries = 3 if relax.mode is RelaxationMode.TRUST_REGION else 1
        while sol.status is not SolveStatus.OPTIMAL and retries > 0:
            if (sol.status == SolveStatus.PRIMAL_INFEASIBLE
                    and relax.mode is not RelaxationMode.TRUST_REGION):
                break
            retries -= 1
            relax.trust_radius *= 4.0
            prog, pmap = build_subproblem(spec, settings, relax)
            t0 = time.perf_counter()
            sol = solve(prog, settings.solver, None)
            wall = time.perf_counter() - t0
        if sol.status == SolveStatus.PRIMAL_INFEASIBLE:
            report.status = "infeasible"
            report.infeasible_iteration = k
            report.total_iterations = k
            return report
        if sol.status is not SolveStatus.OPTIMAL:
            report.status = f"solver_{sol.status.value}"
            report.total_iterations = k
            return report

        x = sol.primal
        candidate, controls = _extract(spec, settings, pmap, x)
        integrated = integrate(spec, *controls)
        err = convergence_error(candidate, integrated)
        resid = atom_residuals(pmap.atoms, x)
        report.iterations.append(IterationRecord(
            objective=pmap.base_objective(x, prog.objective),
            eps_r=err.eps_r, eps_l=err.eps_l, eps_k=err.eps_k, eps=err.eps,
            solver_status=sol.status.value, wall_time=wall,
            rho_or_eta=(relax.trust_radius
                        if relax.mode is RelaxationMode.TRUST_REGION
                        else relax.soft_penalty),
            max_atom_residual=float(resid.max(initial=0.0)),
        ))
        report.trajectory = integrated
        report.total_iterations = k
        for atom in pmap.atoms:
            relax.anchor[atom.label] = atom.anchor_values(x)
        prev_sol, prev_shape = sol, shape

        if err.eps <= settings.eps_tol:
            report.converged = True
            report.status = "converged"
            return report
        if prev_eps is not None and abs(err.eps - prev_eps) <= settings.eps_stall_tol:
            report.status = "stalled"
            return report
        prev_eps = err.eps

    report.status = "not_converged"
    return report


def _dump_subproblem(prog, dump_dir: str, iteration: int):
    import os

    from .socp import to_problem_dump
    os.makedirs(dump_dir, exist_ok=True)
    path = os.path.join(dump_dir, f"subproblem_{iteration:03d}.json")
    with open(path, "w") as fh:
        fh.write(to_problem_dump(prog))


def _kappa_component(kap_list, i) -> LinExpr:
    atom, extra = kap_list[i]
    return atom.product_expr() + extra


def _contact_point_layout(spec: ProblemSpec, settings: ScpSettings,
                          builder: ProgramBuilder):
    """Contact points: one variable block per stance phase, or fixed constants."""
    point_idx, point_exprs = {}, {}
    for cfg in spec.endeffectors:
        for start, end, _surf in spec.schedule.contact_phases(cfg.id):
            if settings.optimize_contacts:
                idx = builder.new_vars(3)
                point_idx[(cfg.id, start)] = idx
                exprs = [LinExpr.var(i) for i in idx]
            else:
                loc = spec.contact_locations.get((cfg.id, start))
                if loc is None:
                    raise ValueError(
                        f"no contact location for endeffector '{cfg.id}' "
                        f"phase starting at t={start}")
                exprs = [to_expr(float(v)) for v in np.asarray(loc).reshape(3)]
            for t in range(start, end + 1):
                point_exprs[(cfg.id, t)] = exprs
    return point_idx, point_exprs


def _add_membership_rows(spec: ProblemSpec, builder: ProgramBuilder,
                         point_idx: dict):
    for (eff, start), idx in point_idx.items():
        surf_id = spec.schedule.surface_assignment[(eff, start)]
        a_full, b_full = surface_halfspaces(spec.surface(surf_id))
        point = [LinExpr.var(i) for i in idx]
        for row, rhs in zip(a_full, b_full):
            expr = sum((row[i] * point[i] for i in range(3)), LinExpr())
            builder.add_le(expr, rhs)


def _add_costs(spec, settings, builder, state_idx, wrench_idx, dt_idx,
               point_exprs, n):
    wts = spec.cost_weights
    com_n = [LinExpr.var(i) for i in state_idx[n]["com"]]
    target = spec.initial_state.com + wts.com_displacement
    if wts.com_terminal > 0:
        builder.add_quad_cost(wts.com_terminal,
                              [com_n[i] - target[i] for i in range(3)])
    if wts.momenta_terminal > 0:
        mom_n = [LinExpr.var(i) for i in state_idx[n]["lin"]] + \
                [LinExpr.var(i) for i in state_idx[n]["ang"]]
        builder.add_quad_cost(wts.momenta_terminal, mom_n)
    refs = spec.references
    for t in range(1, n + 1):
        lin_t = [LinExpr.var(i) for i in state_idx[t]["lin"]]
        ang_t = [LinExpr.var(i) for i in state_idx[t]["ang"]]
        if wts.momenta_running > 0:
            builder.add_quad_cost(wts.momenta_running, lin_t + ang_t)
        if wts.momenta_rate > 0:
            if t == 1:
                prev_l = spec.initial_state.lin_momentum
                prev_k = spec.initial_state.ang_momentum
                prev = [to_expr(v) for v in np.concatenate([prev_l, prev_k])]
            else:
                prev = [LinExpr.var(i) for i in state_idx[t - 1]["lin"]] + \
                       [LinExpr.var(i) for i in state_idx[t - 1]["ang"]]
            rate = [(cur - prv) * (1.0 / spec.dt_init)
                    for cur, prv in zip(lin_t + ang_t, prev)]
            builder.add_quad_cost(wts.momenta_rate, rate)
        if refs is not None and refs.momenta is not None and \
                wts.momenta_consensus > 0 and t in refs.momenta:
            ref = np.asarray(refs.momenta[t], dtype=float).reshape(6)
            builder.add_quad_cost(
                wts.momenta_consensus,
                [e - float(r) for e, r in zip(lin_t + ang_t, ref)])
        if settings.optimize_time and wts.time_reg > 0:
            builder.add_quad_cost(
                wts.time_reg, [LinExpr.var(dt_idx[t]) - spec.dt_init])
        for eff in spec.schedule.active(t):
            w = wrench_idx[(eff, t)]
            if wts.force_reg > 0:
                builder.add_quad_cost(
                    wts.force_reg, [LinExpr.var(i) for i in w["force"]])
            if wts.torque_reg > 0:
                builder.add_quad_cost(wts.torque_reg, [LinExpr.var(w["lam"])])
            if settings.optimize_contacts and refs is not None and \
                    refs.endeffectors is not None and wts.contact_consensus > 0:
                ref = refs.endeffectors.get((eff, t))
                if ref is not None:
                    ref = np.asarray(ref, dtype=float).reshape(3)
                    builder.add_quad_cost(
                        wts.contact_consensus,
                        [point_exprs[(eff, t)][i] - float(ref[i])
                         for i in range(3)])


def _extract(spec: ProblemSpec, settings: ScpSettings, pmap: SubproblemMap,
             x: np.ndarray):
    """Candidate trajectory (optimizer states) and controls for integration."""
    n = spec.horizon
    states = [spec.initial_state]
    for t in range(1, n + 1):
        idx = pmap.state_idx[t]
        states.append(CentroidalState(
            com=x[idx["com"]], lin_momentum=x[idx["lin"]],
            ang_momentum=x[idx["ang"]],
        ))
    wrenches, points = {}, {}
    for (eff, t), w in pmap.wrench_idx.items():
        wrenches[(eff, t)] = ContactWrench(
            force=x[w["force"]], cop=x[w["cop"]],
            normal_torque=float(x[w["lam"]]),
        )
        points[(eff, t)] = expr_values(pmap.point_exprs[(eff, t)], x)
    if settings.optimize_time:
        timesteps = np.array([x[pmap.dt_idx[t]] for t in range(1, n + 1)])
    else:
        timesteps = np.full(n, spec.dt_init)
    candidate = Trajectory(states=states, wrenches=wrenches,
                           contact_points=points, timesteps=timesteps)
    return candidate, (wrenches, points, timesteps)
