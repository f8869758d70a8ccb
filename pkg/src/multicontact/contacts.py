"""Mixed-integer contact planning over convex terrain surfaces.

Surface selection is modeled with binary variables linking each planned
contact to one terrain surface through big-M membership, friction-pyramid and
force-activation rows. Footstep chains carry either linear displacement
bounds or rotated two-disc second-order cone reachability with a piecewise
affine yaw model. The combinatorial problem is solved with a custom
branch-and-bound over cone-program relaxations: lower bounds come from
relaxing the binaries to [0, 1], upper bounds from integral assignments
refined with the usual bilinear-atom iterations.
"""

from __future__ import annotations

import heapq
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .affine import LinExpr, ProgramBuilder, expr_values, to_expr
from .bilinear import (RelaxationMode, RelaxationState, decompose_cross_product,
                       decompose_time_bilinears, make_atom, relax_trust_region)
from .centroidal import ContactWrench, ProblemSpec, Trajectory, integrate
from .socp import SolveStatus, SolverSettings, solve
from .terrain import TerrainSurface, surface_halfspaces


def worker_count() -> int:
    """Number of concurrent node solvers, capped by CSCP_THREADS."""
    cap = os.environ.get("CSCP_THREADS")
    if cap is not None:
        return max(1, int(cap))
    return 1


@dataclass
class PlanSettings:
    """Branch-and-bound, reachability and refinement options."""

    gap_tol: float = 1e-4          # relative UB-LB gap at termination
    max_nodes: int = 500
    refine_iters: int = 1          # bilinear-atom iterations per integral solve
    integrality_tol: float = 1e-6
    reachability: str = "linear"   # "linear" | "soc"
    dp_min: np.ndarray = field(default_factory=lambda: np.zeros(3))
    dp_max: np.ndarray = field(default_factory=lambda: np.array([0.4, 0.4, 0.3]))
    # Two-disc SOC reachability: foci offsets (in the frame of the previous
    # footstep) and admissible radii.
    foci: tuple = ((0.0, 0.15), (0.0, -0.15))
    radii: tuple = (0.45, 0.45)
    yaw_breakpoints: np.ndarray = field(
        default_factory=lambda: np.linspace(-np.pi / 2, np.pi / 2, 6))
    optimize_time: bool = False
    force_cap_factor: float = 4.0  # per-contact force bound, multiples of m*g
    trust_rho0: float = 1.0
    trust_decay: float = 0.4
    atom_reg: float = 1e-6
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        self.dp_min = np.asarray(self.dp_min, dtype=float).reshape(3)
        self.dp_max = np.asarray(self.dp_max, dtype=float).reshape(3)
        self.yaw_breakpoints = np.asarray(self.yaw_breakpoints, dtype=float).ravel()
        if self.reachability not in ("linear", "soc"):
            raise ValueError("reachability must be 'linear' or 'soc'")
        if np.any(np.diff(self.yaw_breakpoints) <= 0):
            raise ValueError("yaw breakpoints must be strictly increasing")
        if self.gap_tol <= 0 or self.max_nodes < 1:
            raise ValueError("gap_tol must be positive and max_nodes >= 1")


@dataclass
class ContactSlot:
    """One planned contact: an endeffector stance phase to be placed."""

    index: int          # plan order
    eff: str
    start: int          # first timestep of the stance
    end: int            # last timestep
    is_hand: bool
    fixed_position: np.ndarray | None = None   # initially-active contacts


@dataclass
class ContactAssignment:
    """Integral solution of the surface-selection problem."""

    surface_matrix: np.ndarray     # free contacts x surfaces, entries {0,1}
    free_contacts: list            # ContactSlot list matching the rows
    positions: dict                # contact index -> 3-vector
    yaw: dict = field(default_factory=dict)          # contact index -> angle
    sin_cos: dict = field(default_factory=dict)      # index -> (sin, cos) PWA values

    def surface_of(self, contact_index: int) -> int | None:
        for row, slot in enumerate(self.free_contacts):
            if slot.index == contact_index:
                hits = np.flatnonzero(self.surface_matrix[row] > 0.5)
                return int(hits[0]) if hits.size else None
        return None


@dataclass(order=True)
class BnBNode:
    """Search node: binaries pinned so far plus its relaxation bound."""

    lower_bound: float
    tiebreak: int
    fixings: dict = field(compare=False)
    depth: int = field(compare=False, default=0)
    relaxed_binaries: np.ndarray | None = field(compare=False, default=None)
    solution: np.ndarray | None = field(compare=False, default=None)


@dataclass
class PlanReport:
    """Incumbent, certified bounds and the search history."""

    assignment: ContactAssignment | None = None
    trajectory: Trajectory | None = None
    objective: float = np.inf
    lower_bound: float = -np.inf
    upper_bound: float = np.inf
    bounds_history: list = field(default_factory=list)
    nodes_explored: int = 0
    status: str = "no_incumbent"    # optimal | node_budget | infeasible

    @property
    def gap(self) -> float:
        return (self.upper_bound - self.lower_bound) / max(
            1.0, abs(self.upper_bound))

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "objective": self.objective,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "nodes_explored": self.nodes_explored,
            "bounds": self.bounds_history,
        }
        if self.assignment is not None:
            pairs = [
                [int(row), int(r)]
                for row in range(self.assignment.surface_matrix.shape[0])
                for r in np.flatnonzero(self.assignment.surface_matrix[row] > 0.5)
            ]
            out["assignments"] = pairs
            out["footsteps"] = [
                {
                    "contact": slot.index,
                    "endeffector": slot.eff,
                    "position": [float(v) for v in
                                 self.assignment.positions[slot.index]],
                    "yaw": float(self.assignment.yaw.get(slot.index, 0.0)),
                    "surface": self.assignment.surface_of(slot.index),
                }
                for slot in self.assignment.free_contacts
            ]
        return out


# ---------------------------------------------------------------------------
# Geometry helpers
# ---------------------------------------------------------------------------


def contact_slots(spec: ProblemSpec):
    """All stance phases in chronological plan order.

    Phases whose location is pinned in spec.contact_locations are the
    initially-active contacts; the rest are free and receive binaries."""
    slots = []
    for cfg in spec.endeffectors:
        for start, end, _surf in spec.schedule.contact_phases(cfg.id):
            fixed = spec.contact_locations.get((cfg.id, start))
            slots.append(ContactSlot(
                index=-1, eff=cfg.id, start=start, end=end,
                is_hand=cfg.is_hand,
                fixed_position=None if fixed is None else
                np.asarray(fixed, dtype=float).reshape(3),
            ))
    slots.sort(key=lambda s: (s.start, s.eff))
    for i, slot in enumerate(slots):
        slot.index = i
    return slots


def terrain_bounding_box(surfaces):
    """Axis-aligned bounding box over all surface corners, slightly padded."""
    corners = np.vstack([s.corners for s in surfaces])
    lo = corners.min(axis=0) - 0.5
    hi = corners.max(axis=0) + 0.5
    return lo, hi


def big_m_link(rows: np.ndarray, rhs: np.ndarray, lo: np.ndarray,
               hi: np.ndarray):
    """Valid big-M constants for rows a.p <= b over the box [lo, hi].

    M_i = max_{p in box} (a_i . p) - b_i, so a_i . p <= b_i + M_i (1 - H)
    is vacuous at H = 0 and exact at H = 1."""
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("bounding box must be finite")
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    rhs = np.asarray(rhs, dtype=float).ravel()
    worst = rows @ ((lo + hi) / 2.0) + np.abs(rows) @ ((hi - lo) / 2.0)
    return np.maximum(worst - rhs, 0.0)


def reachability_linear(builder: ProgramBuilder, point, prev_point,
                        dp_min: np.ndarray, dp_max: np.ndarray):
    """Componentwise displacement box between consecutive footholds."""
    for i in range(3):
        builder.add_box(to_expr(point[i]) - to_expr(prev_point[i]),
                        float(dp_min[i]), float(dp_max[i]))


def reachability_violation(point, prev_point, dp_min, dp_max) -> float:
    """Numeric twin of reachability_linear for audits and tests."""
    d = np.asarray(point, dtype=float) - np.asarray(prev_point, dtype=float)
    return float(max(np.max(dp_min - d, initial=0.0),
                     np.max(d - dp_max, initial=0.0)))


def sine_cosine_segments(breakpoints: np.ndarray):
    """Chord (slope, intercept) per segment for sine and for cosine."""
    segs = {"sin": [], "cos": []}
    for fn, key in ((np.sin, "sin"), (np.cos, "cos")):
        for a, b in zip(breakpoints[:-1], breakpoints[1:]):
            slope = (fn(b) - fn(a)) / (b - a)
            segs[key].append((slope, fn(a) - slope * a))
    return segs


def pwa_value(theta: float, breakpoints: np.ndarray, segments) -> float:
    """Evaluate the piecewise affine model at an angle inside the range."""
    idx = int(np.clip(np.searchsorted(breakpoints, theta) - 1, 0,
                      len(segments) - 1))
    slope, intercept = segments[idx]
    return slope * theta + intercept


def rotation_from_yaw(yaw: float, normal_rotation: np.ndarray) -> np.ndarray:
    """Surface frame rotated about its normal by the yaw angle."""
    c, s = np.cos(yaw), np.sin(yaw)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return normal_rotation @ rz


def friction_pyramid_rows(mu: float) -> np.ndarray:
    """Rows P with P f_local <= 0 iff f_local in the inscribed 4-sided pyramid.

    The pyramid edge coefficient mu / sqrt(2) inscribes it in the cone of
    coefficient mu, so the rows are conservative. They imply f_z >= 0."""
    k = mu / np.sqrt(2.0)
    return np.array([
        [1.0, 0.0, -k],
        [-1.0, 0.0, -k],
        [0.0, 1.0, -k],
        [0.0, -1.0, -k],
    ])


# ---------------------------------------------------------------------------
# Node subproblem
# ---------------------------------------------------------------------------


@dataclass
class _PlanMap:
    state_idx: dict
    force_idx: dict         # (eff, t) -> 3 indices
    point_exprs: dict       # contact index -> list of 3 exprs
    dt_idx: dict
    binary_idx: dict        # binary name -> variable index
    binary_names: list      # stable order for branching
    yaw_idx: dict           # contact index -> variable index
    sin_idx: dict
    cos_idx: dict
    atoms: list
    slots: list


def build_plan_subproblem(spec: ProblemSpec, settings: PlanSettings,
                          relax: RelaxationState, fixings: dict):
    """One node relaxation: binaries in [0, 1] except those pinned."""
    builder = ProgramBuilder()
    n = spec.horizon
    surfaces = spec.surfaces
    slots = contact_slots(spec)
    slot_of = {}
    for slot in slots:
        for t in range(slot.start, slot.end + 1):
            slot_of[(slot.eff, t)] = slot
    lo, hi = terrain_bounding_box(surfaces)
    fcap = settings.force_cap_factor * spec.mass * float(
        np.linalg.norm(spec.gravity))

    state_idx, force_idx, dt_idx = {}, {}, {}
    for t in range(1, n + 1):
        state_idx[t] = {
            "com": builder.new_vars(3),
            "ang": builder.new_vars(3),
            "lin": builder.new_vars(3),
        }
        for eff in spec.schedule.active(t):
            force_idx[(eff, t)] = builder.new_vars(3)
        if settings.optimize_time:
            dt_idx[t] = builder.new_var()

    point_exprs = {}
    free_slots = [s for s in slots if s.fixed_position is None]
    for slot in slots:
        if slot.fixed_position is not None:
            point_exprs[slot.index] = [to_expr(float(v))
                                       for v in slot.fixed_position]
        else:
            idx = builder.new_vars(3)
            point_exprs[slot.index] = [LinExpr.var(i) for i in idx]
            for i in range(3):
                builder.add_box(LinExpr.var(idx[i]), lo[i], hi[i])

    binary_idx, binary_names = {}, []

    def new_binary(name: str) -> LinExpr:
        var = builder.new_var()
        binary_idx[name] = var
        binary_names.append(name)
        pin = fixings.get(name)
        if pin is None:
            builder.add_box(LinExpr.var(var), 0.0, 1.0)
        else:
            builder.add_eq(LinExpr.var(var), float(pin))
        return LinExpr.var(var)

    # Surface-selection binaries with membership, friction and force rows.
    h_exprs = {}
    for slot in free_slots:
        row = [new_binary(f"H/{slot.index}/{r}") for r in range(len(surfaces))]
        h_exprs[slot.index] = row
        row_sum = sum(row, LinExpr())
        if slot.is_hand:
            builder.add_le(row_sum, 1.0)
        else:
            builder.add_eq(row_sum, 1.0)
        point = point_exprs[slot.index]
        for r, surf in enumerate(surfaces):
            a_full, b_full = surface_halfspaces(surf)
            big_m = big_m_link(a_full, b_full, lo, hi)
            for arow, brhs, m in zip(a_full, b_full, big_m):
                expr = sum((arow[i] * point[i] for i in range(3)), LinExpr())
                builder.add_le(expr - m * (1.0 - row[r]), brhs)
        # Force activation (hands may carry no contact) and friction pyramid
        # per candidate surface, both big-M linked to the binaries.
        for t in range(slot.start, slot.end + 1):
            force = [LinExpr.var(i) for i in force_idx[(slot.eff, t)]]
            for i in range(3):
                builder.add_box(force[i], -fcap, fcap)
                builder.add_le(force[i] - fcap * row_sum, 0.0)
                builder.add_le(-1.0 * force[i] - fcap * row_sum, 0.0)
            for r, surf in enumerate(surfaces):
                mu = surf.friction if surf.friction is not None else spec.friction
                rows = friction_pyramid_rows(mu) @ surf.rotation.T
                m = (1.0 + mu) * 2.0 * fcap
                for arow in rows:
                    expr = sum((arow[i] * force[i] for i in range(3)),
                               LinExpr())
                    builder.add_le(expr - m * (1.0 - row[r]), 0.0)
    for slot in slots:
        if slot.fixed_position is None:
            continue
        # Initially-active contacts keep their scheduled surface and friction.
        surf = spec.surface(spec.schedule.surface_assignment[(slot.eff,
                                                              slot.start)])
        mu = surf.friction if surf.friction is not None else spec.friction
        rows = friction_pyramid_rows(mu) @ surf.rotation.T
        for t in range(slot.start, slot.end + 1):
            force = [LinExpr.var(i) for i in force_idx[(slot.eff, t)]]
            for i in range(3):
                builder.add_box(force[i], -fcap, fcap)
            for arow in rows:
                expr = sum((arow[i] * force[i] for i in range(3)), LinExpr())
                builder.add_le(expr, 0.0)

    # Reachability chains per endeffector.
    yaw_idx, sin_idx, cos_idx = {}, {}, {}
    if settings.reachability == "soc":
        segs = sine_cosine_segments(settings.yaw_breakpoints)
        bp = settings.yaw_breakpoints
        yaw_span = float(bp[-1] - bp[0])
        for slot in free_slots:
            yaw_idx[slot.index] = builder.new_var()
            sin_idx[slot.index] = builder.new_var()
            cos_idx[slot.index] = builder.new_var()
            theta = LinExpr.var(yaw_idx[slot.index])
            builder.add_box(theta, float(bp[0]), float(bp[-1]))
            builder.add_box(LinExpr.var(sin_idx[slot.index]), -1.0, 1.0)
            builder.add_box(LinExpr.var(cos_idx[slot.index]), -1.0, 1.0)
            for key, value_var in (("sin", sin_idx[slot.index]),
                                   ("cos", cos_idx[slot.index])):
                sel = [new_binary(f"{key}/{slot.index}/{h}")
                       for h in range(len(segs[key]))]
                builder.add_eq(sum(sel, LinExpr()), 1.0)
                for h, (slope, intercept) in enumerate(segs[key]):
                    on = 1.0 - sel[h]
                    # Region of validity and affine value, vacuous when off.
                    builder.add_le(theta - yaw_span * on, float(bp[h + 1]))
                    builder.add_ge(theta + yaw_span * on, float(bp[h]))
                    resid = LinExpr.var(value_var) - slope * theta - intercept
                    m = 2.0 + abs(slope) * yaw_span
                    builder.add_le(resid - m * on, 0.0)
                    builder.add_le(-1.0 * resid - m * on, 0.0)
    by_eff = {}
    for slot in slots:
        by_eff.setdefault(slot.eff, []).append(slot)
    for chain in by_eff.values():
        chain.sort(key=lambda s: s.start)
        for prev, cur in zip(chain[:-1], chain[1:]):
            if cur.fixed_position is not None:
                continue
            if settings.reachability == "linear":
                reachability_linear(builder, point_exprs[cur.index],
                                    point_exprs[prev.index],
                                    settings.dp_min, settings.dp_max)
            else:
                # Two-disc constraint rotated by the yaw of the previous
                # footstep (known angle when that contact is pinned).
                if prev.fixed_position is not None or \
                        prev.index not in sin_idx:
                    psin, pcos = to_expr(0.0), to_expr(1.0)
                else:
                    psin = LinExpr.var(sin_idx[prev.index])
                    pcos = LinExpr.var(cos_idx[prev.index])
                for (ox, oy), radius in zip(settings.foci, settings.radii):
                    cx = to_expr(point_exprs[prev.index][0]) + ox * pcos - oy * psin
                    cy = to_expr(point_exprs[prev.index][1]) + ox * psin + oy * pcos
                    builder.add_soc([
                        to_expr(float(radius)),
                        to_expr(point_exprs[cur.index][0]) - cx,
                        to_expr(point_exprs[cur.index][1]) - cy,
                    ])

    # Point-contact centroidal dynamics through bilinear atoms.
    fbar = max(spec.mass * float(np.linalg.norm(spec.gravity)), 1.0)
    bal_lever = np.sqrt(fbar)
    bal_mom_t = np.sqrt(spec.dt_init / max(spec.mass, 1.0))
    bal_dyn_t = np.sqrt(spec.dt_init / fbar)
    atoms = []
    kappa_exprs = {}
    for t in range(1, n + 1):
        com_e = [LinExpr.var(i) for i in state_idx[t]["com"]]
        for eff in spec.schedule.active(t):
            slot = slot_of[(eff, t)]
            force = [LinExpr.var(i) for i in force_idx[(eff, t)]]
            lever = [to_expr(point_exprs[slot.index][i]) - com_e[i]
                     for i in range(3)]
            kap = []
            for i, (a, b) in enumerate(decompose_cross_product(lever, force)):
                atom = make_atom(builder, f"kap/{eff}/{t}/{i}", a, b,
                                 balance=bal_lever)
                atoms.append(atom)
                kap.append(atom)
            kappa_exprs[(eff, t)] = kap
    time_atoms = {}
    if settings.optimize_time:
        for t in range(1, n + 1):
            lin_e = [LinExpr.var(i) for i in state_idx[t]["lin"]]
            dt_e = LinExpr.var(dt_idx[t])
            active = spec.schedule.active(t)
            fsum = [sum((LinExpr.var(force_idx[(eff, t)][i])
                         for eff in active), LinExpr()) for i in range(3)]
            ksum = [sum((kappa_exprs[(eff, t)][i].product_expr()
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
                    - (1.0 / spec.mass) * fams["momentum_time"][i].product_expr())
                ang_rhs = to_expr(prev_state["ang"][i])
                if "torque_time" in fams:
                    ang_rhs = ang_rhs + fams["torque_time"][i].product_expr()
                builder.add_eq(cur["ang"][i] - ang_rhs)
        else:
            dt = spec.dt_init
            for i in range(3):
                fsum = sum((LinExpr.var(force_idx[(eff, t)][i])
                            for eff in active), LinExpr())
                builder.add_eq(
                    cur["lin"][i] - to_expr(prev_state["lin"][i])
                    - spec.mass * spec.gravity[i] * dt - dt * fsum)
                builder.add_eq(
                    cur["com"][i] - to_expr(prev_state["com"][i])
                    - (dt / spec.mass) * cur["lin"][i])
                ksum = sum((kappa_exprs[(eff, t)][i].product_expr()
                            for eff in active), LinExpr())
                builder.add_eq(
                    cur["ang"][i] - to_expr(prev_state["ang"][i]) - dt * ksum)
        prev_state = cur
        for eff in active:
            slot = slot_of[(eff, t)]
            cfg = spec.endeffector(eff)
            reach = [to_expr(point_exprs[slot.index][i]) - cur["com"][i]
                     for i in range(3)]
            builder.add_soc([to_expr(cfg.max_reach)] + reach)

    for atom in atoms:
        if settings.atom_reg > 0:
            builder.add_linear_cost(LinExpr.var(atom.plus_var), settings.atom_reg)
            builder.add_linear_cost(LinExpr.var(atom.minus_var), settings.atom_reg)
        relax_trust_region(builder, atom, relax)

    _plan_costs(spec, settings, builder, state_idx, force_idx, dt_idx,
                point_exprs, slot_of, n)
    pmap = _PlanMap(
        state_idx=state_idx, force_idx=force_idx, point_exprs=point_exprs,
        dt_idx=dt_idx, binary_idx=binary_idx, binary_names=binary_names,
        yaw_idx=yaw_idx, sin_idx=sin_idx, cos_idx=cos_idx, atoms=atoms,
        slots=slots,
    )
    return builder.build(), pmap, builder.obj_const


def _plan_costs(spec, settings, builder, state_idx, force_idx, dt_idx,
                point_exprs, slot_of, n):
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
        if settings.optimize_time and wts.time_reg > 0:
            builder.add_quad_cost(
                wts.time_reg, [LinExpr.var(dt_idx[t]) - spec.dt_init])
        for eff in spec.schedule.active(t):
            if wts.force_reg > 0:
                builder.add_quad_cost(
                    wts.force_reg,
                    [LinExpr.var(i) for i in force_idx[(eff, t)]])
            if refs is not None and refs.endeffectors is not None and \
                    wts.contact_consensus > 0:
                ref = refs.endeffectors.get((eff, t))
                if ref is not None:
                    slot = slot_of[(eff, t)]
                    ref = np.asarray(ref, dtype=float).reshape(3)
                    builder.add_quad_cost(
                        wts.contact_consensus,
                        [to_expr(point_exprs[slot.index][i]) - float(ref[i])
                         for i in range(3)])


# ---------------------------------------------------------------------------
# Node evaluation and branch-and-bound
# ---------------------------------------------------------------------------


def _relaxation_values(pmap: _PlanMap, x: np.ndarray) -> np.ndarray:
    return np.array([x[pmap.binary_idx[name]] for name in pmap.binary_names])


def solve_relaxation(spec: ProblemSpec, settings: PlanSettings,
                     fixings: dict):
    """Pure convex node relaxation; the bound side of the search."""
    relax = RelaxationState(mode=RelaxationMode.TRUST_REGION,
                            trust_radius=settings.trust_rho0, iteration=1)
    prog, pmap, offset = build_plan_subproblem(spec, settings, relax, fixings)
    sol = solve(prog, settings.solver)
    if sol.status == SolveStatus.PRIMAL_INFEASIBLE:
        return None, pmap, np.inf
    if sol.status is not SolveStatus.OPTIMAL:
        return None, pmap, np.inf
    return sol.primal, pmap, float(sol.objective + offset)


def solve_assignment(spec: ProblemSpec, settings: PlanSettings,
                     fixings: dict):
    """Integral solve: binaries pinned, bilinear atoms refined iteratively.

    Shared by the branch-and-bound leaves and by the exhaustive-enumeration
    oracle. Returns (objective, assignment-ready primal, map) or
    (inf, None, map) when infeasible."""
    relax = RelaxationState(mode=RelaxationMode.TRUST_REGION,
                            trust_radius=settings.trust_rho0, iteration=1)
    best_x, best_obj, pmap = None, np.inf, None
    for k in range(1, max(1, settings.refine_iters) + 1):
        relax.iteration = k
        relax.trust_radius = settings.trust_rho0 * settings.trust_decay ** (k - 1)
        prog, pmap, offset = build_plan_subproblem(spec, settings, relax,
                                                   fixings)
        sol = solve(prog, settings.solver)
        if sol.status is not SolveStatus.OPTIMAL:
            break
        best_x = sol.primal
        best_obj = float(sol.objective + offset)
        for atom in pmap.atoms:
            relax.anchor[atom.label] = atom.anchor_values(sol.primal)
    return best_obj, best_x, pmap


def _extract_assignment(spec: ProblemSpec, settings: PlanSettings,
                        pmap: _PlanMap, x: np.ndarray,
                        fixings: dict) -> ContactAssignment:
    free = [s for s in pmap.slots if s.fixed_position is None]
    n_s = len(spec.surfaces)
    h = np.zeros((len(free), n_s))
    for row, slot in enumerate(free):
        for r in range(n_s):
            h[row, r] = round(x[pmap.binary_idx[f"H/{slot.index}/{r}"]])
    positions = {s.index: (s.fixed_position if s.fixed_position is not None
                           else expr_values(pmap.point_exprs[s.index], x))
                 for s in pmap.slots}
    yaw = {c: float(x[i]) for c, i in pmap.yaw_idx.items()}
    sin_cos = {c: (float(x[pmap.sin_idx[c]]), float(x[pmap.cos_idx[c]]))
               for c in pmap.sin_idx}
    return ContactAssignment(surface_matrix=h, free_contacts=free,
                             positions=positions, yaw=yaw, sin_cos=sin_cos)


def _extract_trajectory(spec: ProblemSpec, settings: PlanSettings,
                        pmap: _PlanMap, x: np.ndarray) -> Trajectory:
    slot_of = {}
    for slot in pmap.slots:
        for t in range(slot.start, slot.end + 1):
            slot_of[(slot.eff, t)] = slot
    wrenches, points = {}, {}
    for (eff, t), idx in pmap.force_idx.items():
        wrenches[(eff, t)] = ContactWrench(force=x[idx], cop=np.zeros(2))
        points[(eff, t)] = expr_values(
            pmap.point_exprs[slot_of[(eff, t)].index], x)
    if settings.optimize_time:
        timesteps = np.array([x[pmap.dt_idx[t]]
                              for t in range(1, spec.horizon + 1)])
    else:
        timesteps = np.full(spec.horizon, spec.dt_init)
    return integrate(spec, wrenches, points, timesteps)


def plan_contacts(spec: ProblemSpec, settings: PlanSettings | None = None
                  ) -> PlanReport:
    """Best-first branch-and-bound over the surface-selection binaries."""
    settings = settings or PlanSettings()
    report = PlanReport()
    lock = threading.Lock()
    workers = worker_count()

    x0, pmap0, lb0 = solve_relaxation(spec, settings, {})
    report.nodes_explored = 1
    if x0 is None:
        report.status = "infeasible"
        return report
    root = BnBNode(lower_bound=lb0, tiebreak=0, fixings={}, depth=0,
                   relaxed_binaries=_relaxation_values(pmap0, x0), solution=x0)
    heap = [root]
    counter = 1
    incumbent_fixings = None

    def is_integral(values: np.ndarray) -> bool:
        return values.size == 0 or bool(
            np.all(np.abs(values - np.round(values)) <= settings.integrality_tol))

    def record():
        report.bounds_history.append({
            "lb": report.lower_bound,
            "ub": report.upper_bound,
            "nodes": report.nodes_explored,
        })

    def evaluate_child(fixings):
        x, pmap, lb = solve_relaxation(spec, settings, fixings)
        with lock:
            report.nodes_explored += 1
        if x is None:
            return None
        return x, pmap, lb

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while heap:
            node = heapq.heappop(heap)
            report.lower_bound = min(
                node.lower_bound,
                min((n.lower_bound for n in heap), default=np.inf),
                report.upper_bound,
            )
            record()
            if node.lower_bound >= report.upper_bound - \
                    settings.gap_tol * max(1.0, abs(report.upper_bound)):
                continue
            values = node.relaxed_binaries
            names = pmap0.binary_names
            if is_integral(values):
                fixings = {name: int(round(v))
                           for name, v in zip(names, values)}
                fixings.update(node.fixings)
                obj, x, pmap = solve_assignment(spec, settings, fixings)
                if x is not None and obj < report.upper_bound:
                    report.upper_bound = obj
                    report.objective = obj
                    report.assignment = _extract_assignment(
                        spec, settings, pmap, x, fixings)
                    report.trajectory = _extract_trajectory(
                        spec, settings, pmap, x)
                    incumbent_fixings = fixings
                record()
                continue
            if report.nodes_explored >= settings.max_nodes:
                break
            # Most-fractional branching, ties by position in the stable order.
            frac = np.abs(values - np.round(values))
            free = [i for i, name in enumerate(names)
                    if name not in node.fixings
                    and frac[i] > settings.integrality_tol]
            if not free:
                continue
            pick = max(free, key=lambda i: (min(values[i], 1 - values[i]), -i))
            children = []
            jobs = []
            for pin in (0, 1):
                fixings = dict(node.fixings)
                fixings[names[pick]] = pin
                jobs.append(fixings)
            if pool is not None:
                results = list(pool.map(evaluate_child, jobs))
            else:
                results = [evaluate_child(f) for f in jobs]
            for fixings, result in zip(jobs, results):
                if result is None:
                    continue
                x, pmap, lb = result
                child = BnBNode(
                    lower_bound=max(lb, node.lower_bound),
                    tiebreak=counter, fixings=fixings, depth=node.depth + 1,
                    relaxed_binaries=_relaxation_values(pmap, x), solution=x)
                counter += 1
                children.append(child)
            for child in children:
                heapq.heappush(heap, child)
    finally:
        if pool is not None:
            pool.shutdown(wait=False)

    if report.assignment is None:
        report.status = ("node_budget"
                         if report.nodes_explored >= settings.max_nodes
                         else "infeasible")
        return report
    report.lower_bound = min(
        min((n.lower_bound for n in heap), default=report.upper_bound),
        report.upper_bound,
    )
    record()
    if report.gap <= settings.gap_tol:
        report.status = "optimal"
    else:
        report.status = "node_budget"
    return report
