"""Centroidal dynamics model: problem data, exact integration, feasibility.

The optimization modules work on relaxed convex models; this module holds the
ground truth. `integrate` propagates the exact nonconvex momentum dynamics
from controls, `convergence_error` measures the mismatch between a candidate
plan and its integration, and `check_feasibility` audits the path constraints
(friction, CoP boxes, timestep bounds, reach, surface membership).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .terrain import TerrainSurface


@dataclass(frozen=True)
class CentroidalState:
    """CoM position, linear momentum and angular momentum at one timestep."""

    com: np.ndarray           # meters
    lin_momentum: np.ndarray  # kg m/s
    ang_momentum: np.ndarray  # kg m^2/s

    def __post_init__(self):
        for name in ("com", "lin_momentum", "ang_momentum"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class EndeffectorConfig:
    """Per-endeffector contact geometry: frame, CoP box, reach, hand flag."""

    id: str
    rotation: np.ndarray          # 3x3 orthonormal, third column = surface normal
    cop_min: np.ndarray           # 2-vector, meters (local frame)
    cop_max: np.ndarray
    max_reach: float              # meters, distance from the CoM
    is_hand: bool = False

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        if np.max(np.abs(rot.T @ rot - np.eye(3))) > 1e-9:
            raise ValueError(f"rotation of '{self.id}' is not orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > 1e-9:
            raise ValueError(f"rotation of '{self.id}' must have determinant +1")
        cop_min = np.asarray(self.cop_min, dtype=float).reshape(2)
        cop_max = np.asarray(self.cop_max, dtype=float).reshape(2)
        if np.any(cop_min > cop_max):
            raise ValueError("cop bounds must satisfy min <= max")
        if self.max_reach <= 0:
            raise ValueError("max_reach must be positive")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "cop_min", cop_min)
        object.__setattr__(self, "cop_max", cop_max)


@dataclass(frozen=True)
class ContactSchedule:
    """Which endeffectors touch down when, and on which surface."""

    horizon: int
    active_set: tuple          # active_set[t] = tuple of endeffector ids, t = 1..N
    surface_assignment: dict   # (endeffector id, t) -> surface index

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.active_set) != self.horizon + 1:
            raise ValueError("active_set must have horizon + 1 entries (index 0 unused)")
        for t in range(1, self.horizon + 1):
            for eff in self.active_set[t]:
                if (eff, t) not in self.surface_assignment:
                    raise ValueError(f"missing surface assignment for ({eff}, {t})")
        # Contact phases must be contiguous runs per endeffector and surface.
        effs = {e for act in self.active_set for e in act}
        for eff in effs:
            for _ in self.contact_phases(eff):
                pass

    def active(self, t: int):
        return self.active_set[t]

    def contact_phases(self, eff: str):
        """Contiguous (start, end, surface) stance runs of one endeffector."""
        phases = []
        t = 1
        while t <= self.horizon:
            if eff in self.active_set[t]:
                start = t
                surf = self.surface_assignment[(eff, t)]
                while t <= self.horizon and eff in self.active_set[t] and \
                        self.surface_assignment[(eff, t)] == surf:
                    t += 1
                phases.append((start, t - 1, surf))
            else:
                t += 1
        return phases


@dataclass(frozen=True)
class ContactWrench:
    """Per-endeffector wrench: inertial force, local CoP, normal torque."""

    force: np.ndarray          # newtons, inertial frame
    cop: np.ndarray            # 2-vector, meters, local frame
    normal_torque: float = 0.0  # N m, about the surface normal

    def __post_init__(self):
        object.__setattr__(self, "force", np.asarray(self.force, dtype=float).reshape(3))
        object.__setattr__(self, "cop", np.asarray(self.cop, dtype=float).reshape(2))

    def torque(self, rotation: np.ndarray) -> np.ndarray:
        """Contact torque at the endeffector: CoP lever cross force plus normal."""
        lever = rotation[:, :2] @ self.cop
        return np.cross(lever, self.force) + rotation[:, 2] * self.normal_torque

    def com_torque(self, rotation: np.ndarray, contact_point: np.ndarray,
                   com: np.ndarray) -> np.ndarray:
        """Torque contribution about the CoM."""
        lever = contact_point - com
        return np.cross(lever, self.force) + self.torque(rotation)


@dataclass
class CostWeights:
    """Weighted quadratic cost terms; zero weight disables a term."""

    com_terminal: float = 1e4
    com_displacement: np.ndarray = field(default_factory=lambda: np.zeros(3))
    time_reg: float = 1e3
    momenta_terminal: float = 1e2
    contact_consensus: float = 1.0
    momenta_consensus: float = 1.0
    momenta_rate: float = 1e-1
    momenta_running: float = 1e-2
    force_reg: float = 1e-3
    torque_reg: float = 1e-3

    def __post_init__(self):
        self.com_displacement = np.asarray(self.com_displacement, dtype=float).reshape(3)


@dataclass
class ReferenceTrajectories:
    """Optional consensus references: momenta and endeffector positions."""

    momenta: dict | None = None           # t -> 6-vector (l, k)
    endeffectors: dict | None = None      # (eff id, t) -> 3-vector


@dataclass
class ProblemSpec:
    """Full problem data for one centroidal trajectory optimization."""

    mass: float
    gravity: np.ndarray
    friction: float
    schedule: ContactSchedule
    endeffectors: list
    surfaces: list
    dt_init: float
    dt_min: float
    dt_max: float
    initial_state: CentroidalState
    contact_locations: dict = field(default_factory=dict)  # (eff id, t) -> 3-vector
    cost_weights: CostWeights = field(default_factory=CostWeights)
    references: ReferenceTrajectories | None = None
    torque_limit_data: object = None

    def __post_init__(self):
        self.gravity = np.asarray(self.gravity, dtype=float).reshape(3)
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if not (0 < self.dt_min <= self.dt_init <= self.dt_max):
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if self.friction <= 0:
            raise ValueError("friction must be positive")
        ids = [e.id for e in self.endeffectors]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate endeffector ids")

    @property
    def horizon(self) -> int:
        return self.schedule.horizon

    def endeffector(self, eff_id: str) -> EndeffectorConfig:
        for e in self.endeffectors:
            if e.id == eff_id:
                return e
        raise KeyError(f"unknown endeffector '{eff_id}'")

    def surface(self, index: int) -> TerrainSurface:
        return self.surfaces[index]


@dataclass
class Trajectory:
    """States over 0..N plus the controls that produced them."""

    states: list                 # N+1 CentroidalStates
    wrenches: dict               # (eff id, t) -> ContactWrench, t = 1..N
    contact_points: dict         # (eff id, t) -> 3-vector
    timesteps: np.ndarray        # N entries, seconds

    def __post_init__(self):
        self.timesteps = np.asarray(self.timesteps, dtype=float).ravel()

    @property
    def horizon(self) -> int:
        return len(self.states) - 1


@dataclass
class ErrorReport:
    """Per-quantity mean squared deviation between a plan and its integration."""

    eps_r: float
    eps_l: float
    eps_k: float
    eps: float


@dataclass
class ViolationReport:
    """Per-constraint maximum violations of a trajectory."""

    friction: float = 0.0
    cop: float = 0.0
    timestep: float = 0.0
    reach: float = 0.0
    membership: float = 0.0

    @property
    def max_violation(self) -> float:
        return max(self.friction, self.cop, self.timestep, self.reach,
                   self.membership)

    def ok(self, tol: float) -> bool:
        return self.max_violation <= tol


def integrate(spec: ProblemSpec, wrenches: dict, contact_points: dict,
              timesteps) -> Trajectory:
    """Exact forward integration of the centroidal dynamics from controls.

    Linear momentum accumulates gravity and contact forces, the CoM uses the
    current-step momentum (semi-implicit), and angular momentum accumulates
    contact torques about the integrated CoM. This is the feasibility oracle;
    nothing here is relaxed.
    """
    timesteps = np.asarray(timesteps, dtype=float).ravel()
    n = spec.horizon
    if timesteps.size != n:
        raise ValueError(f"expected {n} timesteps, got {timesteps.size}")
    states = [spec.initial_state]
    com = spec.initial_state.com.copy()
    lin = spec.initial_state.lin_momentum.copy()
    ang = spec.initial_state.ang_momentum.copy()
    for t in range(1, n + 1):
        dt = timesteps[t - 1]
        force_sum = spec.mass * spec.gravity
        for eff in spec.schedule.active(t):
            force_sum = force_sum + wrenches[(eff, t)].force
        lin = lin + force_sum * dt
        com = com + (lin / spec.mass) * dt
        torque_sum = np.zeros(3)
        for eff in spec.schedule.active(t):
            cfg = spec.endeffector(eff)
            torque_sum = torque_sum + wrenches[(eff, t)].com_torque(
                cfg.rotation, contact_points[(eff, t)], com
            )
        ang = ang + torque_sum * dt
        states.append(CentroidalState(com.copy(), lin.copy(), ang.copy()))
    return Trajectory(states=states, wrenches=dict(wrenches),
                      contact_points=dict(contact_points), timesteps=timesteps)


def convergence_error(candidate: Trajectory, integrated: Trajectory) -> ErrorReport:
    """Mean squared state deviation per quantity; eps is their supremum."""
    if candidate.horizon != integrated.horizon:
        raise ValueError("trajectories have different horizons")
    n = candidate.horizon
    err_r = err_l = err_k = 0.0
    for t in range(1, n + 1):
        ca, it = candidate.states[t], integrated.states[t]
        err_r += float(np.sum((ca.com - it.com) ** 2))
        err_l += float(np.sum((ca.lin_momentum - it.lin_momentum) ** 2))
        err_k += float(np.sum((ca.ang_momentum - it.ang_momentum) ** 2))
    report = ErrorReport(eps_r=err_r / n, eps_l=err_l / n, eps_k=err_k / n, eps=0.0)
    report.eps = max(report.eps_r, report.eps_l, report.eps_k)
    return report


def check_feasibility(traj: Trajectory, spec: ProblemSpec,
                      tol: float = 1e-6) -> ViolationReport:
    """Maximum violation per path-constraint family over the trajectory."""
    rep = ViolationReport()
    rep.timestep = float(max(
        np.max(spec.dt_min - traj.timesteps, initial=0.0),
        np.max(traj.timesteps - spec.dt_max, initial=0.0),
    ))
    for t in range(1, traj.horizon + 1):
        com = traj.states[t].com
        for eff in spec.schedule.active(t):
            cfg = spec.endeffector(eff)
            wrench = traj.wrenches[(eff, t)]
            local = cfg.rotation.T @ wrench.force
            rep.friction = max(rep.friction, float(
                np.linalg.norm(local[:2]) - spec.friction * local[2]))
            rep.cop = max(rep.cop, float(max(
                np.max(cfg.cop_min - wrench.cop, initial=0.0),
                np.max(wrench.cop - cfg.cop_max, initial=0.0),
            )))
            point = np.asarray(traj.contact_points[(eff, t)], dtype=float)
            rep.reach = max(rep.reach, float(
                np.linalg.norm(point - com) - cfg.max_reach))
            surf = spec.surface(spec.schedule.surface_assignment[(eff, t)])
            rep.membership = max(rep.membership, surf.membership_violation(point))
    for name in ("friction", "cop", "reach", "membership"):
        setattr(rep, name, max(0.0, getattr(rep, name)))
    return rep
