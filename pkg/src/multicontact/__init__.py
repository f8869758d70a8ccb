"""Multi-contact centroidal trajectory optimization via sequences of SOCPs."""

from .centroidal import (CentroidalState, ContactSchedule, ContactWrench,
                         CostWeights, EndeffectorConfig, ProblemSpec,
                         ReferenceTrajectories, Trajectory,
                         check_feasibility, convergence_error, integrate)
from .cones import ConeSpec, project_onto_cone
from .contacts import (ContactAssignment, PlanReport, PlanSettings,
                       plan_contacts)
from .scp import ScpReport, ScpSettings, TorqueLimitData, solve_scp
from .socp import (ConicProgram, ConicSolution, SolveStatus, SolverSettings,
                   solve)
from .terrain import TerrainSurface

__all__ = [
    "CentroidalState",
    "ConeSpec",
    "ConicProgram",
    "ConicSolution",
    "ContactAssignment",
    "ContactSchedule",
    "ContactWrench",
    "CostWeights",
    "EndeffectorConfig",
    "PlanReport",
    "PlanSettings",
    "ProblemSpec",
    "ReferenceTrajectories",
    "ScpReport",
    "ScpSettings",
    "SolveStatus",
    "SolverSettings",
    "TerrainSurface",
    "TorqueLimitData",
    "Trajectory",
    "check_feasibility",
    "convergence_error",
    "integrate",
    "plan_contacts",
    "project_onto_cone",
    "solve",
    "solve_scp",
]
