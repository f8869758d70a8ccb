"""Difference-of-quadratics handling of bilinear constraint terms.

Every bilinear product a.b in the dynamics is rewritten through the identity

    a.b = 1/4 ||a + b||^2 - 1/4 ||a - b||^2

and the two squared norms are replaced by fresh scalar variables (an atom's
plus/minus pair), leaving the original constraint affine. Each quadratic
equality alpha = ||p||^2 is then approximated iteratively, either with a
shrinking trust-region cut or with a soft penalty against the linear
underestimator at the previous iterate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .affine import LinExpr, ProgramBuilder, expr_values, to_expr


class RelaxationMode(str, enum.Enum):
    TRUST_REGION = "trust"
    SOFT_CONSTRAINT = "soft"


@dataclass
class BilinearAtom:
    """One scalar bilinear product with its substitution variables.

    The product left.right is represented as (plus_var - minus_var) / 4 where
    at an exactly feasible point plus_var = ||left + right||^2 and
    minus_var = ||left - right||^2.
    """

    label: str
    left: list       # affine expressions (or numbers)
    right: list
    plus_var: int = -1
    minus_var: int = -1
    # The identity holds for any sigma > 0 with the sides sigma*a and b/sigma;
    # a physics-derived sigma keeps both sides of comparable magnitude, which
    # keeps the substitution variables (and hence the subproblem iterates)
    # well scaled.
    balance: float = 1.0

    @property
    def plus_exprs(self):
        s = self.balance
        return [s * to_expr(a) + (1.0 / s) * to_expr(b)
                for a, b in zip(self.left, self.right)]

    @property
    def minus_exprs(self):
        s = self.balance
        return [s * to_expr(a) - (1.0 / s) * to_expr(b)
                for a, b in zip(self.left, self.right)]

    def product_expr(self) -> LinExpr:
        """The affine stand-in for left.right after substitution."""
        return 0.25 * (LinExpr.var(self.plus_var) - LinExpr.var(self.minus_var))

    def anchor_values(self, x: np.ndarray):
        """Values of (left + right, left - right) at a solution vector."""
        return expr_values(self.plus_exprs, x), expr_values(self.minus_exprs, x)


@dataclass
class RelaxationState:
    """Iteration state shared by all atoms of one subproblem."""

    mode: RelaxationMode = RelaxationMode.TRUST_REGION
    trust_radius: float = 1.0
    soft_penalty: float = 1e5
    iteration: int = 1
    anchor: dict = field(default_factory=dict)  # label -> (p_plus, p_minus)

    @property
    def first_iteration(self) -> bool:
        """Anchorless start: only the convex epigraph sides are emitted."""
        return not self.anchor


def decompose_cross_product(lever, force):
    """Three 2-vector pairs (a_i, b_i) with a_i . b_i = (lever x force)_i.

    Components follow the standard skew expansion: for the x row the pair is
    a = (-lever_z, lever_y), b = (force_y, force_z), and cyclic analogues for
    y and z. Entries may be affine expressions or plain numbers.
    """
    lx, ly, lz = lever
    fx, fy, fz = force
    return [
        ([-1.0 * to_expr(lz), to_expr(ly)], [to_expr(fy), to_expr(fz)]),
        ([to_expr(lz), -1.0 * to_expr(lx)], [to_expr(fx), to_expr(fz)]),
        ([-1.0 * to_expr(ly), to_expr(lx)], [to_expr(fx), to_expr(fy)]),
    ]


def cross_product_pairs_numeric(lever, force):
    """Numeric twin of decompose_cross_product for oracle checks."""
    lx, ly, lz = [float(v) for v in lever]
    fx, fy, fz = [float(v) for v in force]
    return [
        (np.array([-lz, ly]), np.array([fy, fz])),
        (np.array([lz, -lx]), np.array([fx, fz])),
        (np.array([-ly, lx]), np.array([fx, fy])),
    ]


def decompose_time_bilinears(momentum, torque_sum, force_sum, timestep):
    """Scalar atoms for the three product families entering the dynamics when
    the timestep is an optimization variable: l_i * dt, (sum kappa_i) * dt and
    (sum f_i) * dt, one pair per Cartesian component."""
    pairs = {"momentum_time": [], "torque_time": [], "force_time": []}
    for i in range(3):
        pairs["momentum_time"].append(([to_expr(momentum[i])], [to_expr(timestep)]))
        pairs["torque_time"].append(([to_expr(torque_sum[i])], [to_expr(timestep)]))
        pairs["force_time"].append(([to_expr(force_sum[i])], [to_expr(timestep)]))
    return pairs


def product_identity_residual(a: np.ndarray, b: np.ndarray) -> float:
    """|a.b - (||a+b||^2 - ||a-b||^2) / 4| for numeric vectors."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    plus = float(np.sum((a + b) ** 2))
    minus = float(np.sum((a - b) ** 2))
    return abs(float(a @ b) - 0.25 * (plus - minus))


def make_atom(builder: ProgramBuilder, label: str, left, right,
              balance: float = 1.0) -> BilinearAtom:
    """Create an atom with fresh substitution variables on the builder."""
    if not (balance > 0):
        raise ValueError("balance must be positive")
    atom = BilinearAtom(label=label, left=list(left), right=list(right),
                        balance=balance)
    atom.plus_var = builder.new_var()
    atom.minus_var = builder.new_var()
    return atom


def trust_region_cut(anchor: np.ndarray, rho: float):
    """Coefficients of the cut q(p*) + grad q(p*).(p - p*) + rho >= alpha.

    Returns (gradient, offset) such that the cut reads
    alpha - gradient.p <= offset."""
    anchor = np.asarray(anchor, dtype=float)
    grad = 2.0 * anchor
    offset = rho - float(anchor @ anchor)
    return grad, offset


def relax_trust_region(builder: ProgramBuilder, atom: BilinearAtom,
                       state: RelaxationState):
    """Emit the convex epigraph sides, plus linear trust cuts when anchored.

    Iteration 1 searches the whole relaxed convex space (epigraph sides only);
    later iterations add one cut per substitution variable, built at the
    previous iterate with allowance state.trust_radius. Cuts are applied to
    both the plus and the minus variable symmetrically."""
    _emit_convex_sides(builder, atom)
    if state.first_iteration or atom.label not in state.anchor:
        return
    p_plus, p_minus = state.anchor[atom.label]
    for exprs, var, anchor in (
        (atom.plus_exprs, atom.plus_var, p_plus),
        (atom.minus_exprs, atom.minus_var, p_minus),
    ):
        grad, offset = trust_region_cut(anchor, state.trust_radius)
        lhs = LinExpr.var(var)
        for g, e in zip(grad, exprs):
            lhs = lhs - g * e
        builder.add_le(lhs, offset)


def relax_soft_constraint(builder: ProgramBuilder, atom: BilinearAtom,
                          state: RelaxationState):
    """Emit the convex sides plus the underestimator penalty when anchored.

    Returns the epigraph variables of the penalty terms (empty on the first
    iteration) so the caller can separate penalty cost from base cost."""
    _emit_convex_sides(builder, atom)
    if state.first_iteration or atom.label not in state.anchor:
        return []
    p_plus, p_minus = state.anchor[atom.label]
    penalty_vars = []
    for exprs, var, anchor in (
        (atom.plus_exprs, atom.plus_var, p_plus),
        (atom.minus_exprs, atom.minus_var, p_minus),
    ):
        grad, offset = trust_region_cut(anchor, 0.0)
        # Residual of alpha against the underestimator hyperplane.
        resid = LinExpr.var(var) - offset
        for g, e in zip(grad, exprs):
            resid = resid - g * e
        penalty_vars.append(builder.add_quad_cost(state.soft_penalty, [resid]))
    return penalty_vars


def _emit_convex_sides(builder: ProgramBuilder, atom: BilinearAtom):
    builder.add_sq_le(atom.plus_exprs, LinExpr.var(atom.plus_var))
    builder.add_sq_le(atom.minus_exprs, LinExpr.var(atom.minus_var))


def atom_residuals(atoms, x: np.ndarray) -> np.ndarray:
    """Per-atom max |alpha - ||p||^2| over the plus and minus sides."""
    out = np.zeros(len(atoms))
    for i, atom in enumerate(atoms):
        p_plus, p_minus = atom.anchor_values(x)
        out[i] = max(
            abs(x[atom.plus_var] - float(p_plus @ p_plus)),
            abs(x[atom.minus_var] - float(p_minus @ p_minus)),
        )
    return out
