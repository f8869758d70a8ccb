"""Sparse affine expressions and an incremental cone-program builder.

Constraint assembly for the trajectory subproblems works symbolically: an
expression is a constant plus a sparse map from variable index to coefficient.
The builder collects equalities, orthant rows, second-order cone blocks and
epigraph-reformulated quadratic costs, then emits one ConicProgram in the
canonical form minimize c'x s.t. Ax = b, Gx + s = h, s in K.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import ConeSpec
from .socp import ConicProgram


class LinExpr:
    """Affine scalar expression: constant + sum of coeff * var."""

    __slots__ = ("const", "terms")

    def __init__(self, const: float = 0.0, terms: dict | None = None):
        self.const = float(const)
        self.terms = terms if terms is not None else {}

    @staticmethod
    def var(index: int, coeff: float = 1.0) -> "LinExpr":
        return LinExpr(0.0, {int(index): float(coeff)})

    def copy(self) -> "LinExpr":
        return LinExpr(self.const, dict(self.terms))

    def __add__(self, other):
        out = self.copy()
        if isinstance(other, LinExpr):
            out.const += other.const
            for idx, coeff in other.terms.items():
                out.terms[idx] = out.terms.get(idx, 0.0) + coeff
        else:
            out.const += float(other)
        return out

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * to_expr(other)

    def __rsub__(self, other):
        return to_expr(other) + (-1.0) * self

    def __mul__(self, scalar):
        scalar = float(scalar)
        return LinExpr(self.const * scalar,
                       {i: c * scalar for i, c in self.terms.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return self.const + sum(c * x[i] for i, c in self.terms.items())


def to_expr(v) -> LinExpr:
    if isinstance(v, LinExpr):
        return v
    return LinExpr(float(v))


def expr_values(exprs, x: np.ndarray) -> np.ndarray:
    return np.array([to_expr(e).value(x) for e in exprs])


class ProgramBuilder:
    """Accumulates variables, constraints and epigraph costs into a ConicProgram."""

    def __init__(self):
        self.num_vars = 0
        self.obj_terms: dict = {}
        self.obj_const = 0.0
        self._eq_rows = []      # (LinExpr, rhs)
        self._orthant = []      # LinExpr e meaning e <= 0, slack = -e >= 0
        self._soc_blocks = []   # list of LinExpr lists, block in SOC

    def new_vars(self, count: int) -> np.ndarray:
        idx = np.arange(self.num_vars, self.num_vars + count)
        self.num_vars += count
        return idx

    def new_var(self) -> int:
        return int(self.new_vars(1)[0])

    def add_linear_cost(self, expr, weight: float = 1.0):
        expr = to_expr(expr)
        self.obj_const += weight * expr.const
        for i, c in expr.terms.items():
            self.obj_terms[i] = self.obj_terms.get(i, 0.0) + weight * c

    def add_eq(self, expr, rhs=0.0):
        """Constraint expr == rhs."""
        self._eq_rows.append((to_expr(expr) - to_expr(rhs), 0.0))

    def add_le(self, expr, ub=0.0):
        """Constraint expr <= ub (one orthant row)."""
        self._orthant.append(to_expr(expr) - to_expr(ub))

    def add_ge(self, expr, lb=0.0):
        self.add_le(to_expr(lb) - to_expr(expr))

    def add_box(self, expr, lb: float, ub: float):
        self.add_ge(expr, lb)
        self.add_le(expr, ub)

    def add_soc(self, exprs):
        """Constraint (e0, e1, ..., ek) in the second-order cone."""
        self._soc_blocks.append([to_expr(e) for e in exprs])

    def add_sq_le(self, exprs, bound):
        """Constraint ||exprs||^2 <= bound via the epigraph cone
        (bound + 1, 2*exprs, bound - 1) in SOC."""
        bound = to_expr(bound)
        block = [bound + 1.0]
        block.extend(2.0 * to_expr(e) for e in exprs)
        block.append(bound - 1.0)
        self.add_soc(block)

    def add_quad_cost(self, weight: float, exprs) -> int:
        """Objective term weight * ||exprs||^2; returns the epigraph variable.

        The weight is folded into the cone rows as sqrt(weight) so the
        objective coefficient of every epigraph variable is 1; this keeps the
        cost vector well scaled when term weights span many orders of
        magnitude. The epigraph variable therefore carries the weighted value
        weight * ||exprs||^2."""
        epi = self.new_var()
        root = float(weight) ** 0.5
        self.add_sq_le([root * to_expr(e) for e in exprs], LinExpr.var(epi))
        self.add_linear_cost(LinExpr.var(epi), 1.0)
        return epi

    def build(self) -> ConicProgram:
        n = self.num_vars
        c = np.zeros(n)
        for i, coeff in self.obj_terms.items():
            c[i] = coeff

        def stack(rows):
            data, ri, ci, rhs = [], [], [], []
            for k, (expr, _) in enumerate(rows):
                rhs.append(-expr.const)
                for i, coeff in expr.terms.items():
                    ri.append(k)
                    ci.append(i)
                    data.append(coeff)
            return sp.coo_matrix((data, (ri, ci)), shape=(len(rows), n)), np.array(rhs)

        a_mat, b = stack(self._eq_rows)

        # Inequalities: h - G x = s in K. Orthant rows first, then SOC blocks.
        data, ri, ci, h = [], [], [], []
        row = 0
        for expr in self._orthant:
            # expr <= 0  ->  s = -expr >= 0  ->  G row = +coeffs, h = -const.
            h.append(-expr.const)
            for i, coeff in expr.terms.items():
                ri.append(row)
                ci.append(i)
                data.append(coeff)
            row += 1
        soc_dims = []
        for block in self._soc_blocks:
            soc_dims.append(len(block))
            for expr in block:
                # s entry = expr  ->  G row = -coeffs, h = const.
                h.append(expr.const)
                for i, coeff in expr.terms.items():
                    ri.append(row)
                    ci.append(i)
                    data.append(-coeff)
                row += 1
        g_mat = sp.coo_matrix((data, (ri, ci)), shape=(row, n))
        cone = ConeSpec(nonneg=len(self._orthant), soc_dims=tuple(soc_dims))
        if b.size == 0:
            b = np.zeros(0)
        return ConicProgram(c, a_mat, b, g_mat, np.array(h), cone)
