"""Primal-dual interior-point solver for second-order cone programs.

Solves problems in the canonical form

    minimize    c'x
    subject to  A x = b
                G x + s = h,  s in K

where K is a product of the nonnegative orthant and second-order cones.
The algorithm is a homogeneous self-dual path-following method with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step, so it also
produces Farkas certificates for primal or dual infeasible problems.
"""

from __future__ import annotations

import enum
import functools
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import cones
from .cones import ConeSpec, in_cone, min_eig, step_to_boundary


class SolveStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    DUAL_INFEASIBLE = "DualInfeasible"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class SolverSettings:
    tol: float = 1e-8
    max_iters: int = 100
    reg: float = 1e-8           # static KKT regularization
    refine_steps: int = 3       # iterative refinement against unregularized KKT
    step_frac: float = 0.99     # fraction of the step to the cone boundary
    infeas_tol: float = 1e-8
    equilibrate: bool = True    # Ruiz-equilibrate the problem data before solving
    ruiz_iters: int = 10
    # When the iteration stagnates before the strict tolerance is met, the
    # best iterate is still accepted as optimal if its residuals are within
    # accept_factor * tol (degenerate problems hit their attainable floor).
    accept_factor: float = 1e4

    def __post_init__(self):
        if self.tol <= 0 or self.infeas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class ConicProgram:
    """Canonical cone program data. Matrices are scipy sparse (any format)."""

    objective: np.ndarray
    eq_matrix: sp.spmatrix
    eq_rhs: np.ndarray
    ineq_matrix: sp.spmatrix
    ineq_rhs: np.ndarray
    cone: ConeSpec

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float).ravel()
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float).ravel()
        self.ineq_rhs = np.asarray(self.ineq_rhs, dtype=float).ravel()
        n = self.objective.size
        self.eq_matrix = sp.csc_matrix(self.eq_matrix, shape=(self.eq_rhs.size, n))
        self.ineq_matrix = sp.csc_matrix(self.ineq_matrix, shape=(self.ineq_rhs.size, n))
        if self.ineq_rhs.size != self.cone.dim:
            raise ValueError(
                f"inequality rows ({self.ineq_rhs.size}) do not match cone dimension "
                f"({self.cone.dim})"
            )

    @property
    def num_vars(self) -> int:
        return self.objective.size


@dataclass
class KktResiduals:
    primal: float = np.inf
    dual: float = np.inf
    gap: float = np.inf


@dataclass
class ConicSolution:
    primal: np.ndarray
    dual_eq: np.ndarray
    dual_ineq: np.ndarray
    slack: np.ndarray
    status: SolveStatus
    kkt_residuals: KktResiduals = field(default_factory=KktResiduals)
    objective: float = np.nan
    iterations: int = 0
    # Farkas certificate for infeasible statuses: (y, z) with A'y + G'z = 0,
    # z in K, b'y + h'z = -1 for primal infeasibility; x with Ax = 0,
    # Gx in -K, c'x = -1 for dual infeasibility.
    certificate: np.ndarray | None = None


# ---------------------------------------------------------------------------
# Nesterov-Todd scaling
# ---------------------------------------------------------------------------


class _Scaling:
    """NT scaling W with lambda = W z = W^{-1} s for the product cone.

    All SOC blocks of equal dimension are processed as one batch (gathered
    through the cached index matrices of `cones.block_groups`); per-block
    Python loops are far too slow for the trajectory subproblems, which carry
    hundreds of 2- to 4-dimensional blocks.
    """

    def __init__(self, s: np.ndarray, z: np.ndarray, cone: ConeSpec):
        self.cone = cone
        l = cone.nonneg
        # Iterates grazing the cone boundary make the determinant terms go
        # negative in floating point; compute quietly and fail explicitly so
        # the caller's numerical-failure path takes over.
        with np.errstate(divide="ignore", invalid="ignore"):
            self.w_orth = np.sqrt(s[:l] / z[:l]) if l else np.zeros(0)
            self.groups = []  # (idx matrix, sqrt_beta per block, wbar or None)
            for d, idx in cones.block_groups(cone).items():
                sb, zb = s[idx], z[idx]
                if d == 1:
                    self.groups.append((idx, np.sqrt(sb[:, 0] / zb[:, 0]), None))
                    continue
                snt = np.linalg.norm(sb[:, 1:], axis=1)
                znt = np.linalg.norm(zb[:, 1:], axis=1)
                a = np.sqrt((sb[:, 0] - snt) * (sb[:, 0] + snt))
                b = np.sqrt((zb[:, 0] - znt) * (zb[:, 0] + znt))
                sbar = sb / a[:, None]
                zbar_j = zb / -b[:, None]
                zbar_j[:, 0] *= -1.0
                gamma = np.sqrt(
                    (1.0 - np.einsum("ij,ij->i", sbar, zbar_j)
                     + 2.0 * sbar[:, 0] * zbar_j[:, 0]) / 2.0)
                wbar = (sbar + zbar_j) / (2.0 * gamma[:, None])
                # W is the square root of the quadratic representation of the
                # scaling point, hence the shifted/normalized Householder vector.
                v = wbar.copy()
                v[:, 0] += 1.0
                v /= np.sqrt(2.0 * (1.0 + wbar[:, 0]))[:, None]
                if not np.all(np.isfinite(v)):
                    raise ValueError("iterate left the cone interior")
                self.groups.append((idx, np.sqrt(a / b), v))
            self.lmbda = self.apply(z)
        if not (np.all(np.isfinite(self.w_orth))
                and np.all(np.isfinite(self.lmbda))):
            raise ValueError("iterate left the cone interior")

    def apply(self, u: np.ndarray) -> np.ndarray:
        """W u (W is symmetric, so this is also W' u)."""
        out = u.copy()
        l = self.cone.nonneg
        out[:l] = self.w_orth * u[:l]
        for idx, sqb, wbar in self.groups:
            ub = u[idx]
            if wbar is None:
                out[idx[:, 0]] = sqb * ub[:, 0]
            else:
                dots = np.einsum("ij,ij->i", wbar, ub)
                ju = -ub
                ju[:, 0] *= -1.0
                out[idx] = sqb[:, None] * (2.0 * wbar * dots[:, None] - ju)
        return out

    def apply_inv(self, u: np.ndarray) -> np.ndarray:
        """W^{-1} u."""
        out = u.copy()
        l = self.cone.nonneg
        out[:l] = u[:l] / self.w_orth
        for idx, sqb, wbar in self.groups:
            ub = u[idx]
            if wbar is None:
                out[idx[:, 0]] = ub[:, 0] / sqb
            else:
                jw = -wbar
                jw[:, 0] *= -1.0
                dots = np.einsum("ij,ij->i", jw, ub)
                ju = -ub
                ju[:, 0] *= -1.0
                out[idx] = (2.0 * jw * dots[:, None] - ju) / sqb[:, None]
        return out

    def wtw_values(self):
        """Entries of W'W for KKT assembly, in `wtw_pattern` order."""
        parts = [self.w_orth**2]
        for idx, sqb, wbar in self.groups:
            if wbar is None:
                parts.append(sqb**2)
            else:
                h = 2.0 * np.einsum("bi,bj->bij", wbar, wbar)
                d = wbar.shape[1]
                diag = np.arange(d)
                h[:, diag, diag] += np.where(diag == 0, -1.0, 1.0)
                hh = np.einsum("bij,bjk->bik", h, h)
                parts.append((sqb[:, None, None] ** 2 * hh).reshape(-1))
        return np.concatenate(parts) if parts else np.zeros(0)


@functools.lru_cache(maxsize=64)
def wtw_pattern(cone: ConeSpec):
    """(rows, cols) of the W'W entries emitted by `_Scaling.wtw_values`."""
    rows = [np.arange(cone.nonneg)]
    cols = [np.arange(cone.nonneg)]
    for d, idx in cones.block_groups(cone).items():
        if d == 1:
            rows.append(idx[:, 0])
            cols.append(idx[:, 0])
        else:
            rows.append(np.repeat(idx, d, axis=1).reshape(-1))
            cols.append(np.tile(idx, (1, d)).reshape(-1))
    return np.concatenate(rows), np.concatenate(cols)


def _circ(u: np.ndarray, v: np.ndarray, cone: ConeSpec) -> np.ndarray:
    out = np.empty_like(u)
    l = cone.nonneg
    out[:l] = u[:l] * v[:l]
    for d, idx in cones.block_groups(cone).items():
        ub, vb = u[idx], v[idx]
        out[idx[:, 0]] = np.einsum("ij,ij->i", ub, vb)
        if d > 1:
            out[idx[:, 1:]] = (ub[:, :1] * vb[:, 1:] + vb[:, :1] * ub[:, 1:])
    return out


def _circ_solve(lmbda: np.ndarray, d: np.ndarray, cone: ConeSpec) -> np.ndarray:
    """Solve lambda o w = d for w."""
    out = np.empty_like(d)
    l = cone.nonneg
    out[:l] = d[:l] / lmbda[:l]
    for dim, idx in cones.block_groups(cone).items():
        lb, db = lmbda[idx], d[idx]
        if dim == 1:
            out[idx[:, 0]] = db[:, 0] / lb[:, 0]
            continue
        det = lb[:, 0] ** 2 - np.einsum("ij,ij->i", lb[:, 1:], lb[:, 1:])
        w0 = (lb[:, 0] * db[:, 0]
              - np.einsum("ij,ij->i", lb[:, 1:], db[:, 1:])) / det
        out[idx[:, 0]] = w0
        out[idx[:, 1:]] = (db[:, 1:] - w0[:, None] * lb[:, 1:]) / lb[:, :1]
    return out


# ---------------------------------------------------------------------------
# KKT system
# ---------------------------------------------------------------------------


class _Kkt:
    """Sparse factorization of the NT-scaled KKT matrix with refinement."""

    def __init__(self, prog: ConicProgram, scaling: _Scaling, reg: float,
                 refine_steps: int):
        A, G = prog.eq_matrix, prog.ineq_matrix
        n, p, m = prog.num_vars, prog.eq_rhs.size, prog.ineq_rhs.size
        self.n, self.p, self.m = n, p, m
        self.refine_steps = refine_steps
        rows, cols = wtw_pattern(prog.cone)
        wtw = sp.coo_matrix(
            (scaling.wtw_values(), (rows, cols)), shape=(m, m)
        ).tocsc()
        k0 = sp.bmat(
            [
                [None, A.T, G.T],
                [A, None, None],
                [G, None, -wtw],
            ],
            format="csc",
        )
        reg_vec = np.concatenate([np.full(n, reg), np.full(p, -reg), np.full(m, -reg)])
        self.k0 = k0
        kreg = k0 + sp.diags(reg_vec)
        self.lu = spla.splu(kreg.tocsc(), permc_spec="COLAMD")

    def solve(self, rx: np.ndarray, ry: np.ndarray, rz: np.ndarray):
        rhs = np.concatenate([rx, ry, rz])
        u = self.lu.solve(rhs)
        scale = 1.0 + np.linalg.norm(rhs)
        for _ in range(self.refine_steps):
            resid = rhs - self.k0 @ u
            if np.linalg.norm(resid) <= 1e-13 * scale:
                break
            u = u + self.lu.solve(resid)
        n, p = self.n, self.p
        return u[:n], u[n : n + p], u[n + p :]


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------


def solve(
    prog: ConicProgram,
    settings: SolverSettings | None = None,
    warm: ConicSolution | None = None,
) -> ConicSolution:
    """Solve a cone program, returning a certified solution or certificate.

    The data is Ruiz-equilibrated first (block-uniform over each second-order
    cone) so badly scaled inputs do not stall the path-following iteration;
    the returned solution and residuals are reported in original units.
    """
    settings = settings or SolverSettings()
    if not settings.equilibrate:
        return _solve_core(prog, settings, warm)
    scaled, eq = _equilibrate(prog, settings.ruiz_iters)
    warm_s = _scale_warm(warm, eq) if warm is not None else None
    sol = _solve_core(scaled, settings, warm_s)
    return _unscale_solution(prog, sol, eq)


@dataclass
class _Equilibration:
    col: np.ndarray       # column scaling of the variables
    row_eq: np.ndarray    # row scaling of the equality system
    row_ineq: np.ndarray  # row scaling of the cone system (block-uniform)
    cost_scale: float
    rhs_scale: float


def _equilibrate(prog: ConicProgram, iters: int):
    A, G = prog.eq_matrix, prog.ineq_matrix
    n, p, m = prog.num_vars, prog.eq_rhs.size, prog.ineq_rhs.size
    col = np.ones(n)
    row = np.ones(p + m)
    for _ in range(iters):
        M = sp.vstack([A, G], format="csr").multiply(row[:, None]).tocsr()
        M = M.multiply(col[None, :]).tocsr()
        Mabs = abs(M)
        rnorm = np.asarray(Mabs.max(axis=1).todense()).ravel()
        # Rows of one SOC block share a single scaling factor.
        for sl_ in prog.cone.soc_slices():
            blk = slice(p + sl_.start, p + sl_.stop)
            rnorm[blk] = rnorm[blk].max()
        cnorm = np.asarray(Mabs.max(axis=0).todense()).ravel()
        rnorm[rnorm == 0] = 1.0
        cnorm[cnorm == 0] = 1.0
        row /= np.sqrt(rnorm)
        col /= np.sqrt(cnorm)
        if np.max(np.abs(np.sqrt(rnorm) - 1.0)) < 1e-3 and \
                np.max(np.abs(np.sqrt(cnorm) - 1.0)) < 1e-3:
            break
    row_eq, row_ineq = row[:p], row[p:]
    c_s = col * prog.objective
    cost_scale = 1.0 / max(1.0, np.max(np.abs(c_s), initial=0.0))
    b_s = row_eq * prog.eq_rhs
    h_s = row_ineq * prog.ineq_rhs
    rhs_scale = 1.0 / max(1.0, np.max(np.abs(b_s), initial=0.0),
                          np.max(np.abs(h_s), initial=0.0))
    eq = _Equilibration(col, row_eq, row_ineq, cost_scale, rhs_scale)
    scaled = ConicProgram(
        objective=cost_scale * c_s,
        eq_matrix=prog.eq_matrix.multiply(row_eq[:, None]).multiply(col[None, :]),
        eq_rhs=rhs_scale * b_s,
        ineq_matrix=prog.ineq_matrix.multiply(row_ineq[:, None]).multiply(col[None, :]),
        ineq_rhs=rhs_scale * h_s,
        cone=prog.cone,
    )
    return scaled, eq


def _scale_warm(warm: ConicSolution, eq: _Equilibration) -> ConicSolution:
    import copy

    out = copy.copy(warm)
    with np.errstate(invalid="ignore", divide="ignore"):
        out.primal = eq.rhs_scale * warm.primal / eq.col
        out.slack = eq.rhs_scale * eq.row_ineq * warm.slack
        out.dual_eq = eq.cost_scale * warm.dual_eq / eq.row_eq
        out.dual_ineq = eq.cost_scale * warm.dual_ineq / eq.row_ineq
    return out


def _unscale_solution(prog: ConicProgram, sol: ConicSolution,
                      eq: _Equilibration) -> ConicSolution:
    c, b, h = prog.objective, prog.eq_rhs, prog.ineq_rhs
    A, G = prog.eq_matrix, prog.ineq_matrix
    sol.primal = eq.col * sol.primal / eq.rhs_scale
    sol.slack = sol.slack / eq.row_ineq / eq.rhs_scale
    sol.dual_eq = eq.row_eq * sol.dual_eq / eq.cost_scale
    sol.dual_ineq = eq.row_ineq * sol.dual_ineq / eq.cost_scale
    if sol.status == SolveStatus.OPTIMAL:
        xs, ys, zs, ss = sol.primal, sol.dual_eq, sol.dual_ineq, sol.slack
        pcost = c @ xs
        gap = ss @ zs
        sol.objective = pcost
        ax, gx = A @ xs, G @ xs
        aty, gtz = A.T @ ys, G.T @ zs
        sol.kkt_residuals = KktResiduals(
            primal=max(
                np.linalg.norm(ax - b)
                / max(1.0 + np.linalg.norm(b), 1.0 + np.linalg.norm(ax)),
                np.linalg.norm(gx + ss - h)
                / max(1.0 + np.linalg.norm(h),
                      1.0 + np.linalg.norm(gx) + np.linalg.norm(ss)),
            ),
            dual=np.linalg.norm(aty + gtz + c)
            / max(1.0 + np.linalg.norm(c),
                  1.0 + np.linalg.norm(aty) + np.linalg.norm(gtz)),
            gap=gap / max(1.0, abs(pcost)),
        )
    elif sol.status == SolveStatus.PRIMAL_INFEASIBLE and sol.certificate is not None:
        scale = -(b @ sol.dual_eq + h @ sol.dual_ineq)
        if scale > 0:
            sol.dual_eq = sol.dual_eq / scale
            sol.dual_ineq = sol.dual_ineq / scale
        sol.certificate = np.concatenate([sol.dual_eq, sol.dual_ineq])
    elif sol.status == SolveStatus.DUAL_INFEASIBLE and sol.certificate is not None:
        scale = -(c @ sol.primal)
        if scale > 0:
            sol.primal = sol.primal / scale
            sol.slack = sol.slack / scale
        sol.certificate = sol.primal
    return sol


def _solve_core(
    prog: ConicProgram,
    settings: SolverSettings,
    warm: ConicSolution | None = None,
) -> ConicSolution:
    c, b, h = prog.objective, prog.eq_rhs, prog.ineq_rhs
    A, G = prog.eq_matrix, prog.ineq_matrix
    cone = prog.cone
    n, p, m = prog.num_vars, b.size, h.size
    if m == 0:
        raise ValueError("program must have at least one cone constraint")
    deg = cone.degree

    def fail(status, iters):
        return ConicSolution(
            primal=np.full(n, np.nan), dual_eq=np.full(p, np.nan),
            dual_ineq=np.full(m, np.nan), slack=np.full(m, np.nan),
            status=status, iterations=iters,
        )

    try:
        x, y, z, s = _initial_point(prog, settings, warm)
    except (RuntimeError, ValueError):
        return fail(SolveStatus.NUMERICAL_FAILURE, 0)
    tau, kappa = 1.0, 1.0

    norm_c = 1.0 + np.linalg.norm(c)
    norm_b = 1.0 + np.linalg.norm(b)
    norm_h = 1.0 + np.linalg.norm(h)

    best = None
    best_metric = np.inf
    since_best = 0
    mu_prev = np.inf
    mu_stall = 0

    def finish(fallback_status):
        if best is None:
            return fail(fallback_status, 0)
        # Feasibility is held to the inaccurate tolerance; the duality gap,
        # which only bounds suboptimality, gets another order of magnitude
        # (ill-conditioned objectives hit their gap floor well before the
        # residual floor).
        feas_accept = settings.accept_factor * settings.tol
        r = best.kkt_residuals
        if (r.primal <= feas_accept and r.dual <= feas_accept
                and r.gap <= 10.0 * feas_accept):
            best.status = SolveStatus.OPTIMAL
        else:
            best.status = fallback_status
        return best

    for it in range(settings.max_iters + 1):
        # Residuals of the homogeneous embedding.
        rx = A.T @ y + G.T @ z + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        rtau = kappa + c @ x + b @ y + h @ z
        mu = (s @ z + tau * kappa) / (deg + 1)

        # Convergence bookkeeping on the de-homogenized iterate.
        xs, ys, zs, ss = x / tau, y / tau, z / tau, s / tau
        pcost = c @ xs
        dcost = -(b @ ys + h @ zs)
        gap = ss @ zs
        relgap = gap / max(1.0, abs(pcost))
        # Residuals are measured relative to the iterate as well as the data,
        # so large-magnitude solutions are not held to an absolute standard
        # beyond machine precision.
        ax, gx = A @ xs, G @ xs
        aty, gtz = A.T @ ys, G.T @ zs
        pres = max(
            np.linalg.norm(ax - b) / max(norm_b, 1.0 + np.linalg.norm(ax)),
            np.linalg.norm(gx + ss - h)
            / max(norm_h, 1.0 + np.linalg.norm(gx) + np.linalg.norm(ss)),
        )
        dres = np.linalg.norm(aty + gtz + c) / max(
            norm_c, 1.0 + np.linalg.norm(aty) + np.linalg.norm(gtz)
        )
        resid = KktResiduals(primal=pres, dual=dres, gap=relgap)
        if pres <= settings.tol and dres <= settings.tol and (
            gap <= settings.tol or relgap <= settings.tol
        ):
            return ConicSolution(
                primal=xs, dual_eq=ys, dual_ineq=zs, slack=ss,
                status=SolveStatus.OPTIMAL, kkt_residuals=resid,
                objective=pcost, iterations=it,
            )

        # Infeasibility certificates (Farkas alternatives).
        by_hz = b @ y + h @ z
        if by_hz < -1e-12:
            yc, zc = y / -by_hz, z / -by_hz
            cert_res = np.linalg.norm(A.T @ yc + G.T @ zc) / norm_c
            if cert_res <= settings.infeas_tol and tau <= settings.infeas_tol * max(
                1.0, kappa
            ):
                return ConicSolution(
                    primal=np.full(n, np.nan), dual_eq=yc, dual_ineq=zc,
                    slack=np.full(m, np.nan), status=SolveStatus.PRIMAL_INFEASIBLE,
                    kkt_residuals=KktResiduals(dual=cert_res),
                    iterations=it, certificate=np.concatenate([yc, zc]),
                )
        cx = c @ x
        if cx < -1e-12:
            xc = x / -cx
            unb_res = max(
                np.linalg.norm(A @ xc) / norm_b,
                np.linalg.norm(G @ xc + s / -cx) / norm_h,
            )
            if unb_res <= settings.infeas_tol and tau <= settings.infeas_tol * max(
                1.0, kappa
            ):
                return ConicSolution(
                    primal=xc, dual_eq=np.full(p, np.nan),
                    dual_ineq=np.full(m, np.nan), slack=s / -cx,
                    status=SolveStatus.DUAL_INFEASIBLE,
                    kkt_residuals=KktResiduals(primal=unb_res),
                    iterations=it, certificate=xc,
                )

        metric = max(pres, dres, min(gap, relgap))
        if best is None or metric < best_metric:
            best_metric = metric
            since_best = 0
            best = ConicSolution(
                primal=xs, dual_eq=ys, dual_ineq=zs, slack=ss,
                status=SolveStatus.ITERATION_LIMIT, kkt_residuals=resid,
                objective=pcost, iterations=it,
            )
        else:
            since_best += 1
        # Stop once the barrier parameter refuses to fall: the direction
        # accuracy attainable at this conditioning has been exhausted.
        mu_stall = mu_stall + 1 if mu > 0.95 * mu_prev else 0
        mu_prev = mu
        if (it == settings.max_iters or since_best >= 10 or mu_stall >= 5
                or mu < 1e-13):
            return finish(SolveStatus.ITERATION_LIMIT)

        try:
            scaling = _Scaling(s, z, cone)
            kkt = _Kkt(prog, scaling, settings.reg, settings.refine_steps)
            x1, y1, z1 = kkt.solve(-c, b, h)
        except (RuntimeError, ValueError):
            return finish(SolveStatus.NUMERICAL_FAILURE)
        denom = c @ x1 + b @ y1 + h @ z1 - kappa / tau
        lmbda = scaling.lmbda

        def direction(ds_rhs, dkappa_rhs, rscale, rx=rx, ry=ry, rz=rz, rtau=rtau):
            tmp = _circ_solve(lmbda, ds_rhs, cone)
            x2, y2, z2 = kkt.solve(
                -rscale * rx, -rscale * ry, -rscale * rz - scaling.apply(tmp)
            )
            dtau = (
                -rscale * rtau - dkappa_rhs / tau - (c @ x2 + b @ y2 + h @ z2)
            ) / denom
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = z2 + dtau * z1
            dsv = scaling.apply(tmp - scaling.apply(dz))
            dkappa = (dkappa_rhs - kappa * dtau) / tau
            return dx, dy, dz, dsv, dtau, dkappa

        # Predictor (affine) direction.
        ds_aff = -_circ(lmbda, lmbda, cone)
        try:
            dxa, dya, dza, dsa, dta, dka = direction(ds_aff, -tau * kappa, 1.0)
        except (RuntimeError, ValueError):
            return finish(SolveStatus.NUMERICAL_FAILURE)
        alpha_aff = _max_step(s, z, tau, kappa, dsa, dza, dta, dka, cone)
        sigma = float(np.clip((1.0 - alpha_aff) ** 3, 0.0, 1.0))

        # Corrector (combined) direction.
        wdsa = scaling.apply_inv(dsa)
        wdza = scaling.apply(dza)
        ds_comb = ds_aff - _circ(wdsa, wdza, cone) + sigma * mu * cone.identity()
        dk_comb = -tau * kappa - dta * dka + sigma * mu
        try:
            dx, dy, dz, dsv, dt, dk = direction(ds_comb, dk_comb, 1.0 - sigma)
        except (RuntimeError, ValueError):
            return finish(SolveStatus.NUMERICAL_FAILURE)
        alpha = settings.step_frac * _max_step(s, z, tau, kappa, dsv, dz, dt, dk, cone)
        alpha = min(alpha, 1.0)
        if not np.isfinite(alpha) or alpha <= 1e-14:
            return finish(SolveStatus.NUMERICAL_FAILURE)

        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * dsv
        tau = tau + alpha * dt
        kappa = kappa + alpha * dk
        if not (np.all(np.isfinite(x)) and np.isfinite(tau) and tau > 0 and kappa > 0):
            return finish(SolveStatus.NUMERICAL_FAILURE)

    return finish(SolveStatus.ITERATION_LIMIT)  # pragma: no cover


def _max_step(s, z, tau, kappa, ds, dz, dtau, dkappa, cone) -> float:
    alpha = min(step_to_boundary(s, ds, cone), step_to_boundary(z, dz, cone))
    if dtau < 0:
        alpha = min(alpha, -tau / dtau)
    if dkappa < 0:
        alpha = min(alpha, -kappa / dkappa)
    return min(alpha, 1.0 / 0.99)


def _initial_point(prog: ConicProgram, settings: SolverSettings,
                   warm: ConicSolution | None):
    c, b, h = prog.objective, prog.eq_rhs, prog.ineq_rhs
    cone = prog.cone
    n, p, m = prog.num_vars, b.size, h.size
    e = cone.identity()

    if warm is not None and warm.status == SolveStatus.OPTIMAL and np.all(
        np.isfinite(warm.primal)
    ):
        x = warm.primal.copy()
        y = warm.dual_eq.copy()
        s = _push_interior(warm.slack, cone)
        z = _push_interior(warm.dual_ineq, cone)
        return x, y, z, s

    # Least-norm primal/dual starting points (identity scaling).
    class _UnitScaling:
        def wtw_values(self):
            parts = [np.ones(cone.nonneg)]
            for d, idx in cones.block_groups(cone).items():
                if d == 1:
                    parts.append(np.ones(idx.shape[0]))
                else:
                    parts.append(np.tile(np.eye(d).reshape(-1), idx.shape[0]))
            return np.concatenate(parts)

    kkt = _Kkt(prog, _UnitScaling(), settings.reg, settings.refine_steps)
    x, _, zt = kkt.solve(np.zeros(n), b, h)
    s0 = -zt
    me = min_eig(s0, cone)
    if me <= 0:
        s0 = s0 + (1.0 - me) * e
    _, y, z0 = kkt.solve(-c, np.zeros(p), np.zeros(m))
    me = min_eig(z0, cone)
    if me <= 0:
        z0 = z0 + (1.0 - me) * e
    return x, y, z0, s0


def _push_interior(v: np.ndarray, cone: ConeSpec, margin: float = 0.1) -> np.ndarray:
    v = np.where(np.isfinite(v), v, 0.0)
    me = min_eig(v, cone)
    shift = max(margin, margin - me if me < margin else 0.0)
    out = v + shift * cone.identity()
    if not in_cone(out, cone, tol=-1e-12) or min_eig(out, cone) <= 0:
        out = out + (1.0 - min_eig(out, cone)) * cone.identity()
    return out


# ---------------------------------------------------------------------------
# Problem-dump format (JSON, exact binary64 round-trip via decimal strings)
# ---------------------------------------------------------------------------


def _triplets(mat: sp.spmatrix):
    coo = sp.coo_matrix(mat)
    return [
        [int(r), int(c), repr(float(v))]
        for r, c, v in zip(coo.row, coo.col, coo.data)
    ]


def to_problem_dump(prog: ConicProgram) -> str:
    doc = {
        "objective": [repr(float(v)) for v in prog.objective],
        "eq": {
            "triplets": _triplets(prog.eq_matrix),
            "rhs": [repr(float(v)) for v in prog.eq_rhs],
        },
        "ineq": {
            "triplets": _triplets(prog.ineq_matrix),
            "rhs": [repr(float(v)) for v in prog.ineq_rhs],
        },
        "cone": {"nonneg": prog.cone.nonneg, "soc_dims": list(prog.cone.soc_dims)},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def from_problem_dump(text: str) -> ConicProgram:
    doc = json.loads(text)
    objective = np.array([float(v) for v in doc["objective"]])
    n = objective.size

    def mat(section):
        rhs = np.array([float(v) for v in section["rhs"]])
        trip = section["triplets"]
        rows = [t[0] for t in trip]
        cols = [t[1] for t in trip]
        vals = [float(t[2]) for t in trip]
        return sp.coo_matrix((vals, (rows, cols)), shape=(rhs.size, n)), rhs

    eq_m, eq_r = mat(doc["eq"])
    in_m, in_r = mat(doc["ineq"])
    cone = ConeSpec(nonneg=doc["cone"]["nonneg"], soc_dims=tuple(doc["cone"]["soc_dims"]))
    return ConicProgram(objective, eq_m, eq_r, in_m, in_r, cone)
