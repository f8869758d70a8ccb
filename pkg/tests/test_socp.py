"""Interior-point cone solver: optimality, certificates, serialization."""

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import oracle_instances, program_from_instance
from multicontact.cones import ConeSpec, min_eig
from multicontact.socp import (ConicProgram, SolveStatus, SolverSettings,
                               from_problem_dump, solve, to_problem_dump)

TIGHT = SolverSettings(tol=1e-10, max_iters=200)


def _lp(c, g, h, nonneg, a=None, b=None, soc=()):
    n = len(c)
    a = np.zeros((0, n)) if a is None else np.atleast_2d(a)
    b = np.zeros(0) if b is None else np.atleast_1d(b)
    return ConicProgram(objective=np.asarray(c, dtype=float),
                        eq_matrix=sp.csc_matrix(a), eq_rhs=b,
                        ineq_matrix=sp.csc_matrix(np.atleast_2d(g)),
                        ineq_rhs=np.atleast_1d(h),
                        cone=ConeSpec(nonneg=nonneg, soc_dims=tuple(soc)))


def test_simple_bound_lp():
    # min x subject to x >= 1  (slack of -x <= -1 is orthant).
    prog = _lp([1.0], [[-1.0]], [-1.0], nonneg=1)
    sol = solve(prog)
    assert sol.status == SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)
    assert sol.primal[0] == pytest.approx(1.0, abs=1e-8)


def test_equality_lp():
    # min x + 2y subject to x + y = 1, x, y >= 0 -> x = 1, obj 1.
    prog = _lp([1.0, 2.0], -np.eye(2), [0.0, 0.0], nonneg=2,
               a=[[1.0, 1.0]], b=[1.0])
    sol = solve(prog)
    assert sol.status == SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(sol.primal, [1.0, 0.0], atol=1e-7)


def test_soc_norm_minimization():
    # min t subject to (t, 1, 1) in SOC -> t = sqrt(2).
    g = np.array([[-1.0, 0.0, 0.0]])
    g = np.vstack([g, np.zeros((2, 3))])
    h = np.array([0.0, 1.0, 1.0])
    prog = _lp([1.0, 0.0, 0.0], g, h, nonneg=0, soc=(3,))
    sol = solve(prog)
    assert sol.status == SolveStatus.OPTIMAL
    assert sol.objective == pytest.approx(np.sqrt(2.0), abs=1e-8)


def test_optimal_invariants_on_random_instances():
    # Duality gap and complementarity at Optimal, on a sample of the frozen
    # oracle instances.
    for inst, _ in oracle_instances()[:25]:
        prog = program_from_instance(inst)
        sol = solve(prog, TIGHT)
        assert sol.status == SolveStatus.OPTIMAL
        primal_obj = float(prog.objective @ sol.primal)
        dual_obj = float(prog.eq_rhs @ sol.dual_eq +
                         prog.ineq_rhs @ sol.dual_ineq)
        assert abs(primal_obj + dual_obj) <= 1e-7 * (1 + abs(primal_obj))
        assert float(sol.slack @ sol.dual_ineq) <= 1e-7 * prog.cone.dim
        assert min_eig(sol.slack, prog.cone) >= -1e-8
        assert min_eig(sol.dual_ineq, prog.cone) >= -1e-8


def test_matches_first_order_oracle():
    # Certification against the independent projected-subgradient reference:
    # every frozen objective must be reproduced to 1e-5 relative with KKT
    # residuals at 1e-8.
    worst_rel = 0.0
    worst_kkt = 0.0
    for inst, record in oracle_instances():
        prog = program_from_instance(inst)
        sol = solve(prog, TIGHT)
        assert sol.status == SolveStatus.OPTIMAL
        rel = abs(sol.objective - record["objective"]) / max(
            1.0, abs(record["objective"]))
        worst_rel = max(worst_rel, rel)
        worst_kkt = max(worst_kkt, sol.kkt_residuals.primal,
                        sol.kkt_residuals.dual, sol.kkt_residuals.gap)
    assert worst_rel <= 1e-5
    assert worst_kkt <= 1e-8


def make_primal_infeasible(rng, n=6):
    """x must satisfy a.x <= alpha and a.x >= alpha + gap: empty."""
    a_dir = rng.standard_normal(n)
    alpha = float(rng.standard_normal())
    gap = float(rng.uniform(0.5, 2.0))
    # Box rows on every coordinate keep the dual side feasible, so the only
    # certificate the solver can return is the primal Farkas one.
    g = np.vstack([a_dir, -a_dir, -np.eye(n), np.eye(n)])
    h = np.concatenate([[alpha, -(alpha + gap)], np.full(2 * n, 10.0)])
    return _lp(rng.standard_normal(n), g, h, nonneg=g.shape[0])


def test_primal_infeasibility_certificates():
    rng = np.random.default_rng(77)
    for _ in range(20):
        prog = make_primal_infeasible(rng)
        sol = solve(prog)
        assert sol.status == SolveStatus.PRIMAL_INFEASIBLE
        cert = sol.certificate
        p = prog.eq_rhs.size
        y, z = cert[:p], cert[p:]
        res = prog.eq_matrix.T @ y + prog.ineq_matrix.T @ z
        assert np.max(np.abs(res)) <= 1e-6
        assert abs(prog.eq_rhs @ y + prog.ineq_rhs @ z + 1.0) <= 1e-6
        assert min_eig(z, prog.cone) >= -1e-6


def test_dual_infeasibility_certificate():
    # Unbounded below: min -x with only x >= 0.
    prog = _lp([-1.0], [[-1.0]], [0.0], nonneg=1)
    sol = solve(prog)
    assert sol.status == SolveStatus.DUAL_INFEASIBLE
    x = sol.certificate
    assert abs(prog.objective @ x + 1.0) <= 1e-6
    assert min_eig(-(prog.ineq_matrix @ x), prog.cone) >= -1e-6


def test_problem_dump_round_trip():
    inst, _ = oracle_instances()[0]
    prog = program_from_instance(inst)
    dump = to_problem_dump(prog)
    back = from_problem_dump(dump)
    assert np.array_equal(back.objective, prog.objective)
    assert np.array_equal(back.eq_rhs, prog.eq_rhs)
    assert np.array_equal(back.ineq_rhs, prog.ineq_rhs)
    assert np.array_equal(back.eq_matrix.toarray(), prog.eq_matrix.toarray())
    assert np.array_equal(back.ineq_matrix.toarray(),
                          prog.ineq_matrix.toarray())
    assert back.cone == prog.cone
    # Canonical text: dumping the parsed problem reproduces the bytes.
    assert to_problem_dump(back) == dump
    sol_a = solve(prog, TIGHT)
    sol_b = solve(back, TIGHT)
    assert sol_a.objective == sol_b.objective


def test_warm_start_reuses_solution():
    inst, _ = oracle_instances()[1]
    prog = program_from_instance(inst)
    cold = solve(prog, TIGHT)
    warm = solve(prog, TIGHT, warm=cold)
    assert warm.status == SolveStatus.OPTIMAL
    assert warm.objective == pytest.approx(cold.objective, rel=1e-9)
    assert warm.iterations <= cold.iterations


def test_shape_validation():
    with pytest.raises(ValueError):
        _lp([1.0, 2.0], [[-1.0]], [-1.0], nonneg=1)
    with pytest.raises(ValueError):
        _lp([1.0], [[-1.0], [1.0]], [-1.0, 2.0], nonneg=1)
