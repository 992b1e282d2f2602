import math

import numpy as np
import pandas as pd
import pytest
import fastcore.test as ft

from robeam.conic import AffineExpr, ConicProgram, Nonneg, Psd, SecondOrder, SolveStatus, Zero, add_constraint, extract_q
from robeam.config import ConfigError
from robeam.restrictions.common import QTerms
from robeam.solver import SolverSettings, solve


def scalar_program():
    "min x s.t. x >= 1"
    prog = ConicProgram("scalar")
    prog.add_variable("x", 1, cost=1.0)
    prog.add_block([[-1.0]], [-1.0], Nonneg(1))
    return prog


def rank_one_sdp(h, level):
    "min tr(Q) s.t. h^H Q h >= level, Q >= 0"
    prog = ConicProgram("sdp")
    prog.add_hermitian("Q", len(h), trace_cost=1.0)
    qt = QTerms(prog)
    qt.add_psd()
    add_constraint(prog, (qt.quad(h) - level).real(), Nonneg(1))
    return prog


def test_settings_validation():
    ft.test_fail(lambda: SolverSettings(tol_gap=0), contains="tol_gap")
    ft.test_fail(lambda: SolverSettings(step_fraction=1.0), contains="step_fraction")
    ft.test_fail(lambda: SolverSettings(max_iter=0), contains="max_iter")
    ft.test_fail(lambda: SolverSettings.from_config_dict({"tol": 1e-3}), contains="Invalid config")
    with pytest.raises(ConfigError):
        SolverSettings(regularization=-1.0)
    ft.test_eq(SolverSettings.from_config_dict(SolverSettings(max_iter=50).to_config_dict()).max_iter, 50)


def test_scalar_lp():
    sol = solve(scalar_program())
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.x[0], 1.0, eps=1e-6)
    ft.test_close(sol.primal_objective, 1.0, eps=1e-6)
    ft.test_close(sol.dual_objective, 1.0, eps=1e-6)
    ft.test_close(sol.duals[0], [1.0], eps=1e-5)
    assert sol.ok


def test_norm_of_fixed_vector():
    "min t s.t. ||(3, 4)|| <= t"
    prog = ConicProgram()
    prog.add_variable("t", 1, cost=1.0)
    prog.add_block([[-1.0], [0.0], [0.0]], [0.0, 3.0, 4.0], SecondOrder(3))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.x[0], 5.0, eps=1e-5)


@pytest.mark.parametrize("scale", [1e-3, 1.0, 1e3])
def test_norm_of_scaled_vector(scale):
    prog = ConicProgram()
    prog.add_variable("t", 1, cost=1.0)
    prog.add_block([[-1.0], [0.0], [0.0]], [0.0, 3.0 * scale, 4.0 * scale], SecondOrder(3))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.x[0] / scale, 5.0, eps=1e-5)
    assert sol.info["pres"] <= SolverSettings().tol_feas


def test_unreachable_tolerance_keeps_best_iterate():
    "tolerances below round-off stop the solver, the returned point is still the optimum"
    prog = ConicProgram()
    prog.add_variable("t", 1, cost=1.0)
    prog.add_block([[-1.0], [0.0], [0.0]], [0.0, 3.0, 4.0], SecondOrder(3))
    sol = solve(prog, SolverSettings(tol_gap=1e-30, tol_feas=1e-30, max_iter=60))
    assert sol.status in (SolveStatus.NUMERICAL, SolveStatus.MAX_ITER)
    ft.test_close(sol.x[0], 5.0, eps=1e-6)
    assert sol.info["pres"] <= 1e-7
    assert sol.info["dres"] <= 1e-7


def test_mixed_soc_and_psd(rng):
    "min tr(Q) s.t. h'Qh >= 1 and |Q_11| <= 0.4"
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    prog = rank_one_sdp(h, 1.0)
    x = AffineExpr.variable(prog, "Q")
    # the first diagonal entry of Q is bounded through a 2-d cone (0.4, Q_11)
    add_constraint(prog, AffineExpr.stack([AffineExpr.constant([0.4], prog.num_vars), x[:1]]), SecondOrder(2))
    sol = solve(prog, SolverSettings(check_duality=True))
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    Q = extract_q(prog, sol)
    assert np.linalg.eigvalsh(Q).min() >= -1e-7
    assert Q[0, 0].real <= 0.4 + 1e-6
    ft.test_close(np.vdot(h, Q @ h).real, 1.0, eps=1e-5)


def test_soc_ball():
    "min c'x over the unit ball is -||c||"
    c = np.array([1.0, -2.0, 2.0])
    prog = ConicProgram()
    prog.add_variable("x", 3, cost=c)
    x = AffineExpr.variable(prog, "x")
    add_constraint(prog, AffineExpr.stack([AffineExpr.constant([1.0], 3), x]), SecondOrder(4))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.primal_objective, -3.0, eps=1e-6)
    ft.test_close(sol.x, -c / 3.0, eps=1e-4)


def test_equality_blocks():
    "min x1 + x2 s.t. x1 = x2, x >= 1"
    prog = ConicProgram()
    prog.add_variable("x", 2, cost=1.0)
    prog.add_block([[1.0, -1.0]], [0.0], Zero(1))
    prog.add_block(-np.eye(2), [-1.0, -1.0], Nonneg(2))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.x, [1.0, 1.0], eps=1e-6)
    ft.test_eq(len(sol.duals), 2)


def test_real_sdp_min_eigenvalue(rng):
    "min tr(C X) s.t. tr(X) = 1, X >= 0 is lambda_min(C)"
    C = rng.standard_normal((3, 3))
    C = C + C.T
    iu = np.triu_indices(3)
    on_diag = iu[0] == iu[1]
    # X is held through its upper triangle, row by row
    prog = ConicProgram()
    prog.add_variable("X", 6, cost=C[iu] * np.where(on_diag, 1.0, 2.0))
    X = AffineExpr.variable(prog, "X")
    add_constraint(prog, AffineExpr(X.coef[on_diag].sum(axis=0, keepdims=True), [-1.0]), Zero(1))
    scale = np.where(on_diag, 1.0, math.sqrt(2.0))
    add_constraint(prog, AffineExpr(X.coef * scale[:, None], np.zeros(6)), Psd(3))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.primal_objective, np.linalg.eigvalsh(C)[0], eps=1e-5)


def test_rank_one_sdp():
    h = np.array([1.0, 1.0]) / math.sqrt(2)
    prog = rank_one_sdp(h, 2.0)
    sol = solve(prog, SolverSettings(check_duality=True))
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.primal_objective, 2.0, eps=1e-5)
    ft.test_close(extract_q(prog, sol), 2.0 * np.outer(h, h), eps=1e-4)


def test_rank_one_sdp_complex(rng):
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    prog = rank_one_sdp(h, 1.5)
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    norm_sq = np.vdot(h, h).real
    ft.test_close(sol.primal_objective, 1.5 / norm_sq, eps=1e-5)
    ft.test_close(extract_q(prog, sol), 1.5 / norm_sq ** 2 * np.outer(h, h.conj()), eps=1e-4)


def test_primal_infeasible():
    "x >= 1 and x <= 0"
    prog = ConicProgram()
    prog.add_variable("x", 1, cost=1.0)
    prog.add_block([[-1.0]], [-1.0], Nonneg(1))
    prog.add_block([[1.0]], [0.0], Nonneg(1))
    sol = solve(prog)
    ft.test_eq(sol.status, SolveStatus.PRIMAL_INFEASIBLE)
    assert sol.info["certificate_margin"] <= math.sqrt(SolverSettings().tol_infeas)
    z = np.concatenate(sol.duals)
    assert np.all(z >= -1e-9)
    ft.test_close(z[0], z[1], eps=1e-6)


def test_dual_infeasible():
    "min x s.t. x <= 0 is unbounded"
    prog = ConicProgram()
    prog.add_variable("x", 1, cost=1.0)
    prog.add_block([[1.0]], [0.0], Nonneg(1))
    ft.test_eq(solve(prog).status, SolveStatus.DUAL_INFEASIBLE)


def test_max_iter():
    sol = solve(rank_one_sdp(np.array([1.0, 0.5]), 2.0), SolverSettings(max_iter=2))
    ft.test_eq(sol.status, SolveStatus.MAX_ITER)
    ft.test_eq(sol.iterations, 2)


def test_deterministic(rng):
    h = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    a, b = solve(rank_one_sdp(h, 1.0)), solve(rank_one_sdp(h, 1.0))
    ft.test_eq(a.x, b.x)
    ft.test_eq(a.iterations, b.iterations)


def test_iteration_log(tmp_path):
    path = tmp_path / "iters.csv"
    sol = solve(scalar_program(), SolverSettings(log_path=str(path)))
    df = pd.read_csv(path)
    ft.test_eq(len(df), sol.iterations + 1)
    for col in ("iter", "pcost", "dcost", "gap", "pres", "dres", "tau", "kappa"):
        assert col in df.columns


def test_info_keys():
    sol = solve(scalar_program())
    for key in ("pres", "dres", "tau", "kappa", "wall_time"):
        assert key in sol.info
    assert sol.info["pres"] <= SolverSettings().tol_feas


def test_empty_program():
    prog = ConicProgram()
    prog.add_variable("x", 1)
    ft.test_fail(lambda: solve(prog), contains="without blocks")


def test_matches_cvxpy(rng):
    cp = pytest.importorskip("cvxpy")
    n, m = 4, 6
    A = rng.standard_normal((m, n))
    b = A @ rng.uniform(-0.5, 0.5, n) + rng.uniform(0.1, 1.0, m)
    c = rng.standard_normal(n)

    prog = ConicProgram()
    prog.add_variable("x", n, cost=c)
    x = AffineExpr.variable(prog, "x")
    add_constraint(prog, AffineExpr(-A, b), Nonneg(m))
    add_constraint(prog, AffineExpr.stack([AffineExpr.constant([2.0], n), x]), SecondOrder(n + 1))
    sol = solve(prog)

    xv = cp.Variable(n)
    ref = cp.Problem(cp.Minimize(c @ xv), [A @ xv <= b, cp.norm(xv) <= 2.0])
    ref.solve()
    ft.test_eq(sol.status, SolveStatus.OPTIMAL)
    ft.test_close(sol.primal_objective, ref.value, eps=1e-4)
