import dataclasses

import numpy as np
import pytest

from lqkernel.errors import PositivityLostError
from lqkernel.linalg import spd_inverse
from lqkernel.model import MatrixSchedule
from lqkernel.ode import DenseSolution
from lqkernel.riccati import (feedback_gain, riccati_pair, riccati_value,
                              solve_adjoint, solve_dual_riccati, solve_riccati)
from lqkernel.solver import solve_kernel


def test_riccati_scalar_closed_form(p1):
    # -J' = -J^2 with J(1) = 1 gives J(t) = 1/(2-t)
    J = solve_riccati(p1, 1000)
    assert J.eval(0.0)[0, 0] == pytest.approx(0.5, abs=1e-8)
    assert J.eval(0.5)[0, 0] == pytest.approx(2.0 / 3.0, abs=1e-8)


def test_riccati_fixed_point(p2):
    J = solve_riccati(p2, 500)
    assert np.max(np.abs(J.values - 1.0)) < 1e-10


def test_riccati_zero_rhs_constant(zero_drive):
    J = solve_riccati(zero_drive, 200)
    assert np.max(np.abs(J.values - zero_drive.J_T)) < 1e-13


def test_dual_riccati_scalar_closed_form(p1):
    M = solve_dual_riccati(p1, 1000)
    assert M.eval(0.0)[0, 0] == pytest.approx(2.0, abs=1e-8)
    assert M.eval(0.25)[0, 0] == pytest.approx(1.75, abs=1e-8)


def test_dual_riccati_fixed_point(p2):
    M = solve_dual_riccati(p2, 500)
    assert np.max(np.abs(M.values - 1.0)) < 1e-10


def test_dual_riccati_zero_rhs(zero_drive):
    M = solve_dual_riccati(zero_drive, 200)
    assert np.max(np.abs(M.values - spd_inverse(zero_drive.J_T))) < 1e-13


def test_terminal_conditions_exact(p1):
    rs = riccati_pair(p1, 300)
    assert np.array_equal(rs.J.values[-1], p1.J_T)
    assert np.array_equal(rs.M.values[-1], spd_inverse(p1.J_T))


def test_solutions_symmetric_and_positive(random_problems):
    for p in random_problems[:3]:
        rs = riccati_pair(p, 800)
        for sol in (rs.J, rs.M):
            vals = sol.values
            assert np.max(np.abs(vals - np.swapaxes(vals, 1, 2))) < 1e-9
            assert np.min(np.linalg.eigvalsh(vals)[:, 0]) > 0
        assert rs.max_asymmetry_J >= 0.0


def test_duality_along_grid(p1, p2, dint, random_problems):
    for p in [p1, p2, dint] + list(random_problems[:2]):
        rs = riccati_pair(p, 1500)
        assert rs.duality_defects().max() < 1e-6


def test_feedback_gain_values(p1, p2, zero_drive):
    J1 = solve_riccati(p1, 500)
    assert feedback_gain(p1, J1.eval(0.0), 0.0)[0, 0] == pytest.approx(-0.5, abs=1e-8)
    J2 = solve_riccati(p2, 500)
    assert feedback_gain(p2, J2.eval(0.3), 0.3)[0, 0] == pytest.approx(-1.0, abs=1e-9)
    Jz = solve_riccati(zero_drive, 100)
    assert np.array_equal(feedback_gain(zero_drive, Jz.eval(0.5), 0.5), np.zeros((1, 2)))


def test_riccati_value_examples(p1, p2):
    J1 = solve_riccati(p1, 800)
    assert riccati_value(J1, 0.0, [1.0]) == pytest.approx(0.5, abs=1e-8)
    J2 = solve_riccati(p2, 400)
    assert riccati_value(J2, 0.0, [2.0]) == pytest.approx(4.0, abs=1e-9)
    assert riccati_value(J1, 0.0, [0.0]) == 0.0


def test_adjoint_constant_costate(p1):
    # optimal trajectory from x0 = 1 is (2-s)/2; A = Q = 0 keeps p constant
    ts = np.linspace(0.0, 1.0, 201)
    xbar = DenseSolution.from_nodes(ts, ((2 - ts) / 2)[:, None], np.full((201, 1), -0.5))
    p = solve_adjoint(p1, xbar, 400)
    assert np.max(np.abs(p.values + 0.5)) < 1e-12


def test_adjoint_exponential_costate(p2):
    ts = np.linspace(0.0, 1.0, 301)
    xbar = DenseSolution.from_nodes(ts, np.exp(-ts)[:, None], -np.exp(-ts)[:, None])
    p = solve_adjoint(p2, xbar, 600)
    expected = -np.exp(-p.times)[:, None]
    assert np.max(np.abs(p.values - expected)) < 1e-8


def test_adjoint_zero_state(p2):
    ts = np.linspace(0.0, 1.0, 51)
    xbar = DenseSolution.from_nodes(ts, np.zeros((51, 1)), np.zeros((51, 1)))
    p = solve_adjoint(p2, xbar, 200)
    assert np.max(np.abs(p.values)) == 0.0


def test_costate_is_negative_hessian_times_state(dint, random_problems):
    # p(t) = -J(t) xbar(t) along the optimal trajectory
    for p in [dint, random_problems[0]]:
        res = solve_kernel(p, np.ones(p.state_dim), 1200)
        J = solve_riccati(p, 1200)
        pa = solve_adjoint(p, res.trajectory.x, 1200)
        resid = pa.values + np.einsum(
            "kij,kj->ki", J.eval_many(pa.times), res.trajectory.x.eval_many(pa.times))
        scale = 1.0 + np.linalg.norm(np.ones(p.state_dim))
        assert np.max(np.linalg.norm(resid, axis=1)) < 1e-6 * scale


def test_value_monotone_in_state_cost(random_problems):
    for p in random_problems[:2]:
        bumped = dataclasses.replace(p, Q=_bump(p.Q, 0.1))
        x0 = np.ones(p.state_dim)
        v0 = riccati_value(solve_riccati(p, 800), p.t0, x0)
        v1 = riccati_value(solve_riccati(bumped, 800), p.t0, x0)
        assert v1 >= v0 - 1e-10


def _bump(Q: MatrixSchedule, eps: float) -> MatrixSchedule:
    eye = np.eye(Q.rows)
    mats = Q.matrices + (eps * eye if Q.kind != "poly" else 0.0)
    if Q.kind == "poly":
        mats = Q.matrices.copy()
        mats[0] = mats[0] + eps * eye
    return MatrixSchedule(Q.kind, Q.rows, Q.cols, mats, Q.knots, Q.origin)


def test_positivity_loss_detected():
    # J' = J^2 + 1.2 crosses zero near t = 0.325 without leaving float range
    c = MatrixSchedule.constant
    from lqkernel.model import LQProblem
    bad = LQProblem(1, 1, 0.0, 1.0, c([[0.0]]), c([[1.0]]),
                    c([[-1.2]]), c([[1.0]]), [[1.0]])
    with pytest.raises(PositivityLostError) as exc:
        solve_riccati(bad, 400)
    assert exc.value.time == pytest.approx(0.3247, abs=0.02)
