"""High-level LQ solves: kernel route, feedback route, and rendezvous points.

The kernel route encodes the whole optimal trajectory in one covector:
p0 = K(t0, t0)^(-) x0 and xbar(s) = K(s, t0) p0, with value p0' x0.  The
feedback route rolls the closed loop forward with the Riccati gain.  The
multipoint solve pins the trajectory at several times and solves the block
Gram system for one covector per pinned time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProblemError, InfeasibleInterpolationError
from .kernel import (DEFAULT_QUAD_INTERVALS, KernelOperator, lq_inner_product,
                     minimal_control)
from .linalg import pinv_svd, sym_eig_pinv
from .model import ControlledTrajectory, LQProblem
from .ode import DEFAULT_STEPS, DenseSolution, build_grid, combine_solutions
from .riccati import closed_loop_propagator, gain_many, riccati_pair


@dataclass(frozen=True)
class LQSolveResult:
    """Outcome of one solve: covectors with their times, trajectory, value."""

    covectors: tuple[tuple[float, np.ndarray], ...]
    trajectory: ControlledTrajectory
    value: float
    method: str


def recover_control(problem: LQProblem, x: DenseSolution,
                    steps: int | None = None) -> DenseSolution:
    """Minimal-R-norm control u = B^(-) [x' - A x] along x's grid.

    With `steps` given, x is first resampled onto a uniform grid of that many
    intervals (its jump nodes and the schedule breakpoints kept as nodes).
    """
    if steps is not None:
        snap = np.concatenate([x.jump_nodes(), problem.breakpoints()])
        ts = build_grid(x.a, x.b, steps, snap)
        lo, hi = ts[:-1], ts[1:]
        x = DenseSolution(ts, x.eval_many(lo, 1), x.eval_many(hi, -1),
                          x.deriv_many(lo, 1), x.deriv_many(hi, -1))
    return minimal_control(problem, x)


def evaluate_cost(problem: LQProblem, traj: ControlledTrajectory,
                  quad_intervals: int = DEFAULT_QUAD_INTERVALS) -> float:
    """The LQ objective of a controlled trajectory (its squared kernel norm)."""
    return lq_inner_product(problem, traj, traj, quad_intervals)


def solve_kernel(problem: LQProblem, x0, steps: int = DEFAULT_STEPS,
                 operator: KernelOperator | None = None) -> LQSolveResult:
    """Optimal trajectory via the kernel representer: xbar = K(., t0) p0."""
    x0 = np.asarray(x0, dtype=float)
    op = operator if operator is not None else KernelOperator(problem, steps)
    K00 = op.diagonal(problem.t0)
    p0 = sym_eig_pinv(K00, clip_tol=1e-10) @ x0
    x = op.column_solution().right_multiply(p0)
    start_err = np.linalg.norm(x.eval(problem.t0) - x0)
    if start_err > 1e-8 * (1.0 + np.linalg.norm(x0)):
        raise DegenerateProblemError(
            f"kernel diagonal numerically singular: reproduced initial state "
            f"off by {start_err:.3e}")
    u = minimal_control(problem, x)
    value = float(p0 @ x0)
    return LQSolveResult(((problem.t0, p0),), ControlledTrajectory(x, u),
                         value, "kernel")


def solve_feedback(problem: LQProblem, x0, steps: int = DEFAULT_STEPS,
                   operator: KernelOperator | None = None) -> LQSolveResult:
    """Optimal trajectory by rolling out x' = (A + B G) x with the Riccati gain."""
    x0 = np.asarray(x0, dtype=float)
    if operator is not None:
        J, grid = operator.riccati.J, operator.grid
    else:
        J = riccati_pair(problem, steps).J
        grid = build_grid(problem.t0, problem.T, steps, problem.breakpoints())
    x = closed_loop_propagator(problem, J, grid).right_multiply(x0)
    lo, hi = x.times[:-1], x.times[1:]
    u_start = np.einsum("kij,kj->ki", gain_many(problem, J, lo, 1), x.v_start)
    u_end = np.einsum("kij,kj->ki", gain_many(problem, J, hi, -1), x.v_end)
    h = (hi - lo)[:, None]
    slope = (u_end - u_start) / h
    u = DenseSolution(x.times, u_start, u_end, slope, slope)
    value = float(x0 @ J.eval(problem.t0) @ x0)
    return LQSolveResult(((problem.t0, J.eval(problem.t0) @ x0),),
                         ControlledTrajectory(x, u), value, "feedback")


def solve_multipoint(problem: LQProblem, constraints, steps: int = DEFAULT_STEPS,
                     operator: KernelOperator | None = None) -> LQSolveResult:
    """Minimal-norm trajectory through rendezvous points x(t_i) = c_i.

    Solves the block Gram system via SVD pseudoinverse, so nearly coincident
    times degrade gracefully; genuinely inconsistent constraints raise.
    """
    times = np.asarray([t for t, _ in constraints], dtype=float)
    targets = [np.asarray(c, dtype=float) for _, c in constraints]
    if times.size == 0:
        raise ValueError("need at least one constraint")
    if np.any(np.diff(times) <= 0):
        raise ValueError("constraint times must be sorted and distinct")
    span = max(1.0, problem.T - problem.t0)
    if times[0] < problem.t0 - 1e-12 * span or times[-1] > problem.T + 1e-12 * span:
        raise ValueError("constraint times must lie in the horizon")

    op = operator if operator is not None else KernelOperator(
        problem, steps, extra_nodes=times)
    gram, _ = op.gram(times)
    n = problem.state_dim
    c = np.concatenate(targets)
    pvec = pinv_svd(gram) @ c
    resid = np.linalg.norm(gram @ pvec - c)
    if resid > 1e-6 * (1.0 + np.linalg.norm(c)):
        raise InfeasibleInterpolationError(
            f"constraints inconsistent with the Gram range (residual {resid:.3e})")
    covecs = tuple((float(t), pvec[i * n:(i + 1) * n]) for i, t in enumerate(times))
    x = combine_solutions([
        (1.0, op.section(float(t)).right_multiply(p)) for t, p in covecs
    ])
    for t, target in zip(times, targets):
        err = np.linalg.norm(x.eval(float(t)) - target)
        if err > 1e-6 * (1.0 + np.linalg.norm(target)):
            raise InfeasibleInterpolationError(
                f"interpolation condition at t={t} violated by {err:.3e}")
    u = minimal_control(problem, x)
    value = float(pvec @ c)
    return LQSolveResult(covecs, ControlledTrajectory(x, u), value, "multipoint")
