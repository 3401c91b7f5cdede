"""The matrix-valued reproducing kernel of the controlled-trajectory space.

The space of controlled trajectories of x' = A x + B u on [t0, T], equipped
with the cost inner product

    <x1, x2> = x1(T)' J_T x2(T) + int [x1' Q x2 + u1' R u2] dt,

is a vector-valued RKHS.  Its kernel K(s, t) is computed three ways, each
matched to its use:

* diagonal K(t, t): the dual Riccati solution of the problem restarted at t
  (this equality is the headline identity the test suite certifies);
* first column K(., t0): closed-loop propagation of K(t0, t0), since
  K(., t0) p is the optimal trajectory from x0 = K(t0, t0) p;
* arbitrary K(., t): a linear two-point boundary value problem in the pair
  (K(., t), Pi(., t)) with a forcing term that switches branches at s = t,
  solved by single shooting on the unknown initial block K(t0, t).

The switch time is inserted as a grid node, and the branch for s >= t is
applied on the closed interval [t, T]; stage evaluations use one-sided
limits so the integrator keeps full order across the switch.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import (BvpDegenerateError, HorizonMismatchError,
                     SingularMatrixError)
from .linalg import spd_inverse
from .model import ControlledTrajectory, LQProblem
from .ode import (DEFAULT_STEPS, DenseSolution, affine_stagefn, build_grid,
                  rk4_drive, schedule_stage_table)
from .riccati import closed_loop_propagator, riccati_pair, solve_dual_riccati

DEFAULT_QUAD_INTERVALS = 2000

_SHOOTING_RCOND = 1e-12


class KernelOperator:
    """Kernel evaluator for one problem: diagonal, columns, entries, Grams.

    Construction fixes the integration grid (`steps` uniform intervals plus
    schedule breakpoints and any `extra_nodes`).  Riccati solutions, the
    closed-loop propagator, the adjoint propagator and per-column-time BVP
    solutions are computed lazily and cached; the operator is logically
    immutable and evaluations are pure.
    """

    def __init__(self, problem: LQProblem, steps: int = DEFAULT_STEPS,
                 extra_nodes=(), shooting_rcond: float = _SHOOTING_RCOND):
        self.problem = problem
        self.steps = int(steps)
        self.shooting_rcond = float(shooting_rcond)
        self._snap = np.concatenate([problem.breakpoints(),
                                     np.asarray(extra_nodes, dtype=float)])
        self.grid = build_grid(problem.t0, problem.T, self.steps, self._snap)
        self._riccati = None
        self._theta0 = None          # Phi_A(t0, .)^T on the grid
        self._closed_loop = None     # Phi_{A+BG}(., t0) on the grid
        self._sections: dict[float, DenseSolution] = {}
        self._diagonals: dict[float, np.ndarray] = {}

    # -- cached building blocks -------------------------------------------

    @property
    def riccati(self):
        if self._riccati is None:
            self._riccati = riccati_pair(self.problem, self.steps)
        return self._riccati

    def _theta0_solution(self) -> DenseSolution:
        """Theta0(s) = Phi_A(t0, s)^T, solving Theta' = -A(s)' Theta, Theta(t0) = I."""
        if self._theta0 is None:
            sched = self.problem.A.transposed_negated()
            table = schedule_stage_table(sched, self.grid)
            eye = np.eye(self.problem.state_dim)
            self._theta0 = rk4_drive(affine_stagefn(table), self.grid, eye)
        return self._theta0

    def closed_loop_solution(self) -> DenseSolution:
        """Propagator of x' = (A + B G) x anchored at t0."""
        if self._closed_loop is None:
            self._closed_loop = closed_loop_propagator(
                self.problem, self.riccati.J, self.grid)
        return self._closed_loop

    # -- kernel values ------------------------------------------------------

    def diagonal(self, t_query: float) -> np.ndarray:
        """K(t, t) of the space restarted at t: the dual Riccati value there."""
        p = self.problem
        span = max(1.0, p.T - p.t0)
        key = float(t_query)
        if key not in self._diagonals:
            if abs(t_query - p.T) <= 1e-12 * span:
                val = spd_inverse(p.J_T)
            elif abs(t_query - p.t0) <= 1e-12 * span:
                val = self.riccati.M.eval(p.t0)
            else:
                sub = dataclasses.replace(p, t0=float(t_query))
                val = solve_dual_riccati(sub, self.steps).eval(float(t_query))
            self._diagonals[key] = val
        return self._diagonals[key]

    def column_solution(self) -> DenseSolution:
        """K(., t0) = Phi_cl(., t0) K(t0, t0) as a dense matrix solution."""
        M0 = self.riccati.M.eval(self.problem.t0)
        return self.closed_loop_solution().right_multiply(M0)

    def section(self, t: float) -> DenseSolution:
        """Dense K(., t) for a fixed second argument, via the shooting BVP."""
        key = float(t)
        if key not in self._sections:
            self._sections[key] = self._solve_section(key)
        return self._sections[key]

    def entry(self, s: float, t: float) -> np.ndarray:
        """K(s, t) for arbitrary s, t in the horizon."""
        return self.section(t).eval(s)

    def gram(self, times) -> tuple[np.ndarray, float]:
        """Block Gram matrix at `times`, symmetrized; returns (matrix, defect).

        Block (i, j) is K(t_i, t_j); one BVP is solved per column time and all
        rows are read off its dense solution.  The reported defect is the
        worst entry moved by the final (G + G')/2 projection.
        """
        times = np.asarray(times, dtype=float)
        n = self.problem.state_dim
        k = times.size
        raw = np.zeros((k * n, k * n))
        for j, tj in enumerate(times):
            sec = self.section(float(tj))
            for i, ti in enumerate(times):
                raw[i * n:(i + 1) * n, j * n:(j + 1) * n] = sec.eval(float(ti))
        defect = float(np.max(np.abs(raw - raw.T)))
        return 0.5 * (raw + raw.T), defect

    # -- the boundary value problem ----------------------------------------

    def _solve_section(self, t: float) -> DenseSolution:
        p = self.problem
        n = p.state_dim
        span = max(1.0, p.T - p.t0)
        if not (p.t0 - 1e-12 * span <= t <= p.T + 1e-12 * span):
            raise HorizonMismatchError(f"column time {t} outside [{p.t0}, {p.T}]")
        t = min(max(t, p.t0), p.T)

        grid = build_grid(p.t0, p.T, self.steps,
                          np.concatenate([self._snap, [t]]))
        lo_t, hi_t = grid[:-1], grid[1:]
        mid_t = 0.5 * (lo_t + hi_t)

        A_tab = schedule_stage_table(p.A, grid)
        B_tab = schedule_stage_table(p.B, grid)
        R_tab = schedule_stage_table(p.R, grid)
        Q_tab = schedule_stage_table(p.Q, grid)
        S_tab = tuple(B @ np.linalg.inv(R) @ np.swapaxes(B, 1, 2)
                      for B, R in zip(B_tab, R_tab))
        AT_tab = tuple(np.swapaxes(A, 1, 2) for A in A_tab)

        theta0 = self._theta0_solution()
        th_tab = (theta0.eval_many(lo_t, 1), theta0.eval_many(mid_t, 1),
                  theta0.eval_many(hi_t, -1))
        D_t = np.linalg.inv(theta0.eval(t))
        tol = 1e-12 * span
        # branch indicator: the s >= t forcing applies on the closed interval [t, T]
        ind = (lo_t >= t - tol, mid_t > t, hi_t > t + tol)
        F_tab = tuple(
            S @ (th - flags[:, None, None] * (th @ D_t))
            for S, th, flags in zip(S_tab, th_tab, ind)
        )

        def stagefn(k, slot, tau, Z):
            ZK, ZP = Z[:n], Z[n:]
            top = A_tab[slot][k] @ ZK + S_tab[slot][k] @ ZP
            top[:, n:] += F_tab[slot][k]
            bot = Q_tab[slot][k] @ ZK - AT_tab[slot][k] @ ZP
            return np.concatenate([top, bot], axis=0)

        # carrier: first n columns homogeneous from [I; 0], last n columns the
        # forced particular solution from [0; -I]
        Z0 = np.zeros((2 * n, 2 * n))
        Z0[:n, :n] = np.eye(n)
        Z0[n:, n:] = -np.eye(n)
        carrier = rk4_drive(stagefn, grid, Z0)

        ZT = carrier.eval(p.T, side=-1)
        J_T = np.asarray(p.J_T)
        E = J_T @ ZT[:n, :n] + ZT[n:, :n]
        theta_T = theta0.eval(p.T, side=-1)
        C_T = theta_T @ D_t - theta_T
        rhs = C_T - J_T @ ZT[:n, n:] - ZT[n:, n:]
        sv = np.linalg.svd(E, compute_uv=False)
        if sv[-1] <= self.shooting_rcond * sv[0]:
            raise BvpDegenerateError(
                f"shooting system singular for column time {t} "
                f"(singular values {sv[0]:.3e} .. {sv[-1]:.3e})")
        X = np.linalg.solve(E, rhs)

        ext = np.vstack([X, np.eye(n)])  # K(sigma) = Zh_K X + W_K, per interval
        return DenseSolution(
            grid,
            carrier.v_start[:, :n] @ ext, carrier.v_end[:, :n] @ ext,
            carrier.d_start[:, :n] @ ext, carrier.d_end[:, :n] @ ext,
        )


# -- module-level operations (one-shot wrappers) -----------------------------

def kernel_diagonal(problem: LQProblem, t0_query: float,
                    steps: int = DEFAULT_STEPS) -> np.ndarray:
    """K(t, t) at t = t0_query: the dual Riccati solution on [t0_query, T].

    t0_query may precede the problem's own start when the schedules extend
    that far; it must not exceed T.
    """
    p = problem
    span = max(1.0, p.T - p.t0)
    if t0_query > p.T + 1e-12 * span:
        raise HorizonMismatchError(f"query time {t0_query} exceeds T={p.T}")
    if abs(t0_query - p.T) <= 1e-12 * span:
        return spd_inverse(p.J_T)
    sub = dataclasses.replace(p, t0=float(t0_query))
    return solve_dual_riccati(sub, steps).eval(float(t0_query))


def kernel_column(problem: LQProblem, steps: int = DEFAULT_STEPS) -> DenseSolution:
    """Dense K(., t0); K(s, t0) p is the optimal trajectory from K(t0, t0) p."""
    return KernelOperator(problem, steps).column_solution()


def kernel_full(problem: LQProblem, s: float, t: float,
                steps: int = DEFAULT_STEPS) -> np.ndarray:
    """K(s, t) for arbitrary argument pair, via the shooting BVP at t."""
    return KernelOperator(problem, steps).entry(s, t)


def gram_matrix(problem: LQProblem, times, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Symmetrized block Gram matrix [K(t_i, t_j)]_{ij} at the given times."""
    gram, _ = KernelOperator(problem, steps, extra_nodes=times).gram(times)
    return gram


def minimal_control(problem: LQProblem, x: DenseSolution,
                    rank_tol: float = 1e-12) -> DenseSolution:
    """Minimal-R-norm control generating x: u = B^(-) [x' - A x] nodewise.

    Evaluated on both sides of every node of x's grid, so controls of kinked
    trajectories keep their jumps; interior interpolation is the chord.
    """
    ts = x.times
    lo, hi = ts[:-1], ts[1:]
    out = []
    for sub, side, xv, xd in (
        (lo, 1, x.v_start, x.d_start),
        (hi, -1, x.v_end, x.d_end),
    ):
        B = problem.B.eval_many(sub, side)
        R = problem.R.eval_many(sub, side)
        A = problem.A.eval_many(sub, side)
        w, V = np.linalg.eigh(0.5 * (R + np.swapaxes(R, 1, 2)))
        if np.min(w) <= 0.0:
            k = int(np.argmin(w[:, 0]))
            raise SingularMatrixError(
                f"R not positive definite at t={float(sub[k])}",
                min_eigenvalue=float(w[k, 0]))
        Rm12 = (V / np.sqrt(w)[:, None, :]) @ np.swapaxes(V, 1, 2)
        pinv = np.linalg.pinv(B @ Rm12, rcond=rank_tol)
        resid = xd - np.einsum("kij,k...j->k...i", A, xv)
        u = np.einsum("kij,kjl,k...l->k...i", Rm12, pinv, resid)
        out.append(u)
    u_start, u_end = out
    h = (hi - lo).reshape((-1,) + (1,) * (u_start.ndim - 1))
    slope = (u_end - u_start) / h
    return DenseSolution(ts, u_start, u_end, slope, slope)


def _simpson_points(problem: LQProblem, extra_breaks, quad_intervals: int):
    """Simpson nodes over the horizon: (times, sides, weights).

    Each subinterval of the uniform quadrature grid (with schedule breakpoints
    and the supplied jump times inserted) contributes its endpoints, evaluated
    one-sidedly toward the interval interior, and its midpoint.
    """
    snap = np.concatenate([problem.breakpoints(), np.asarray(extra_breaks, dtype=float)])
    edges = build_grid(problem.t0, problem.T, quad_intervals, snap)
    lo, hi = edges[:-1], edges[1:]
    h = hi - lo
    ts = np.concatenate([lo, 0.5 * (lo + hi), hi])
    sides = np.concatenate([np.ones_like(lo), np.ones_like(lo), -np.ones_like(hi)])
    weights = np.concatenate([h / 6.0, 4.0 * h / 6.0, h / 6.0])
    return ts, sides, weights


def lq_inner_product(problem: LQProblem, traj1: ControlledTrajectory,
                     traj2: ControlledTrajectory,
                     quad_intervals: int = DEFAULT_QUAD_INTERVALS) -> float:
    """Cost inner product <x1, x2> by composite Simpson quadrature.

    Control jump times of either trajectory and schedule breakpoints are
    inserted as quadrature breakpoints, so the integrand is smooth on every
    Simpson subinterval.
    """
    span = max(1.0, problem.T - problem.t0)
    for tr in (traj1, traj2):
        if abs(tr.x.a - problem.t0) > 1e-9 * span or abs(tr.x.b - problem.T) > 1e-9 * span:
            raise HorizonMismatchError(
                f"trajectory on [{tr.x.a}, {tr.x.b}] does not match horizon "
                f"[{problem.t0}, {problem.T}]")
    breaks = np.concatenate([traj1.u.jump_nodes(), traj2.u.jump_nodes()])
    ts, sides, w = _simpson_points(problem, breaks, quad_intervals)
    x1 = traj1.x.eval_many(ts, sides)
    x2 = traj2.x.eval_many(ts, sides)
    u1 = traj1.u.eval_many(ts, sides)
    u2 = traj2.u.eval_many(ts, sides)
    Q = problem.Q.eval_many(ts, sides)
    R = problem.R.eval_many(ts, sides)
    stage = np.einsum("ki,kij,kj->k", x1, Q, x2) + np.einsum("ki,kij,kj->k", u1, R, u2)
    integral = float(w @ stage)
    xT1 = traj1.x.eval(problem.T, side=-1)
    xT2 = traj2.x.eval(problem.T, side=-1)
    return float(xT1 @ np.asarray(problem.J_T) @ xT2) + integral


def kernel_section_trajectory(problem: LQProblem, operator: KernelOperator,
                              t: float, pvec: np.ndarray) -> ControlledTrajectory:
    """The kernel section K(., t) p as a controlled trajectory.

    The control is recovered by the weighted pseudoinverse formula and is
    genuinely discontinuous at s = t; that node is stored two-sidedly.
    """
    pvec = np.asarray(pvec, dtype=float)
    x = operator.section(t).right_multiply(pvec)
    u = minimal_control(problem, x)
    return ControlledTrajectory(x, u)


def reproducing_residual(problem: LQProblem, traj: ControlledTrajectory,
                         t: float, pvec: np.ndarray,
                         steps: int = DEFAULT_STEPS,
                         quad_intervals: int = DEFAULT_QUAD_INTERVALS,
                         operator: KernelOperator | None = None) -> float:
    """| p' x(t) - <x, K(., t) p> |, the defect of the reproducing property."""
    pvec = np.asarray(pvec, dtype=float)
    if operator is None:
        operator = KernelOperator(problem, steps)
    section = kernel_section_trajectory(problem, operator, t, pvec)
    lhs = float(pvec @ traj.x.eval(t))
    rhs = lq_inner_product(problem, traj, section, quad_intervals)
    return abs(lhs - rhs)
