"""Fixed-step RK4 integration of matrix/vector ODEs with dense output.

Design notes:

* Grids are uniform except that caller-supplied breakpoints (schedule jumps,
  kernel-forcing switch times) are inserted as nodes, so every RK4 step sees
  a smooth right-hand side.  Stage evaluations at interval endpoints carry a
  one-sided limit flag: the stage at the *left* end of an interval uses the
  right limit of any discontinuous coefficient, the stage at the *right* end
  uses the left limit.  This keeps the classical 4th-order accuracy across
  breakpoints instead of degrading to O(h).

* Dense output is cubic Hermite per interval, built from the stored value and
  right-hand side at both interval ends.  Values and derivatives are stored
  per interval (not per node) so a genuine jump at a node keeps both one-sided
  values; evaluation takes an optional `side` argument.

* Backward integration (a > b) runs directly with a negative step; the stored
  solution is always re-oriented so `times` is increasing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, IntegrationBlowupError

DEFAULT_STEPS = 4000

_NODE_TOL_REL = 1e-12


def build_grid(lo: float, hi: float, steps: int, snap: Sequence[float] = ()) -> np.ndarray:
    """Increasing grid: `steps` uniform intervals on [lo, hi] plus snapped nodes.

    Interior `snap` times become grid nodes; uniform nodes closer than a
    quarter step to a snapped node are dropped so interval lengths stay
    bounded below.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not hi > lo:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    ts = np.linspace(lo, hi, steps + 1)
    span = hi - lo
    snap = np.asarray(sorted(set(float(s) for s in snap)), dtype=float)
    snap = snap[(snap > lo + 1e-12 * span) & (snap < hi - 1e-12 * span)]
    if snap.size == 0:
        return ts
    h = span / steps
    near = np.min(np.abs(ts[:, None] - snap[None, :]), axis=1)
    keep = (near >= 0.25 * h) | (np.arange(ts.size) == 0) | (np.arange(ts.size) == steps)
    out = np.unique(np.concatenate([ts[keep], snap]))
    return out


@dataclass(frozen=True)
class DenseSolution:
    """A sampled function of time with cubic-Hermite interpolation.

    Data is stored per interval: `v_start[k]`, `v_end[k]` are the one-sided
    values at the ends of [times[k], times[k+1]], `d_start`/`d_end` the
    one-sided time derivatives.  For continuous solutions v_end[k-1] equals
    v_start[k]; controls recovered from kinked trajectories may genuinely
    jump there.
    """

    times: np.ndarray
    v_start: np.ndarray
    v_end: np.ndarray
    d_start: np.ndarray
    d_end: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must hold at least two points")
        if not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        n = times.size - 1
        arrays = {}
        for name in ("v_start", "v_end", "d_start", "d_end"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape[0] != n:
                raise ValueError(f"{name} must have one entry per interval")
            arrays[name] = arr
        times = times.copy()
        times.flags.writeable = False
        object.__setattr__(self, "times", times)
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_nodes(cls, times, values, derivs) -> "DenseSolution":
        """Build from per-node values/derivatives of a continuous function."""
        values = np.asarray(values, dtype=float)
        derivs = np.asarray(derivs, dtype=float)
        return cls(times, values[:-1], values[1:], derivs[:-1], derivs[1:])

    # -- basic queries -----------------------------------------------------

    @property
    def a(self) -> float:
        return float(self.times[0])

    @property
    def b(self) -> float:
        return float(self.times[-1])

    @property
    def value_shape(self) -> tuple:
        return self.v_start.shape[1:]

    @property
    def values(self) -> np.ndarray:
        """Per-node values (right-continuous representative at jumps)."""
        return np.concatenate([self.v_start, self.v_end[-1:]], axis=0)

    def jump_nodes(self, rtol: float = 1e-9) -> np.ndarray:
        """Interior node times where the stored one-sided values disagree."""
        if self.times.size < 3:
            return np.zeros(0)
        gap = self.v_end[:-1] - self.v_start[1:]
        scale = 1.0 + np.max(np.abs(self.v_start))
        mask = np.max(np.abs(gap), axis=tuple(range(1, gap.ndim))) > rtol * scale
        return self.times[1:-1][mask]

    # -- evaluation --------------------------------------------------------

    def _locate(self, ts: np.ndarray) -> np.ndarray:
        a, b = self.times[0], self.times[-1]
        slack = 1e-12 * max(1.0, b - a)
        if np.any(ts < a - slack) or np.any(ts > b + slack):
            bad = ts[(ts < a - slack) | (ts > b + slack)]
            raise DomainError(f"time {float(np.ravel(bad)[0])} outside [{a}, {b}]")
        return np.clip(ts, a, b)

    def _interp(self, ts, sides, want_deriv: bool) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        sides = np.broadcast_to(np.asarray(sides), ts.shape)
        ts = self._locate(ts)
        times = self.times
        n = times.size - 1
        k = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, n - 1)
        h = times[k + 1] - times[k]
        th = (ts - times[k]) / h
        ex = (1,) * self.v_start.ndim  # broadcast scalars over value dims
        th = th.reshape(th.shape + ex[1:])
        hh = h.reshape(th.shape)
        if not want_deriv:
            h00 = (1.0 + 2.0 * th) * (1.0 - th) ** 2
            h10 = th * (1.0 - th) ** 2
            h01 = th * th * (3.0 - 2.0 * th)
            h11 = th * th * (th - 1.0)
            out = (h00 * self.v_start[k] + (h10 * hh) * self.d_start[k]
                   + h01 * self.v_end[k] + (h11 * hh) * self.d_end[k])
        else:
            g00 = 6.0 * th * (th - 1.0) / hh
            g10 = (3.0 * th - 1.0) * (th - 1.0)
            g01 = -6.0 * th * (th - 1.0) / hh
            g11 = th * (3.0 * th - 2.0)
            out = (g00 * self.v_start[k] + g10 * self.d_start[k]
                   + g01 * self.v_end[k] + g11 * self.d_end[k])
        # snap to stored one-sided data at nodes
        tol = _NODE_TOL_REL * max(1.0, times[-1] - times[0])
        vs, ve = (self.d_start, self.d_end) if want_deriv else (self.v_start, self.v_end)
        at_left = np.nonzero(np.abs(ts - times[k]) <= tol)[0]
        if at_left.size:
            use_start = (sides[at_left] >= 0) | (k[at_left] == 0)
            ri = at_left[use_start]
            out[ri] = vs[k[ri]]
            li = at_left[~use_start]
            out[li] = ve[k[li] - 1]
        at_right = np.nonzero(np.abs(times[k + 1] - ts) <= tol)[0]
        if at_right.size:
            use_start = (sides[at_right] >= 0) & (k[at_right] + 1 < n)
            ri = at_right[use_start]
            out[ri] = vs[k[ri] + 1]
            li = at_right[~use_start]
            out[li] = ve[k[li]]
        return out

    def eval_many(self, ts, sides=1) -> np.ndarray:
        """Vectorized evaluation; `sides` scalar or per-time (+1 right, -1 left)."""
        return self._interp(ts, sides, want_deriv=False)

    def eval(self, t: float, side: int = 1) -> np.ndarray:
        """Value at time t; exact at grid nodes."""
        return self._interp(np.asarray([t], dtype=float), side, want_deriv=False)[0]

    def deriv_many(self, ts, sides=1) -> np.ndarray:
        return self._interp(ts, sides, want_deriv=True)

    def deriv(self, t: float, side: int = 1) -> np.ndarray:
        return self._interp(np.asarray([t], dtype=float), side, want_deriv=True)[0]

    # -- algebra -----------------------------------------------------------

    def right_multiply(self, other: np.ndarray) -> "DenseSolution":
        """Pointwise product value(t) @ other (matrix or vector)."""
        return DenseSolution(
            self.times,
            self.v_start @ other, self.v_end @ other,
            self.d_start @ other, self.d_end @ other,
        )


def dense_eval(solution: DenseSolution, t: float) -> np.ndarray:
    """Cubic-Hermite evaluation of `solution` at time t (exact at nodes)."""
    return solution.eval(t)


def combine_solutions(parts: Sequence[tuple[float, DenseSolution]]) -> DenseSolution:
    """Linear combination sum_i c_i * s_i(t) on the union of all grids.

    One-sided values at every union node are preserved, so jumps of the
    parts survive in the combination.
    """
    if not parts:
        raise ValueError("nothing to combine")
    sols = [s for _, s in parts]
    a, b = sols[0].a, sols[0].b
    span = max(1.0, b - a)
    for s in sols[1:]:
        if abs(s.a - a) > 1e-9 * span or abs(s.b - b) > 1e-9 * span:
            raise DomainError("solutions cover different horizons")
    times = np.unique(np.concatenate([s.times for s in sols]))
    # merge nodes identical up to roundoff
    keep = np.ones(times.size, dtype=bool)
    keep[1:] = np.diff(times) > _NODE_TOL_REL * span
    times = times[keep]
    lo, hi = times[:-1], times[1:]
    acc = [np.zeros(1)] * 4
    first = True
    for c, s in parts:
        data = (s.eval_many(lo, +1), s.eval_many(hi, -1),
                s.deriv_many(lo, +1), s.deriv_many(hi, -1))
        if first:
            acc = [c * d for d in data]
            first = False
        else:
            acc = [aa + c * d for aa, d in zip(acc, data)]
    return DenseSolution(times, acc[0], acc[1], acc[2], acc[3])


# -- RK4 driver -------------------------------------------------------------

#: stage slots: 0 = left end of interval (right limit), 1 = midpoint,
#: 2 = right end of interval (left limit)
StageFn = Callable[[int, int, float, np.ndarray], np.ndarray]


def rk4_drive(
    stagefn: StageFn,
    grid: np.ndarray,
    y0: np.ndarray,
    backward: bool = False,
    post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
) -> DenseSolution:
    """Classical RK4 over `grid` (increasing); y0 sits at grid[-1] if backward.

    `stagefn(k, slot, t, Y)` returns the right-hand side for interval k at the
    given stage; the slot tells side-sensitive coefficients which one-sided
    limit to use.  `post_step` (e.g. re-symmetrization) maps each accepted
    value; stored node derivatives are evaluated at the mapped values.
    """
    grid = np.asarray(grid, dtype=float)
    n = grid.size - 1
    y0 = np.asarray(y0, dtype=float)
    vals = [None] * (n + 1)
    d_lo = [None] * n
    d_hi = [None] * n

    order = range(n) if not backward else range(n - 1, -1, -1)
    y = y0
    vals[n if backward else 0] = y
    for k in order:
        ta, tb = grid[k], grid[k + 1]
        if backward:
            t_from, t_to, s_from, s_to = tb, ta, 2, 0
        else:
            t_from, t_to, s_from, s_to = ta, tb, 0, 2
        h = t_to - t_from
        tm = t_from + 0.5 * h
        k1 = stagefn(k, s_from, t_from, y)
        k2 = stagefn(k, 1, tm, y + (0.5 * h) * k1)
        k3 = stagefn(k, 1, tm, y + (0.5 * h) * k2)
        k4 = stagefn(k, s_to, t_to, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if post_step is not None:
            y = post_step(t_to, y)
        if not np.all(np.isfinite(y)):
            raise IntegrationBlowupError(f"integration blew up at t={t_to}", time=float(t_to))
        if backward:
            d_hi[k] = k1
            d_lo[k] = stagefn(k, 0, ta, y)
            vals[k] = y
        else:
            d_lo[k] = k1
            d_hi[k] = stagefn(k, 2, tb, y)
            vals[k + 1] = y
    return DenseSolution(
        grid,
        np.stack(vals[:-1]), np.stack(vals[1:]),
        np.stack(d_lo), np.stack(d_hi),
    )


def integrate_matrix_ode(
    rhs: Callable,
    Y0: np.ndarray,
    a: float,
    b: float,
    steps: int,
    breakpoints: Sequence[float] = (),
    post_step: Optional[Callable[[float, np.ndarray], np.ndarray]] = None,
) -> DenseSolution:
    """Integrate Y' = rhs(t, Y) from a to b (backward when a > b).

    `rhs` may optionally accept a third `side` argument (+1/-1) to resolve
    one-sided limits of discontinuous coefficients at breakpoint nodes; the
    listed breakpoints are inserted into the grid.  Returns the dense
    solution oriented with increasing time regardless of direction.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if a == b:
        raise ValueError("empty integration interval")
    backward = a > b
    lo, hi = (b, a) if backward else (a, b)
    grid = build_grid(lo, hi, steps, breakpoints)

    try:
        rhs(0.5 * (lo + hi), np.asarray(Y0, dtype=float), 1)
        sided = True
    except TypeError:
        sided = False

    if sided:
        def stagefn(k, slot, t, Y):
            return np.asarray(rhs(t, Y, -1 if slot == 2 else 1), dtype=float)
    else:
        def stagefn(k, slot, t, Y):
            return np.asarray(rhs(t, Y), dtype=float)

    return rk4_drive(stagefn, grid, np.asarray(Y0, dtype=float), backward=backward,
                     post_step=post_step)


# -- linear systems with precomputed stage tables ---------------------------

def schedule_stage_table(schedule, grid: np.ndarray):
    """Evaluate a MatrixSchedule at all RK4 stage points of `grid`.

    Returns (lo, mid, hi) arrays of shape (n_intervals, rows, cols) where lo
    uses the right limit at each interval's left end and hi the left limit at
    its right end.
    """
    lo_t, hi_t = grid[:-1], grid[1:]
    mid_t = 0.5 * (lo_t + hi_t)
    return (schedule.eval_many(lo_t, 1),
            schedule.eval_many(mid_t, 1),
            schedule.eval_many(hi_t, -1))


def affine_stagefn(H_table, F_table=None) -> StageFn:
    """Stage function for Y' = H(t) Y + F(t) from precomputed stage tables."""
    if F_table is None:
        def stagefn(k, slot, t, Y):
            return H_table[slot][k] @ Y
    else:
        def stagefn(k, slot, t, Y):
            return H_table[slot][k] @ Y + F_table[slot][k]
    return stagefn


def transition_matrix(A, t: float, s: float, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """State-transition matrix Phi_A(t, s) of z' = A(tau) z (any ordering of t, s)."""
    n = A.rows
    eye = np.eye(n)
    if t == s:
        return eye
    backward = t < s
    lo, hi = (t, s) if backward else (s, t)
    grid = build_grid(lo, hi, steps, A.breakpoints())
    table = schedule_stage_table(A, grid)
    sol = rk4_drive(affine_stagefn(table), grid, eye, backward=backward)
    return sol.eval(t, side=1 if not backward else -1)


@dataclass(frozen=True)
class TransitionMatrix:
    """Dense propagator Phi_A(., s) of a linear system over a whole interval."""

    schedule: object
    anchor: float
    solution: DenseSolution

    @classmethod
    def compute(cls, A, anchor: float, a: float, b: float,
                steps: int = DEFAULT_STEPS) -> "TransitionMatrix":
        if not a <= anchor <= b:
            raise DomainError(f"anchor {anchor} outside [{a}, {b}]")
        n = A.rows
        eye = np.eye(n)
        span = max(1.0, b - a)
        parts = []
        if anchor - a > 1e-12 * span:
            grid = build_grid(a, anchor, max(1, round(steps * (anchor - a) / (b - a))),
                              A.breakpoints())
            parts.append(rk4_drive(affine_stagefn(schedule_stage_table(A, grid)),
                                   grid, eye, backward=True))
        if b - anchor > 1e-12 * span:
            grid = build_grid(anchor, b, max(1, round(steps * (b - anchor) / (b - a))),
                              A.breakpoints())
            parts.append(rk4_drive(affine_stagefn(schedule_stage_table(A, grid)),
                                   grid, eye, backward=False))
        if len(parts) == 1:
            sol = parts[0]
        else:
            lo, hi = parts
            sol = DenseSolution(
                np.concatenate([lo.times, hi.times[1:]]),
                np.concatenate([lo.v_start, hi.v_start]),
                np.concatenate([lo.v_end, hi.v_end]),
                np.concatenate([lo.d_start, hi.d_start]),
                np.concatenate([lo.d_end, hi.d_end]),
            )
        return cls(A, float(anchor), sol)

    def at(self, t: float, side: int = 1) -> np.ndarray:
        return self.solution.eval(t, side)
