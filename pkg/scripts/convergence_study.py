"""Step-halving study: RK4 order on the integrator, O(h) bias of the oracle.

Usage: python scripts/convergence_study.py
"""

import math

import numpy as np

from lqkernel.ode import integrate_matrix_ode
from lqkernel.oracle import discrete_value
from lqkernel.problems import double_integrator_problem, unit_scalar_problem
from lqkernel.riccati import riccati_value, solve_riccati


def rk4_table():
    print("RK4 on Y' = Y over [0, 1] (exact value e):")
    print(f"{'steps':>8} {'error':>14} {'ratio':>8}")
    prev = None
    for steps in (50, 100, 200, 400, 800):
        sol = integrate_matrix_ode(lambda t, Y: Y, np.array([[1.0]]), 0.0, 1.0, steps)
        err = abs(sol.eval(1.0)[0, 0] - math.e)
        ratio = f"{prev / err:8.2f}" if prev else " " * 8
        print(f"{steps:>8} {err:14.3e} {ratio}")
        prev = err


def oracle_table(problem, name):
    x0 = np.ones(problem.state_dim) / math.sqrt(problem.state_dim)
    v_ref = riccati_value(solve_riccati(problem, 4000), problem.t0, x0)
    print(f"\ndiscrete oracle on {name} (continuous value {v_ref:.10f}):")
    print(f"{'steps':>8} {'value':>16} {'bias':>12} {'ratio':>8}")
    prev = None
    for steps in (250, 500, 1000, 2000, 4000):
        v = discrete_value(problem, x0, steps)
        bias = v - v_ref
        ratio = f"{prev / bias:8.2f}" if prev else " " * 8
        print(f"{steps:>8} {v:16.10f} {bias:12.3e} {ratio}")
        prev = bias
    v_h = discrete_value(problem, x0, 2000)
    v_h2 = discrete_value(problem, x0, 4000)
    print(f"Richardson extrapolation 2 v(h/2) - v(h): {2 * v_h2 - v_h:.10f} "
          f"(residual {2 * v_h2 - v_h - v_ref:.3e})")


if __name__ == "__main__":
    rk4_table()
    oracle_table(unit_scalar_problem(state_cost=1.0), "scalar unit-cost problem")
    oracle_table(double_integrator_problem(), "double integrator")
