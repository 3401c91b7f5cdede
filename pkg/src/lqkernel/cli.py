"""Command-line interface: solve / riccati / kernel / verify / compare.

Problem files are JSON documents mapping one-to-one onto LQProblem; outputs
are CSVs with full-precision floats plus machine-readable JSON summaries.
Exit codes are a stable contract: 0 success, 1 verification failure,
2 input/parse error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import LQKernelError, NumericalError, ProblemFileError
from .kernel import (DEFAULT_QUAD_INTERVALS, KernelOperator, lq_inner_product,
                     reproducing_residual)
from .model import LQProblem, MatrixSchedule, validate_problem
from .ode import DEFAULT_STEPS
from .oracle import richardson_value
from .problems import random_trajectory
from .riccati import solve_adjoint
from .solver import solve_feedback, solve_kernel, solve_multipoint

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

_SCHEDULE_KEYS = ("A", "B", "Q", "R")


# -- problem file parsing ----------------------------------------------------

def _parse_schedule(doc, key: str, t0: float) -> MatrixSchedule:
    if not isinstance(doc, dict):
        raise ProblemFileError(f"key '{key}': expected a schedule object")
    kind = doc.get("kind")
    try:
        if kind == "constant":
            return MatrixSchedule.constant(doc["matrix"])
        if kind == "pwc":
            return MatrixSchedule.piecewise_constant(doc["breakpoints"], doc["matrices"])
        if kind == "samples":
            return MatrixSchedule.sampled_linear(doc["times"], doc["matrices"])
        if kind == "poly":
            return MatrixSchedule.polynomial(doc["coefficients"],
                                             origin=doc.get("origin", t0))
    except KeyError as exc:
        raise ProblemFileError(f"key '{key}': missing field {exc.args[0]!r}") from exc
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(f"key '{key}': {exc}") from exc
    raise ProblemFileError(
        f"key '{key}': unknown kind {kind!r} (expected constant|pwc|samples|poly)")


def parse_problem_dict(doc: dict) -> tuple[LQProblem, dict]:
    """Build an LQProblem from a parsed JSON document.

    Returns the problem plus the extras dict (optional x0 and settings).
    """
    for field in ("state_dim", "input_dim", "t0", "T", *_SCHEDULE_KEYS, "J_T"):
        if field not in doc:
            raise ProblemFileError(f"key '{field}': missing")
    try:
        t0 = float(doc["t0"])
        scheds = {k: _parse_schedule(doc[k], k, t0) for k in _SCHEDULE_KEYS}
        problem = LQProblem(
            state_dim=int(doc["state_dim"]), input_dim=int(doc["input_dim"]),
            t0=t0, T=float(doc["T"]),
            A=scheds["A"], B=scheds["B"], Q=scheds["Q"], R=scheds["R"],
            J_T=np.asarray(doc["J_T"], dtype=float),
            r_min=float(doc.get("r_min", 1e-8)),
        )
    except ProblemFileError:
        raise
    except (TypeError, ValueError) as exc:
        raise ProblemFileError(str(exc)) from exc
    extras = {}
    if "x0" in doc:
        x0 = np.asarray(doc["x0"], dtype=float)
        if x0.shape != (problem.state_dim,):
            raise ProblemFileError(
                f"key 'x0': expected {problem.state_dim} entries, got shape {x0.shape}")
        extras["x0"] = x0
    extras["settings"] = dict(doc.get("settings", {}))
    return problem, extras


def load_problem_file(path: str) -> tuple[LQProblem, dict]:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ProblemFileError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ProblemFileError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProblemFileError("problem file must hold a JSON object")
    return parse_problem_dict(doc)


def _schedule_to_dict(s: MatrixSchedule) -> dict:
    if s.kind == "constant":
        return {"kind": "constant", "matrix": s.matrices[0].tolist()}
    if s.kind == "pwc":
        return {"kind": "pwc", "breakpoints": s.knots.tolist(),
                "matrices": s.matrices.tolist()}
    if s.kind == "samples":
        return {"kind": "samples", "times": s.knots.tolist(),
                "matrices": s.matrices.tolist()}
    return {"kind": "poly", "origin": s.origin, "coefficients": s.matrices.tolist()}


def problem_to_dict(problem: LQProblem, extras: dict | None = None) -> dict:
    """Inverse of parse_problem_dict (round-trip exact for finite floats)."""
    doc = {
        "state_dim": problem.state_dim, "input_dim": problem.input_dim,
        "t0": problem.t0, "T": problem.T,
        "A": _schedule_to_dict(problem.A), "B": _schedule_to_dict(problem.B),
        "Q": _schedule_to_dict(problem.Q), "R": _schedule_to_dict(problem.R),
        "J_T": np.asarray(problem.J_T).tolist(),
        "r_min": problem.r_min,
    }
    if extras:
        if "x0" in extras:
            doc["x0"] = np.asarray(extras["x0"]).tolist()
        if extras.get("settings"):
            doc["settings"] = extras["settings"]
    return doc


# -- output helpers ----------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _print_json(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _require_valid(problem: LQProblem) -> None:
    report = validate_problem(problem)
    if not report.valid:
        raise ProblemFileError(f"problem violates standing assumptions: {report.summary()}")


def _default_steps(args_steps) -> int:
    if args_steps is not None:
        return int(args_steps)
    return int(os.environ.get("LQK_DEFAULT_STEPS", DEFAULT_STEPS))


# -- commands ----------------------------------------------------------------

def cmd_solve(args) -> int:
    problem, extras = load_problem_file(args.problem_file)
    _require_valid(problem)
    steps = _default_steps(args.steps)
    quad = int(extras["settings"].get("quad_intervals", DEFAULT_QUAD_INTERVALS))

    x0 = None
    if args.x0 is not None:
        x0 = np.asarray([float(v) for v in args.x0.split(",")], dtype=float)
    elif "x0" in extras:
        x0 = extras["x0"]

    method = args.method
    if method in ("kernel", "feedback", "both") and x0 is None:
        raise ProblemFileError(f"method {method!r} requires 'x0' (flag or problem file)")
    if method == "multipoint" and not args.constraints:
        raise ProblemFileError("method 'multipoint' requires 'constraints'")

    summary = {"method": method, "settings": {"steps": steps, "quad_intervals": quad}}
    gap = None
    if method == "multipoint":
        try:
            raw = json.loads(args.constraints)
            constraints = [(float(t), np.asarray(c, dtype=float)) for t, c in raw]
        except (TypeError, ValueError) as exc:
            raise ProblemFileError(f"key 'constraints': {exc}") from exc
        result = solve_multipoint(problem, constraints, steps)
    elif method == "feedback":
        result = solve_feedback(problem, x0, steps)
    else:
        op = KernelOperator(problem, steps)
        result = solve_kernel(problem, x0, steps, operator=op)
        if method == "both":
            fb = solve_feedback(problem, x0, steps, operator=op)
            ts = result.trajectory.x.times
            gap = float(np.max(np.abs(result.trajectory.x.eval_many(ts)
                                      - fb.trajectory.x.eval_many(ts))))
            summary["value_feedback"] = fb.value

    traj = result.trajectory
    ts = traj.x.times
    xs = traj.x.values
    us = traj.u.values
    n, m = problem.state_dim, problem.input_dim
    header = (["t"] + [f"x_{i+1}" for i in range(n)] + [f"u_{j+1}" for j in range(m)])
    _write_csv(args.out, header,
               (np.concatenate([[t], x, u]) for t, x, u in zip(ts, xs, us)))

    summary["value"] = result.value
    summary["covectors"] = [
        {"time": t, "vector": np.asarray(p).tolist()} for t, p in result.covectors]
    summary["trajectory_csv"] = args.out
    if gap is not None:
        summary["trajectory_gap"] = gap
    _print_json(summary)
    return EXIT_OK


def cmd_riccati(args) -> int:
    problem, _ = load_problem_file(args.problem_file)
    _require_valid(problem)
    steps = _default_steps(args.steps)
    op = KernelOperator(problem, steps)
    rs = op.riccati
    n = problem.state_dim
    header = (["t"]
              + [f"J_{i+1}{j+1}" for i in range(n) for j in range(n)]
              + [f"M_{i+1}{j+1}" for i in range(n) for j in range(n)]
              + ["duality_defect"])
    defects = rs.duality_defects()
    rows = (
        np.concatenate([[t], J.ravel(), M.ravel(), [d]])
        for t, J, M, d in zip(rs.J.times, rs.J.values, rs.M.values, defects)
    )
    _write_csv(args.out, header, rows)
    _print_json({
        "steps": steps,
        "rows": int(rs.J.times.size),
        "max_duality_defect": float(np.max(defects)),
        "max_asymmetry": max(rs.max_asymmetry_J, rs.max_asymmetry_M),
        "csv": args.out,
    })
    return EXIT_OK


def cmd_kernel(args) -> int:
    problem, _ = load_problem_file(args.problem_file)
    _require_valid(problem)
    steps = _default_steps(args.steps)
    grid = np.linspace(problem.t0, problem.T, int(args.grid_count))
    op = KernelOperator(problem, steps, extra_nodes=grid)
    n = problem.state_dim
    header = ["s", "t"] + [f"K_{i+1}{j+1}" for i in range(n) for j in range(n)]

    def rows():
        for s in grid:
            for t in grid:
                yield np.concatenate([[s, t], op.entry(float(s), float(t)).ravel()])

    _write_csv(args.out, header, rows())
    _print_json({"steps": steps, "grid_count": int(args.grid_count), "csv": args.out})
    return EXIT_OK


def cmd_compare(args) -> int:
    problem, extras = load_problem_file(args.problem_file)
    _require_valid(problem)
    steps = _default_steps(args.steps)
    if args.x0 is not None:
        x0 = np.asarray([float(v) for v in args.x0.split(",")], dtype=float)
    elif "x0" in extras:
        x0 = extras["x0"]
    else:
        raise ProblemFileError("compare requires 'x0' (flag or problem file)")

    op = KernelOperator(problem, steps)
    vk = solve_kernel(problem, x0, steps, operator=op).value
    vf = solve_feedback(problem, x0, steps, operator=op).value
    rich = richardson_value(problem, x0, int(args.oracle_steps))
    ext = rich["extrapolated"]
    _print_json({
        "value_kernel": vk,
        "value_feedback": vf,
        "value_oracle_h": rich["value_h"],
        "value_oracle_h2": rich["value_h2"],
        "extrapolated": ext,
        "rel_gap_kernel_feedback": abs(vk - vf) / (1.0 + abs(vf)),
        "rel_gap_oracle_feedback": abs(ext - vf) / (1.0 + abs(vf)),
    })
    return EXIT_OK


_VERIFY_TOLERANCES = {
    "duality": 1e-6,
    "kernel_diagonal_identity": 1e-5,
    "hermitian_symmetry": 1e-5,
    "reproducing": 1e-4,
    "value_agreement": 1e-6,
    "trajectory_agreement": 1e-5,
    "adjoint_identity": 1e-6,
    "oracle_richardson": 1e-4,
}


def run_verification(problem: LQProblem, seed: int, steps: int,
                     tolerances: dict | None = None,
                     quad_intervals: int = 1000,
                     oracle_steps: int = 2000) -> dict:
    """Run the full identity checklist; deterministic for a given seed.

    Checks: Riccati duality, the kernel-diagonal/Riccati-inverse identity at
    five query times, Hermitian symmetry of the kernel, the reproducing
    property on random trajectories, kernel/feedback agreement in value and
    trajectory, the adjoint identity, and Richardson-extrapolated agreement
    with the discrete-time oracle.
    """
    tol = dict(_VERIFY_TOLERANCES)
    tol.update(tolerances or {})
    rng = np.random.default_rng(seed)
    p = problem
    n = p.state_dim
    op = KernelOperator(p, steps)
    rs = op.riccati
    checks = []

    def add(name, defect):
        checks.append({
            "name": name,
            "defect": float(defect),
            "tolerance": float(tol[name]),
            "passed": bool(defect <= tol[name]),
        })

    add("duality", np.max(rs.duality_defects()))

    eye = np.eye(n)
    queries = np.concatenate([[p.t0], p.t0 + (p.T - p.t0) * np.array([0.25, 0.5, 0.75]), [p.T]])
    add("kernel_diagonal_identity", max(
        np.linalg.norm(rs.J.eval(tq) @ op.diagonal(float(tq)) - eye) for tq in queries))

    pool = np.sort(rng.uniform(p.t0, p.T, size=5))
    sym = 0.0
    for _ in range(20):
        i, j = rng.integers(0, pool.size, size=2)
        Kst = op.entry(float(pool[i]), float(pool[j]))
        Kts = op.entry(float(pool[j]), float(pool[i]))
        sym = max(sym, np.linalg.norm(Kst - Kts.T) / (1.0 + np.linalg.norm(Kst)))
    add("hermitian_symmetry", sym)

    worst = 0.0
    for _ in range(10):
        traj = random_trajectory(p, rng, steps=min(steps, 1000))
        t = float(pool[rng.integers(0, pool.size)])
        pv = rng.normal(size=n)
        r = reproducing_residual(p, traj, t, pv, operator=op,
                                 quad_intervals=quad_intervals)
        xnorm = np.sqrt(max(lq_inner_product(p, traj, traj, quad_intervals), 0.0))
        worst = max(worst, r / (1.0 + xnorm * np.linalg.norm(pv)))
    add("reproducing", worst)

    x0 = np.ones(n) / np.sqrt(n)
    rk = solve_kernel(p, x0, steps, operator=op)
    rf = solve_feedback(p, x0, steps, operator=op)
    add("value_agreement", abs(rk.value - rf.value) / (1.0 + abs(rf.value)))
    ts = rk.trajectory.x.times
    gap = np.max(np.abs(rk.trajectory.x.eval_many(ts) - rf.trajectory.x.eval_many(ts)))
    add("trajectory_agreement", gap / (1.0 + np.linalg.norm(x0)))

    padj = solve_adjoint(p, rk.trajectory.x, steps)
    resid = padj.values + np.einsum("kij,kj->ki", rs.J.eval_many(padj.times),
                                    rk.trajectory.x.eval_many(padj.times))
    add("adjoint_identity", np.max(np.linalg.norm(resid, axis=1)) / (1.0 + np.linalg.norm(x0)))

    rich = richardson_value(p, x0, oracle_steps)
    add("oracle_richardson",
        abs(rich["extrapolated"] - rf.value) / (1.0 + abs(rf.value)))

    return {
        "seed": int(seed),
        "steps": int(steps),
        "quad_intervals": int(quad_intervals),
        "oracle_steps": int(oracle_steps),
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }


def cmd_verify(args) -> int:
    problem, extras = load_problem_file(args.problem_file)
    _require_valid(problem)
    steps = _default_steps(args.steps)
    settings = extras["settings"]
    tolerances = {}
    if args.tolerances:
        try:
            tolerances = json.loads(args.tolerances)
        except json.JSONDecodeError as exc:
            raise ProblemFileError(f"key 'tolerances': invalid JSON: {exc}") from exc
    if isinstance(settings.get("tolerances"), dict):
        tolerances = {**settings["tolerances"], **tolerances}
    seed = args.seed if args.seed is not None else int(settings.get("seed", 0))
    report = run_verification(problem, seed, steps, tolerances)
    _print_json(report)
    return EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED


# -- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lqkernel",
        description="Finite-horizon LQ optimal control: Riccati and kernel routes.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("problem_file", help="problem JSON file")
        p.add_argument("--steps", type=int, default=None,
                       help="RK4 steps over the horizon (default 4000 or $LQK_DEFAULT_STEPS)")

    p = sub.add_parser("solve", help="solve for an optimal trajectory")
    common(p)
    p.add_argument("--x0", help="initial state, comma-separated")
    p.add_argument("--method", choices=["kernel", "feedback", "multipoint", "both"],
                   default="both")
    p.add_argument("--constraints",
                   help='multipoint constraints as JSON, e.g. [[0,[0]],[1,[1]]]')
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("riccati", help="export J, M and the duality defect")
    common(p)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("kernel", help="tabulate K(s, t) on a uniform grid")
    common(p)
    p.add_argument("--grid-count", type=int, default=5)
    p.add_argument("--out", required=True, help="CSV path")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("verify", help="run the identity checklist")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tolerances", help="JSON object of per-check tolerance overrides")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("compare", help="kernel vs feedback vs discrete oracle")
    common(p)
    p.add_argument("--x0", help="initial state, comma-separated")
    p.add_argument("--oracle-steps", type=int, default=2000)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LQKernelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
