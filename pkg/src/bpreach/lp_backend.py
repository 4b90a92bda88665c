"""Minimal linear-program abstraction, solved with scipy's HiGHS backend.

The contract every caller relies on: deterministic results for a fixed
problem, feasibility tolerance 1e-6, optimality 1e-8 relative, and numerical
failures raised as `LpSolverError` rather than returned as a wrong optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import LpSolverError

MIN = "min"
MAX = "max"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LEQ = "<="
EQ = "="
GEQ = ">="

FEASIBILITY_TOL = 1e-6


@dataclass
class LpProblem:
    """Linear program over `num_vars` variables.

    constraints: list of (coefficients, relation, rhs) with relation in
    {"<=", "=", ">="}; bounds: per-variable (lo, hi) with +-inf allowed,
    default free.
    """

    num_vars: int
    objective: np.ndarray
    sense: str = MIN
    constraints: list = field(default_factory=list)
    bounds: list | None = None

    def add(self, coeffs, relation: str, rhs: float) -> None:
        self.constraints.append((np.asarray(coeffs, dtype=float), relation, float(rhs)))


@dataclass(frozen=True)
class LpSolution:
    status: str
    value: float | None = None
    point: np.ndarray | None = None


def _validate(problem: LpProblem) -> np.ndarray:
    obj = np.asarray(problem.objective, dtype=float)
    if obj.shape != (problem.num_vars,):
        raise ValueError(f"objective shape {obj.shape} != ({problem.num_vars},)")
    if not np.isfinite(obj).all():
        raise ValueError("objective must be finite")
    if problem.sense not in (MIN, MAX):
        raise ValueError(f"unknown sense {problem.sense!r}")
    for coeffs, relation, rhs in problem.constraints:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (problem.num_vars,):
            raise ValueError(f"constraint shape {c.shape} != ({problem.num_vars},)")
        if not (np.isfinite(c).all() and np.isfinite(rhs)):
            raise ValueError("constraint coefficients and rhs must be finite")
        if relation not in (LEQ, EQ, GEQ):
            raise ValueError(f"unknown relation {relation!r}")
    return obj


def solve(problem: LpProblem) -> LpSolution:
    """Solve the LP; statuses are optimal/infeasible/unbounded, anything else raises."""
    obj = _validate(problem)
    a_ub, b_ub, a_eq, b_eq = [], [], [], []
    for coeffs, relation, rhs in problem.constraints:
        c = np.asarray(coeffs, dtype=float)
        if relation == LEQ:
            a_ub.append(c)
            b_ub.append(rhs)
        elif relation == GEQ:
            a_ub.append(-c)
            b_ub.append(-rhs)
        else:
            a_eq.append(c)
            b_eq.append(rhs)
    bounds = problem.bounds if problem.bounds is not None else [(None, None)] * problem.num_vars
    bounds = [
        (None if lo is not None and np.isneginf(lo) else lo,
         None if hi is not None and np.isposinf(hi) else hi)
        for lo, hi in bounds
    ]
    res = linprog(
        c=obj if problem.sense == MIN else -obj,
        A_ub=np.array(a_ub) if a_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(a_eq) if a_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
        bounds=bounds,
        method="highs",
    )
    if res.status == 0:
        value = float(res.fun) if problem.sense == MIN else -float(res.fun)
        return LpSolution(OPTIMAL, value=value, point=np.asarray(res.x, dtype=float))
    if res.status == 2:
        return LpSolution(INFEASIBLE)
    if res.status == 3:
        return LpSolution(UNBOUNDED)
    raise LpSolverError(f"LP solver failed (status {res.status}): {res.message}")
