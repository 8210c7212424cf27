"""Dense two-phase primal simplex solver for small production-planning LPs.

Solves  min c.x  s.t.  A x {<=,=,>=} b,  x >= 0  on a dense tableau.
Bland's anti-cycling rule is used for both the entering and leaving choices,
so every solve terminates and, with fixed inputs, pivots identically on every
run. Problems here are desk-scale (hundreds of rows), where a dense tableau
is simpler and plenty fast.

Statuses: "optimal", "infeasible", "unbounded", and "iteration_limit" when
the pivot cap is hit (reported, never silently truncated).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

LE, EQ, GE = "<=", "=", ">="

FEAS_TOL = 1e-7  # constraint satisfaction
COST_TOL = 1e-9  # reduced-cost optimality
PIVOT_TOL = 1e-10

DEFAULT_MAX_PIVOTS = 50_000


class DimensionMismatch(Exception):
    pass


@dataclass(frozen=True)
class ConstraintTag:
    """Names a constraint row: its kind and the entity/date indices behind it."""

    kind: str  # capacity | material | linking | demand
    indices: tuple = ()

    def label(self) -> str:
        return f"{self.kind}({', '.join(str(i) for i in self.indices)})"


@dataclass
class LPProblem:
    """min c.x s.t. A x (senses) b, x >= 0, with one tag per row.

    ``columns`` optionally carries structured column keys (what each variable
    means to the caller); the solver itself only reads the numeric parts.
    """

    variables: list[str]
    c: np.ndarray
    A: np.ndarray
    senses: list[str]
    b: np.ndarray
    tags: list[ConstraintTag] = field(default_factory=list)
    columns: list[tuple] = field(default_factory=list)

    def check(self) -> None:
        m, n = self.A.shape if self.A.size else (len(self.b), len(self.c))
        if self.A.size and (m != len(self.b) or n != len(self.c)):
            raise DimensionMismatch(
                f"A is {self.A.shape}, c has {len(self.c)}, b has {len(self.b)}"
            )
        if len(self.variables) != len(self.c):
            raise DimensionMismatch("variable names do not match objective length")
        if len(self.senses) != len(self.b):
            raise DimensionMismatch("senses do not match row count")
        if self.tags and len(self.tags) != len(self.b):
            raise DimensionMismatch("tags do not match row count")
        for s in self.senses:
            if s not in (LE, EQ, GE):
                raise DimensionMismatch(f"unknown sense {s!r}")


@dataclass
class LPSolution:
    status: str
    x: np.ndarray
    objective: float
    iterations: int


def row_activity(problem: LPProblem, x: np.ndarray) -> np.ndarray:
    if problem.A.size == 0:
        return np.zeros(len(problem.b))
    return problem.A @ x


def constraint_violations(problem: LPProblem, x: np.ndarray) -> np.ndarray:
    """Per-row violation amount (0 where satisfied)."""
    activity = row_activity(problem, x)
    out = np.zeros(len(problem.b))
    for i, sense in enumerate(problem.senses):
        if sense == LE:
            out[i] = max(0.0, activity[i] - problem.b[i])
        elif sense == GE:
            out[i] = max(0.0, problem.b[i] - activity[i])
        else:
            out[i] = abs(activity[i] - problem.b[i])
    return out


def _bland_entering(cost_row: np.ndarray, ncols: int) -> int:
    for j in range(ncols):
        if cost_row[j] < -COST_TOL:
            return j
    return -1


def _bland_leaving(T: np.ndarray, basis: list[int], col: int) -> int:
    best_ratio = None
    best_row = -1
    for i in range(len(basis)):
        a = T[i, col]
        if a > PIVOT_TOL:
            ratio = T[i, -1] / a
            if (
                best_ratio is None
                or ratio < best_ratio - PIVOT_TOL
                or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[best_row])
            ):
                best_ratio = ratio
                best_row = i
    return best_row


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row, :] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r, :] -= T[r, col] * T[row, :]


def _run_simplex(T: np.ndarray, basis: list[int], budget: int) -> tuple[str, int]:
    """Pivot until optimal/unbounded or the budget runs out. Returns (status, used)."""
    ncols = T.shape[1] - 1
    used = 0
    while True:
        col = _bland_entering(T[-1, :], ncols)
        if col == -1:
            return OPTIMAL, used
        if used >= budget:
            return ITERATION_LIMIT, used
        row = _bland_leaving(T, basis, col)
        if row == -1:
            return UNBOUNDED, used
        _pivot(T, row, col)
        basis[row] = col
        used += 1


def solve_lp(problem: LPProblem, max_iterations: int = DEFAULT_MAX_PIVOTS) -> LPSolution:
    """Two-phase primal simplex. Deterministic: same problem, same pivots.

    Raises:
        DimensionMismatch: inconsistent problem shapes.
    """
    problem.check()
    n = len(problem.c)
    m = len(problem.b)

    if m == 0:
        # No constraints: x = 0 unless some cost is negative, which is a ray.
        if np.any(np.asarray(problem.c) < -COST_TOL):
            return LPSolution(UNBOUNDED, np.zeros(n), float("-inf"), 0)
        return LPSolution(OPTIMAL, np.zeros(n), 0.0, 0)

    A = np.array(problem.A, dtype=float).reshape(m, n)
    b = np.array(problem.b, dtype=float)
    senses = list(problem.senses)

    # Normalize to b >= 0 so slacks/artificials start feasible.
    for i in range(m):
        if b[i] < 0:
            A[i, :] *= -1.0
            b[i] *= -1.0
            if senses[i] == LE:
                senses[i] = GE
            elif senses[i] == GE:
                senses[i] = LE

    n_slack = sum(1 for s in senses if s == LE)
    n_surplus = sum(1 for s in senses if s == GE)
    n_art = sum(1 for s in senses if s in (EQ, GE))
    slack0 = n
    surplus0 = n + n_slack
    art0 = n + n_slack + n_surplus
    total = art0 + n_art

    T = np.zeros((m + 1, total + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis: list[int] = []
    si = ui = ai = 0
    for i in range(m):
        if senses[i] == LE:
            T[i, slack0 + si] = 1.0
            basis.append(slack0 + si)
            si += 1
        elif senses[i] == GE:
            T[i, surplus0 + ui] = -1.0
            T[i, art0 + ai] = 1.0
            basis.append(art0 + ai)
            ui += 1
            ai += 1
        else:
            T[i, art0 + ai] = 1.0
            basis.append(art0 + ai)
            ai += 1

    iterations = 0

    # Phase 1: minimize the sum of artificials. Reduced costs start as
    # d_j - sum of artificial-basic rows.
    if n_art:
        for i, bv in enumerate(basis):
            if bv >= art0:
                T[-1, :] -= T[i, :]
        T[-1, art0:total] += 1.0

        status, used = _run_simplex(T, basis, max_iterations)
        iterations += used
        if status == ITERATION_LIMIT:
            return LPSolution(ITERATION_LIMIT, np.zeros(n), float("nan"), iterations)
        # Phase 1 objective is -T[-1, -1].
        if -T[-1, -1] > FEAS_TOL:
            return LPSolution(INFEASIBLE, np.zeros(n), float("nan"), iterations)

        # Drive leftover artificials out of the basis; rows that cannot pivot
        # are redundant (0 = 0) and get dropped.
        drop_rows: list[int] = []
        for i in range(m):
            if basis[i] >= art0:
                pivot_col = -1
                for j in range(art0):
                    if abs(T[i, j]) > 1e-8:
                        pivot_col = j
                        break
                if pivot_col == -1:
                    drop_rows.append(i)
                else:
                    _pivot(T, i, pivot_col)
                    basis[i] = pivot_col
        if drop_rows:
            keep = [i for i in range(m) if i not in drop_rows]
            T = T[keep + [m], :]
            basis = [basis[i] for i in keep]

    # Strip artificial columns; rebuild the cost row for the real objective.
    T = np.hstack([T[:, :art0], T[:, -1:]])
    c_ext = np.zeros(art0)
    c_ext[:n] = np.asarray(problem.c, dtype=float)
    T[-1, :] = 0.0
    T[-1, :-1] = c_ext
    for i, bv in enumerate(basis):
        if c_ext[bv] != 0.0:
            T[-1, :] -= c_ext[bv] * T[i, :]

    status, used = _run_simplex(T, basis, max_iterations - iterations)
    iterations += used
    if status != OPTIMAL:
        return LPSolution(status, np.zeros(n), float("nan") if status != UNBOUNDED else float("-inf"), iterations)

    x = np.zeros(art0)
    for i, bv in enumerate(basis):
        x[bv] = T[i, -1]
    x = np.where(np.abs(x) < 1e-11, 0.0, x)[:n]
    x = np.maximum(x, 0.0)
    objective = float(np.dot(problem.c, x))
    return LPSolution(OPTIMAL, x, objective, iterations)
