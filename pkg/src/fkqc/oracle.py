"""Full-resolution reference solves and brute-force cross-checks.

Used for reporting exact goal errors at desk scale; nothing here feeds the
adaptive decisions.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import LinearSystem, Solution, assemble_system, discretize, solve
from .estimator import GoalFunctional, exact_goal_error
from .fk_model import ModelParams, Partition, assemble_quadratic

__all__ = [
    "OracleReport",
    "Reference",
    "solve_full",
    "build_reference",
    "report",
    "fd_gradient",
    "fd_hessian",
    "dense_solve",
]


def solve_full(level: str, params: ModelParams, partition: Partition, bc) -> Solution:
    """Direct minimizer of ``E^a`` (level ``"a"``) or ``E^ac`` under clamping."""
    if level == "a":
        partition = Partition.all_atomistic(params.M)
    elif level != "ac":
        raise ValueError(f"level must be 'a' or 'ac', got {level!r}")
    quad = assemble_quadratic(params, partition)
    return solve(assemble_system(level, quad, discretize(level, params, bc)))


@dataclass(frozen=True)
class Reference:
    """Atomistic and ac solutions plus the ac dual for one configuration."""

    goal: GoalFunctional
    y_a: Solution
    y_ac: Solution
    system_ac: LinearSystem
    dual_ac: Solution

    def coarsening_error(self, qc_positions, rtol: float = 1e-10, atol: float = 0.0) -> float:
        """Signed ``Q(e^{ac-qc})`` (dual identity checked)."""
        return exact_goal_error(self.goal, self.system_ac, self.y_ac, qc_positions,
                                self.dual_ac, rtol=rtol, atol=atol)

    @property
    def modeling_error(self) -> float:
        """Signed ``Q(e^{a-ac})``."""
        return self.goal.of_positions(self.y_a.positions) - self.goal.of_positions(self.y_ac.positions)


def build_reference(params: ModelParams, partition: Partition, bc, goal: GoalFunctional) -> Reference:
    y_a = solve_full("a", params, partition, bc)
    quad = assemble_quadratic(params, partition)
    system_ac = assemble_system("ac", quad, discretize("ac", params, bc))
    y_ac = solve(system_ac)
    dual_ac = solve(system_ac.with_rhs(goal.q, "ac-dual"))
    return Reference(goal, y_a, y_ac, system_ac, dual_ac)


@dataclass(frozen=True)
class OracleReport:
    modeling_error: float
    coarsening_error: float
    total_error: float

    @property
    def triangle_bound(self) -> float:
        return self.modeling_error + self.coarsening_error


def report(ref: Reference, qc_positions, rtol: float = 1e-10, atol: float = 0.0) -> OracleReport:
    """Split of ``|Q(y^a) - Q(qc)|`` into modeling and coarsening parts."""
    total = abs(ref.goal.of_positions(ref.y_a.positions) - ref.goal.of_positions(qc_positions))
    return OracleReport(
        modeling_error=abs(ref.modeling_error),
        coarsening_error=abs(ref.coarsening_error(qc_positions, rtol=rtol, atol=atol)),
        total_error=total,
    )


def fd_gradient(f: Callable, y, h: float = 1e-5) -> np.ndarray:
    """Central differences of a scalar function."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    for k in range(y.size):
        e = np.zeros_like(y)
        e[k] = h
        out[k] = (f(y + e) - f(y - e)) / (2 * h)
    return out


def fd_hessian(grad: Callable, y, h: float = 1e-5) -> np.ndarray:
    """Central differences of a gradient, column by column."""
    y = np.asarray(y, dtype=float)
    cols = []
    for k in range(y.size):
        e = np.zeros_like(y)
        e[k] = h
        cols.append((grad(y + e) - grad(y - e)) / (2 * h))
    return np.column_stack(cols)


def dense_solve(A, b) -> np.ndarray:
    """Dense LU solve, independent of the banded path."""
    A = A.toarray() if hasattr(A, "toarray") else np.asarray(A)
    return np.linalg.solve(A, np.asarray(b, dtype=float))
