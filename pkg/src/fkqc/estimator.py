"""Goal functional, dual problems and the dual-weighted residual estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (
    Discretization,
    LinearSystem,
    Solution,
    assemble_system,
    discretize,
    solve,
)
from .fk_model import QuadraticEnergy
from .mesh import (
    NestedMeshPair,
    atom_space,
    build_boundary,
    build_interp_pq,
    build_restriction_qp,
)

__all__ = [
    "GoalFunctional",
    "EstimatorReport",
    "ConsistencyError",
    "dislocation_goal",
    "residual_ac",
    "exact_goal_error",
    "estimate",
    "qc_dual_estimate",
]


class ConsistencyError(RuntimeError):
    pass


@dataclass(frozen=True)
class GoalFunctional:
    """Linear goal ``Q(y) = q . y`` on the interior atom space ``V^a_0``."""

    q: np.ndarray
    M: int

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (2 * self.M - 4,):
            raise ValueError(f"goal vector must have length {2 * self.M - 4}")
        if not np.all(np.isfinite(q)):
            raise ValueError("goal vector must be finite")
        object.__setattr__(self, "q", q)

    def __call__(self, y) -> float:
        return float(self.q @ np.asarray(y, dtype=float))

    def full(self) -> np.ndarray:
        """``J^a q`` on all atoms."""
        return build_boundary(atom_space(self.M)) @ self.q

    def of_positions(self, y) -> float:
        """``Q(J^aT y)`` for a full atom vector."""
        return float(self.full() @ np.asarray(y, dtype=float))


def dislocation_goal(M: int) -> GoalFunctional:
    """``Q(y) = y_1 - y_0``, the width of the dislocation core."""
    if M < 4:
        raise ValueError("M must be >= 4")
    q = np.zeros(2 * M - 4)
    # interior offset of atom i is i + M - 3
    q[M - 3] = -1.0
    q[M - 2] = 1.0
    return GoalFunctional(q, M)


def residual_ac(system_ac: LinearSystem, y) -> np.ndarray:
    """Primal residual ``f^ac - M^ac y`` for ``y`` in ``V^a_0``."""
    return system_ac.residual(y)


def _ac_interior(system_ac: LinearSystem, positions) -> np.ndarray:
    """``J^aT (y - y_bca)`` for a full atom vector matching the boundary data."""
    disc = system_ac.disc
    return disc.boundary.T @ (np.asarray(positions, dtype=float) - disc.ybc)


def exact_goal_error(goal: GoalFunctional, system_ac: LinearSystem, y_ac: Solution,
                     qc_positions, dual_ac: Solution | None = None,
                     rtol: float = 1e-10, atol: float = 0.0) -> float:
    """``Q(e^{ac-qc})`` checked against ``g^ac . R^ac(...)``.

    ``qc_positions`` is the qc solution interpolated to all atoms.  Pass a
    precomputed ``dual_ac`` to avoid re-solving for it.
    """
    direct = goal.of_positions(y_ac.positions) - goal.of_positions(qc_positions)
    if dual_ac is None:
        dual_ac = solve(system_ac.with_rhs(goal.q, "ac-dual"))
    via_dual = float(dual_ac.interior @ system_ac.residual(_ac_interior(system_ac, qc_positions)))
    if abs(direct - via_dual) > rtol * abs(direct) + atol:
        raise ConsistencyError(
            f"dual identity violated: direct {direct!r} vs dual-weighted residual {via_dual!r}"
        )
    return direct


@dataclass(frozen=True)
class EstimatorReport:
    """``eta`` and its splittings.

    ``eta_pc`` is indexed by pc repatom (zero at the four clamped slots),
    ``eta_qc`` by qc interval.
    """

    eta: float
    eta_pc: np.ndarray
    eta_qc: np.ndarray
    dual_pc: Solution
    pair: NestedMeshPair

    @property
    def sum_eta_qc(self) -> float:
        return float(np.sum(self.eta_qc))


def estimate(pair: NestedMeshPair, quad: QuadraticEnergy, goal: GoalFunctional,
             system_ac: LinearSystem, qc_positions, bc,
             dual_pc: Solution | None = None) -> EstimatorReport:
    """Dual-weighted residual estimate of ``Q(e^{ac-qc})`` on a nested pair.

    The pc dual ``M^pc g = J^pT I^apT J^a q`` is solved unless supplied.  Its
    qc interpolant is subtracted before weighting the ac residual restricted
    by ``J^pT I^apT J^a``.
    """
    params = quad.params
    pc = discretize("pc", params, bc, pair.fine)
    Ip, Jp = pc.interp, pc.boundary
    if dual_pc is None:
        sys_pc = assemble_system("pc", quad, pc)
        sys_pc = sys_pc.with_rhs(Jp.T @ (Ip.T @ goal.full()), "pc-dual")
        dual_pc = solve(sys_pc)
    g = dual_pc.interior
    Ipq = build_interp_pq(pair)
    Rqp = build_restriction_qp(pair)
    weight = g - Jp.T @ (Ipq @ (Rqp @ (Jp @ g)))

    Ja = system_ac.disc.boundary
    r_ac = system_ac.residual(_ac_interior(system_ac, qc_positions))
    r_pc = Jp.T @ (Ip.T @ (Ja @ r_ac))

    eta_pc = np.zeros(pair.fine.size)
    eta_pc[2:-2] = weight * r_pc
    eta = float(np.sum(eta_pc))
    mu = pair.mu
    # sum over mu_j < jbar < mu_{j+1}
    eta_qc = np.array([abs(np.sum(eta_pc[a + 1:b])) for a, b in zip(mu[:-1], mu[1:])])
    return EstimatorReport(eta, eta_pc, eta_qc, dual_pc, pair)


def qc_dual_estimate(quad: QuadraticEnergy, goal: GoalFunctional, system_ac: LinearSystem,
                     qc: Discretization, qc_positions) -> float:
    """Dual weight from the qc level itself; vanishes by Galerkin orthogonality."""
    sys_qc = assemble_system("qc", quad, qc)
    IJ = qc.interp @ qc.boundary
    g_qc = solve(sys_qc.with_rhs(IJ.T @ goal.full(), "qc-dual")).interior
    Ja = system_ac.disc.boundary
    weight = Ja.T @ (IJ @ g_qc)
    return float(weight @ system_ac.residual(_ac_interior(system_ac, qc_positions)))
