"""Restricted linear systems for the a/ac/qc/pc levels and their direct solve."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .fk_model import ModelParams, QuadraticEnergy
from .mesh import (
    Mesh,
    SpaceTaggedOperator,
    atom_space,
    build_boundary,
    build_interp_aq,
)

__all__ = [
    "FactorizationError",
    "Discretization",
    "LinearSystem",
    "Solution",
    "discretize",
    "assemble_system",
    "solve",
    "lift",
    "banded_upper",
]

KINDS = ("a", "ac", "qc", "pc")
RESIDUAL_RTOL = 1e-12


class FactorizationError(ArithmeticError):
    """The system matrix is not positive definite."""


@dataclass(frozen=True)
class Discretization:
    """Interpolation ``I`` (level -> atoms), boundary ``J`` and ``y_bc`` of one level."""

    kind: str
    interp: SpaceTaggedOperator
    boundary: SpaceTaggedOperator
    ybc: np.ndarray
    mesh: Optional[Mesh] = None

    def lift(self, x) -> np.ndarray:
        """``J x + y_bc`` on the level space."""
        return self.boundary @ x + self.ybc

    def positions(self, x) -> np.ndarray:
        """Full atom positions ``I (J x + y_bc)``."""
        return self.interp @ self.lift(x)


def discretize(kind: str, params: ModelParams, bc, mesh: Optional[Mesh] = None) -> Discretization:
    """Operators for one level.

    ``a``/``ac`` ignore ``mesh`` and use the identity interpolation with the
    four boundary values embedded at the end atoms.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown level {kind!r}")
    bc = np.asarray(bc, dtype=float)
    if kind in ("a", "ac"):
        mesh = Mesh.full(params.M)
        va = atom_space(params.M)
        interp = SpaceTaggedOperator(sp.eye(va.dim, format="csr"), va, va)
    else:
        if mesh is None:
            raise ValueError(f"level {kind!r} needs a mesh")
        if mesh.M != params.M:
            raise ValueError("mesh and params disagree on M")
        want = "qc" if kind == "qc" else "pc"
        if mesh.level != want:
            raise ValueError(f"level {kind!r} needs a {want} mesh, got {mesh.level}")
        interp = build_interp_aq(mesh)
    ybc = np.zeros(interp.domain.dim)
    ybc[[0, 1, -2, -1]] = bc
    return Discretization(kind, interp, build_boundary(interp.domain), ybc,
                          None if kind in ("a", "ac") else mesh)


@dataclass(frozen=True)
class Solution:
    interior: np.ndarray
    lifted: Optional[np.ndarray] = None
    positions: Optional[np.ndarray] = None


@dataclass(frozen=True)
class LinearSystem:
    """``matrix x = rhs`` on the interior space of one level."""

    matrix: SpaceTaggedOperator
    rhs: np.ndarray
    kind: str
    quad: QuadraticEnergy
    disc: Discretization

    @property
    def space(self):
        return self.matrix.domain

    def residual(self, x) -> np.ndarray:
        """``rhs - matrix @ x`` for the primal system, via spring elongations.

        Equal to the plain product form in exact arithmetic but free of the
        cancellation between large positions.
        """
        I, J = self.disc.interp, self.disc.boundary
        return -(J.T @ (I.T @ self.quad.gradient_at(self.disc.positions(x))))

    def with_rhs(self, rhs, kind: str) -> "LinearSystem":
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.space.dim,):
            raise ValueError(f"rhs of length {rhs.shape} is not in {self.space!r}")
        return replace(self, rhs=rhs, kind=kind)


def assemble_system(kind: str, quad: QuadraticEnergy, disc: Discretization) -> LinearSystem:
    """``J^T I^T H I J`` with right-hand side ``-J^T I^T grad E(I y_bc)``."""
    if kind != disc.kind:
        raise ValueError(f"discretization is for level {disc.kind!r}, not {kind!r}")
    va = atom_space(quad.params.M)
    if disc.interp.codomain != va:
        raise ValueError("interpolation does not map onto the atom space of the energy")
    H = SpaceTaggedOperator(quad.hessian, va, va)
    IJ = disc.interp @ disc.boundary
    matrix = IJ.T @ H @ IJ
    matrix.matrix.sort_indices()
    rhs = -(IJ.T @ quad.gradient_at(disc.interp @ disc.ybc))
    return LinearSystem(matrix, rhs, kind, quad, disc)


def banded_upper(A: sp.spmatrix):
    """Upper banded storage of a symmetric sparse matrix for LAPACK."""
    coo = sp.triu(sp.csr_matrix(A)).tocoo()
    u = int((coo.col - coo.row).max(initial=0))
    ab = np.zeros((u + 1, A.shape[0]))
    ab[u + coo.row - coo.col, coo.col] = coo.data
    return ab


def solve(system: LinearSystem, refine: int = 1) -> Solution:
    """Banded Cholesky solve; the primal ones are also lifted to atoms.

    ``refine`` steps of iterative refinement follow the factorized solve.
    Primal systems use the elongation-based residual, which is what makes
    goal errors of order 1e-10 reproducible on a chain with positions of
    order 1e3.
    """
    A = system.matrix.matrix
    b = system.rhs
    primal = system.kind in KINDS
    if A.shape[0] == 0:
        x = np.zeros(0)
    else:
        try:
            cb = la.cholesky_banded(banded_upper(A), lower=False)
        except la.LinAlgError as exc:
            raise FactorizationError(
                f"{system.kind} matrix is not positive definite; check coercivity/assembly"
            ) from exc
        x = la.cho_solve_banded((cb, False), b)
        for _ in range(refine):
            r = system.residual(x) if primal else b - A @ x
            x = x + la.cho_solve_banded((cb, False), r)
        bnorm = np.linalg.norm(b)
        if bnorm > 0 and np.linalg.norm(A @ x - b) > RESIDUAL_RTOL * bnorm:
            raise FactorizationError(f"{system.kind} solve missed the residual tolerance")
    if primal:
        return Solution(x, system.disc.lift(x), system.disc.positions(x))
    return Solution(x)


def lift(solution: Solution, disc: Discretization) -> np.ndarray:
    """``J x + y_bc`` on the level space."""
    return disc.lift(solution.interior)
