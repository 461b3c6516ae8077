"""Repatom meshes and the operators between solution spaces.

Spaces are tagged by level (``a`` atoms, ``p`` partial continuum, ``q``
quasicontinuum) and by whether the four clamped end slots are included.  All
operators carry their domain and codomain so products are checked.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Space",
    "SpaceTaggedOperator",
    "Mesh",
    "NestedMeshPair",
    "atom_space",
    "build_interp_aq",
    "build_interp_ap",
    "build_interp_pq",
    "build_restriction_qp",
    "build_boundary",
    "boundary_vectors",
    "bisect",
    "partial_refine",
    "partial_refine_interval",
]

Number = Union[int, float]


class SpaceMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Space:
    level: str  # "a", "p" or "q"
    dim: int
    clamped: bool = False  # True for the interior spaces V^*_0

    def __post_init__(self):
        if self.level not in ("a", "p", "q"):
            raise ValueError(f"unknown level {self.level!r}")

    @property
    def name(self) -> str:
        return f"V^{self.level}_0" if self.clamped else f"V^{self.level}"

    def interior(self) -> "Space":
        if self.clamped:
            raise ValueError(f"{self.name} has no boundary slots")
        if self.dim < 4:
            raise ValueError(f"{self.name} must have at least 4 slots")
        return Space(self.level, self.dim - 4, True)

    def __repr__(self):
        return f"{self.name}[{self.dim}]"


def atom_space(M: int) -> Space:
    return Space("a", 2 * M)


class SpaceTaggedOperator:
    """Sparse linear map ``domain -> codomain``."""

    def __init__(self, matrix, codomain: Space, domain: Space):
        matrix = sp.csr_matrix(matrix)
        if matrix.shape != (codomain.dim, domain.dim):
            raise SpaceMismatch(
                f"matrix shape {matrix.shape} does not match {codomain!r} <- {domain!r}"
            )
        self.matrix = matrix
        self.codomain = codomain
        self.domain = domain

    @property
    def T(self) -> "SpaceTaggedOperator":
        return SpaceTaggedOperator(self.matrix.T.tocsr(), self.domain, self.codomain)

    @property
    def shape(self):
        return self.matrix.shape

    def __matmul__(self, other):
        if isinstance(other, SpaceTaggedOperator):
            if other.codomain != self.domain:
                raise SpaceMismatch(f"cannot compose {self!r} with {other!r}")
            return SpaceTaggedOperator(self.matrix @ other.matrix, self.codomain, other.domain)
        x = np.asarray(other, dtype=float)
        if x.shape[0] != self.domain.dim:
            raise SpaceMismatch(f"vector of length {x.shape[0]} is not in {self.domain!r}")
        return self.matrix @ x

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __repr__(self):
        return f"Op({self.codomain!r} <- {self.domain!r})"


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing repatom indices with the four end atoms pinned."""

    repatoms: tuple
    M: int
    level: str = "qc"

    def __post_init__(self):
        ell = tuple(int(r) for r in self.repatoms)
        object.__setattr__(self, "repatoms", ell)
        M = self.M
        if len(ell) < 4:
            raise ValueError("a mesh needs at least four repatoms")
        if ell[:2] != (-M + 1, -M + 2) or ell[-2:] != (M - 1, M):
            raise ValueError(f"mesh must start with {-M + 1}, {-M + 2} and end with {M - 1}, {M}")
        if any(b <= a for a, b in zip(ell, ell[1:])):
            raise ValueError("repatoms must be strictly increasing")
        if self.level not in ("qc", "pc"):
            raise ValueError(f"unknown mesh level {self.level!r}")

    @classmethod
    def full(cls, M: int, level: str = "qc") -> "Mesh":
        return cls(tuple(range(-M + 1, M + 1)), M, level)

    @property
    def ell(self) -> np.ndarray:
        return np.asarray(self.repatoms, dtype=int)

    @property
    def nu(self) -> np.ndarray:
        return np.diff(self.ell)

    @property
    def size(self) -> int:
        """Number of repatoms, ``2N``."""
        return len(self.repatoms)

    @property
    def N(self) -> int:
        return self.size // 2

    def space(self) -> Space:
        return Space("q" if self.level == "qc" else "p", self.size)

    def __eq__(self, other):
        return (isinstance(other, Mesh) and self.repatoms == other.repatoms
                and self.M == other.M and self.level == other.level)

    def __hash__(self):
        return hash((self.repatoms, self.M, self.level))

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class NestedMeshPair:
    """A qc mesh and a pc refinement containing all of its repatoms."""

    coarse: Mesh
    fine: Mesh

    def __post_init__(self):
        if self.coarse.M != self.fine.M:
            raise ValueError("coarse and fine meshes disagree on M")
        fine = self.fine.ell
        mu = np.searchsorted(fine, self.coarse.ell)
        if np.any(mu >= fine.size) or np.any(fine[np.minimum(mu, fine.size - 1)] != self.coarse.ell):
            raise ValueError("fine mesh does not contain every coarse repatom")
        object.__setattr__(self, "_mu", mu)

    @property
    def mu(self) -> np.ndarray:
        """Position of each coarse repatom in the fine mesh."""
        return self._mu.copy()


def _interp_matrix(nodes: np.ndarray, targets: np.ndarray) -> sp.csr_matrix:
    """Piecewise linear evaluation at ``targets`` of data given at ``nodes``.

    Row ``t`` gets ``(nu - k)/nu`` on node ``j`` and ``k/nu`` on node ``j+1``
    where ``t = ell_j + k``; targets that are nodes get a single unit entry.
    """
    j = np.searchsorted(nodes, targets, side="right") - 1
    j = np.clip(j, 0, nodes.size - 2)
    nu = nodes[j + 1] - nodes[j]
    k = targets - nodes[j]
    if np.any(k < 0) or np.any(k > nu):
        raise ValueError("targets outside the node range")
    rows = np.arange(targets.size)
    at_right = k == nu
    at_left = k == 0
    inner = ~(at_left | at_right)
    r = np.concatenate([rows[at_left], rows[at_right], rows[inner], rows[inner]])
    c = np.concatenate([j[at_left], j[at_right] + 1, j[inner], j[inner] + 1])
    v = np.concatenate([np.ones(at_left.sum()), np.ones(at_right.sum()),
                        (nu[inner] - k[inner]) / nu[inner], k[inner] / nu[inner]])
    out = sp.coo_matrix((v, (r, c)), shape=(targets.size, nodes.size)).tocsr()
    out.sort_indices()
    return out


def build_interp_aq(mesh: Mesh) -> SpaceTaggedOperator:
    """Interpolation ``I^aq`` (or ``I^ap`` for a pc mesh) from repatoms to atoms."""
    atoms = np.arange(-mesh.M + 1, mesh.M + 1)
    return SpaceTaggedOperator(_interp_matrix(mesh.ell, atoms), atom_space(mesh.M), mesh.space())


def build_interp_ap(pair: NestedMeshPair) -> SpaceTaggedOperator:
    return build_interp_aq(pair.fine)


def build_interp_pq(pair: NestedMeshPair) -> SpaceTaggedOperator:
    """``I^pq``: qc nodal data evaluated at the pc repatoms."""
    m = _interp_matrix(pair.coarse.ell, pair.fine.ell)
    return SpaceTaggedOperator(m, pair.fine.space(), pair.coarse.space())


def build_restriction_qp(pair: NestedMeshPair) -> SpaceTaggedOperator:
    """``R^qp``: picks the pc values at the qc repatoms."""
    n = pair.coarse.size
    m = sp.csr_matrix((np.ones(n), (np.arange(n), pair.mu)), shape=(n, pair.fine.size))
    return SpaceTaggedOperator(m, pair.coarse.space(), pair.fine.space())


def build_boundary(space: Space) -> SpaceTaggedOperator:
    """Zero extension ``J: V_0 -> V`` skipping the two slots at each end."""
    inner = space.interior()
    m = sp.eye(space.dim, format="csr")[:, 2:space.dim - 2]
    return SpaceTaggedOperator(m, space, inner)


def boundary_vectors(bc: Iterable[float], mesh: Mesh):
    """Return ``(y_bcq, y_bca)`` for boundary values ``(l1, l2, r2, r1)``.

    ``y_bcq`` lives on the mesh level, ``y_bca = I y_bcq`` on the atoms.
    """
    l1, l2, r2, r1 = (float(v) for v in bc)
    ybcq = np.zeros(mesh.size)
    ybcq[[0, 1, -2, -1]] = (l1, l2, r2, r1)
    return ybcq, build_interp_aq(mesh) @ ybcq


def bisect(mesh: Mesh, marked: Iterable[int]) -> Mesh:
    """Split each marked interval (0-based position in ``mesh.nu``) in two.

    The new repatom sits at ``ell_j + nu_j // 2``.
    """
    marked = sorted(set(int(j) for j in marked))
    nu = mesh.nu
    new = []
    for j in marked:
        if not 0 <= j < nu.size:
            raise IndexError(f"interval {j} out of range")
        if nu[j] < 2:
            raise ValueError(f"interval {j} has size 1 and cannot be refined")
        new.append(mesh.repatoms[j] + int(nu[j]) // 2)
    return Mesh(tuple(sorted(mesh.repatoms + tuple(new))), mesh.M, mesh.level)


def partial_refine_interval(nu: int, lam: Number) -> list:
    """Subinterval sizes for one qc interval of size ``nu``.

    ``lam`` may be ``math.inf`` for refinement down to single atoms.
    """
    if not lam >= 2:
        raise ValueError(f"partial refinement factor must be >= 2 or inf, got {lam}")
    omega = max(1.0, nu / lam)
    s1 = 0.0
    s2 = 0
    out = []
    while s2 < nu:
        s1 = min(s1 + omega, float(nu))
        step = math.floor(s1 - s2 + 0.5)
        out.append(step)
        s2 += step
    return out


def partial_refine(mesh: Mesh, lam: Number) -> NestedMeshPair:
    """Build the pc mesh by splitting every qc interval into about ``lam`` parts."""
    fine = [mesh.repatoms[0]]
    for left, nu in zip(mesh.repatoms, mesh.nu):
        pos = left
        for step in partial_refine_interval(int(nu), lam):
            pos += step
            fine.append(pos)
    return NestedMeshPair(mesh, Mesh(tuple(fine), mesh.M, "pc"))
