"""Generalized Frenkel-Kontorova chain with NN and NNN springs.

Atoms carry lattice indices ``i = -M+1, ..., M`` and are stored in arrays at
offset ``s = i + M - 1``.  Every elastic contribution is a quadratic spring
term ``c * (y_p - y_q - d)**2`` and every misfit contribution is an on-site
well ``k0/2 * (y_i - w_i)**2``; the total energy is therefore quadratic and is
assembled into an exact sparse Hessian plus a gradient evaluated from the
spring elongations directly (no large-magnitude cancellation).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

__all__ = [
    "ModelParams",
    "Partition",
    "QuadraticEnergy",
    "atom_energy_atomistic",
    "atom_energy_continuum",
    "energy_ac",
    "assemble_quadratic",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical constants and chain size.

    ``k0`` is the misfit modulus, ``k1``/``k2`` the nearest and next-nearest
    neighbour moduli, ``a0`` the lattice constant and ``M`` the half length
    of the chain (``2M`` atoms).
    """

    k0: float = 0.1
    k1: float = 2.0
    k2: float = 1.0
    a0: float = 1.0
    M: int = 2053

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not self.k1 + 2 * self.k2 > 2 * abs(self.k2):
            raise ValueError(
                f"coercivity requires k1 + 2*k2 > 2*|k2| (k1={self.k1}, k2={self.k2})"
            )
        if int(self.M) != self.M or self.M < 4:
            raise ValueError(f"M must be an integer >= 4, got {self.M}")
        object.__setattr__(self, "M", int(self.M))

    @property
    def k12(self) -> float:
        return self.k1 + 4 * self.k2

    @property
    def n_atoms(self) -> int:
        return 2 * self.M

    @property
    def first(self) -> int:
        return -self.M + 1

    @property
    def last(self) -> int:
        return self.M

    def offset(self, i: int) -> int:
        """Storage offset of atom ``i``."""
        if not self.first <= i <= self.last:
            raise IndexError(f"atom index {i} outside [{self.first}, {self.last}]")
        return i + self.M - 1

    def indices(self) -> np.ndarray:
        return np.arange(self.first, self.last + 1)

    def wells(self) -> np.ndarray:
        """Misfit well centres; left half is shifted by one lattice spacing."""
        i = self.indices()
        return np.where(i <= 0, (i - 1) * self.a0, i * self.a0).astype(float)

    def lattice(self) -> np.ndarray:
        """Undeformed positions ``y_i = i * a0``."""
        return self.indices() * float(self.a0)


@dataclass(frozen=True)
class Partition:
    """Atomistic/continuum flags with one contiguous atomistic block.

    ``block = (lo, hi)`` marks atoms ``lo..hi`` (inclusive) as atomistic;
    ``block = None`` means every atom is continuum.
    """

    M: int
    block: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.block is not None:
            lo, hi = (int(b) for b in self.block)
            if lo > hi or lo < -self.M + 1 or hi > self.M:
                raise ValueError(f"invalid atomistic block {self.block} for M={self.M}")
            object.__setattr__(self, "block", (lo, hi))

    @classmethod
    def all_atomistic(cls, M: int) -> "Partition":
        return cls(M, (-M + 1, M))

    @classmethod
    def all_continuum(cls, M: int) -> "Partition":
        return cls(M, None)

    def is_atomistic(self, i: int) -> bool:
        return self.block is not None and self.block[0] <= i <= self.block[1]

    @property
    def delta_a(self) -> np.ndarray:
        """Flags ``delta^a_i`` in storage order."""
        i = np.arange(-self.M + 1, self.M + 1)
        if self.block is None:
            return np.zeros(i.size, dtype=int)
        return ((i >= self.block[0]) & (i <= self.block[1])).astype(int)

    @property
    def delta_c(self) -> np.ndarray:
        return 1 - self.delta_a


def _check_y(params: ModelParams, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (params.n_atoms,):
        raise ValueError(f"expected an atom vector of length {params.n_atoms}, got {y.shape}")
    return y


def _atom_terms(params: ModelParams, i: int, atomistic: bool):
    """Spring terms of one atom energy as ``(left, right, modulus/4, rest)``."""
    a0 = params.a0
    if atomistic:
        k = params.k1
        terms = [(i - 1, i, k, a0), (i, i + 1, k, a0),
                 (i - 2, i, params.k2, 2 * a0), (i, i + 2, params.k2, 2 * a0)]
    else:
        k = params.k12
        terms = [(i - 1, i, k, a0), (i, i + 1, k, a0)]
    return [(lft, rgt, 0.25 * mod, rest) for lft, rgt, mod, rest in terms]


def _atom_energy(params, y, i, atomistic):
    y = _check_y(params, y)
    s = params.offset(i)
    elastic = 0.0
    for lft, rgt, c, rest in _atom_terms(params, i, atomistic):
        if params.first <= lft and rgt <= params.last:
            elastic += c * (y[params.offset(rgt)] - y[params.offset(lft)] - rest) ** 2
    well = (i - 1) * params.a0 if i <= 0 else i * params.a0
    return elastic + 0.5 * params.k0 * (y[s] - well) ** 2


def atom_energy_atomistic(params: ModelParams, y, i: int) -> float:
    """Atomistic energy ``E^a_i`` of atom ``i`` (elastic NN/NNN + misfit).

    Springs reaching past either chain end are dropped.
    """
    return _atom_energy(params, y, i, True)


def atom_energy_continuum(params: ModelParams, y, i: int) -> float:
    """Continuum energy ``E^c_i``: NN springs with modulus ``k12`` + misfit."""
    return _atom_energy(params, y, i, False)


def energy_ac(params: ModelParams, partition: Partition, y) -> float:
    """Atomistic-continuum energy by direct summation over atoms."""
    if partition.M != params.M:
        raise ValueError("partition and params disagree on M")
    y = _check_y(params, y)
    total = 0.0
    for i in range(params.first, params.last + 1):
        if partition.is_atomistic(i):
            total += atom_energy_atomistic(params, y, i)
        else:
            total += atom_energy_continuum(params, y, i)
    return total


@dataclass(frozen=True)
class QuadraticEnergy:
    """Quadratic energy ``E(y) = E(0) + b.y + y.H.y/2`` on the full chain.

    Stored as spring lists so that the gradient is evaluated from
    elongations rather than from ``H @ y``.  ``ghost_*`` hold springs whose
    partner atom lies outside the chain at a fixed position (only present
    when assembled with ``ghost=<position>``).
    """

    params: ModelParams
    hessian: sp.csr_matrix
    left: np.ndarray
    right: np.ndarray
    stiffness: np.ndarray
    rest: np.ndarray
    ghost_atom: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    ghost_sign: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ghost_stiffness: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ghost_rest: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def bandwidth(self) -> int:
        coo = self.hessian.tocoo()
        return int(np.abs(coo.row - coo.col).max(initial=0))

    def _ghost_elongation(self, y):
        # sign = +1: ghost on the left, elongation y_p - ghost - d
        return self.ghost_sign * y[self.ghost_atom] - self.ghost_rest

    def value_at(self, y) -> float:
        y = _check_y(self.params, y)
        e = y[self.right] - y[self.left] - self.rest
        u = y - self.params.wells()
        g = self._ghost_elongation(y)
        return float(
            np.sum(self.stiffness * e * e)
            + 0.5 * self.params.k0 * np.sum(u * u)
            + np.sum(self.ghost_stiffness * g * g)
        )

    def gradient_at(self, y) -> np.ndarray:
        y = _check_y(self.params, y)
        e = y[self.right] - y[self.left] - self.rest
        f = 2.0 * self.stiffness * e
        grad = self.params.k0 * (y - self.params.wells())
        np.add.at(grad, self.right, f)
        np.add.at(grad, self.left, -f)
        if self.ghost_atom.size:
            g = 2.0 * self.ghost_stiffness * self._ghost_elongation(y) * self.ghost_sign
            np.add.at(grad, self.ghost_atom, g)
        return grad

    def quadratic_form(self, y) -> float:
        """Evaluate the Taylor form ``E(0) + b.y + y.H.y/2`` (for cross-checks)."""
        y = _check_y(self.params, y)
        zero = np.zeros_like(y)
        return float(self.value_at(zero) + self.gradient_at(zero) @ y
                     + 0.5 * y @ (self.hessian @ y))


def assemble_quadratic(params: ModelParams, partition: Partition,
                       ghost: Optional[float] = None) -> QuadraticEnergy:
    """Assemble the exact Hessian and spring lists of ``E^ac``.

    With ``ghost=None`` springs that reference a nonexistent atom are dropped.
    Passing a number keeps them with the missing partner frozen at that
    position; since only the clamped end atoms are affected, the restricted
    systems are unchanged either way.
    """
    if partition.M != params.M:
        raise ValueError("partition and params disagree on M")
    lefts, rights, stiff, rests = [], [], [], []
    g_atom, g_sign, g_stiff, g_rest = [], [], [], []
    for i in range(params.first, params.last + 1):
        for lft, rgt, c, rest in _atom_terms(params, i, partition.is_atomistic(i)):
            lin, rin = params.first <= lft, rgt <= params.last
            if lin and rin:
                lefts.append(params.offset(lft))
                rights.append(params.offset(rgt))
                stiff.append(c)
                rests.append(rest)
            elif ghost is not None:
                # the in-range endpoint is always atom i
                g_atom.append(params.offset(i))
                g_stiff.append(c)
                if lin:  # right partner missing: (ghost - y_i - d)^2 = (y_i - ghost + d)^2
                    g_sign.append(-1.0)
                    g_rest.append(rest - ghost)
                else:
                    g_sign.append(1.0)
                    g_rest.append(rest + ghost)
    lefts = np.asarray(lefts, dtype=int)
    rights = np.asarray(rights, dtype=int)
    stiff = np.asarray(stiff, dtype=float)
    rests = np.asarray(rests, dtype=float)

    n = params.n_atoms
    rows = np.concatenate([lefts, rights, lefts, rights, np.arange(n), np.asarray(g_atom, dtype=int)])
    cols = np.concatenate([lefts, rights, rights, lefts, np.arange(n), np.asarray(g_atom, dtype=int)])
    vals = np.concatenate([2 * stiff, 2 * stiff, -2 * stiff, -2 * stiff,
                           np.full(n, float(params.k0)), 2 * np.asarray(g_stiff, dtype=float)])
    hessian = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    hessian.sort_indices()
    return QuadraticEnergy(
        params=params,
        hessian=hessian,
        left=lefts,
        right=rights,
        stiffness=stiff,
        rest=rests,
        ghost_atom=np.asarray(g_atom, dtype=int),
        ghost_sign=np.asarray(g_sign, dtype=float),
        ghost_stiffness=np.asarray(g_stiff, dtype=float),
        ghost_rest=np.asarray(g_rest, dtype=float),
    )
