"""Cosets of finite subgroups inside a cyclic universe Z/L.

A locally cyclic group only ever touches finitely many finite subgroups in a
computation, and those all embed into one Z/L with L the lcm of their orders.
The subgroup of order ``d`` is ``H_d = (L/d) Z / L Z``; a coset ``r + H_d`` is
stored as ``(d, r)`` with ``0 <= r < L/d``.

Scalar helpers operate on :class:`Coset` values; the ``*_arrays`` variants do
the same algebra on numpy arrays of orders/residues for the sampler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "UniverseMismatch",
    "ModulusOverflow",
    "GroupUniverse",
    "Coset",
    "coset_product",
    "coset_phi",
    "sample_uniform",
    "closure_modulus",
    "product_arrays",
    "phi_arrays",
]

# residues, products and CRT intermediates must stay inside int64
MAX_MODULUS = 2**31


class UniverseMismatch(ValueError):
    pass


class ModulusOverflow(OverflowError):
    pass


@dataclass(frozen=True)
class GroupUniverse:
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError("modulus must be >= 1")

    def subgroup_index(self, order: int) -> int:
        if self.modulus % order:
            raise ValueError(f"order {order} does not divide {self.modulus}")
        return self.modulus // order

    def coset(self, order: int, residue: int) -> "Coset":
        return Coset(self, order, residue % self.subgroup_index(order))

    def coset_of(self, x: int, order: int) -> "Coset":
        """The coset ``x + H_order``."""
        return self.coset(order, x)


@dataclass(frozen=True)
class Coset:
    universe: GroupUniverse
    order: int
    residue: int

    def __post_init__(self):
        L = self.universe.modulus
        if self.order < 1 or L % self.order:
            raise ValueError(f"order {self.order} does not divide {L}")
        if not 0 <= self.residue < L // self.order:
            raise ValueError(f"residue {self.residue} out of range for order {self.order}")

    @property
    def index(self) -> int:
        return self.universe.modulus // self.order

    def __contains__(self, x: int) -> bool:
        return (x - self.residue) % self.index == 0

    def elements(self) -> list[int]:
        m = self.index
        return [self.residue + k * m for k in range(self.order)]

    def __len__(self) -> int:
        return self.order


def _same_universe(a: Coset, b: Coset) -> GroupUniverse:
    if a.universe != b.universe:
        raise UniverseMismatch(f"{a.universe} vs {b.universe}")
    return a.universe


def coset_product(a: Coset, b: Coset) -> Coset:
    """Setwise sum ``a + b``: a coset of the subgroup generated by both."""
    U = _same_universe(a, b)
    return U.coset(math.lcm(a.order, b.order), a.residue + b.residue)


def _crt(r1: int, m1: int, r2: int, m2: int) -> tuple[int, int] | None:
    """Solve x = r1 (mod m1), x = r2 (mod m2); returns (x, lcm) or None."""
    g = math.gcd(m1, m2)
    if (r2 - r1) % g:
        return None
    l = m1 // g * m2
    t = ((r2 - r1) // g) * pow(m1 // g, -1, m2 // g) % (m2 // g)
    return (r1 + m1 * t) % l, l


def coset_phi(u: int, a: Coset, b: Coset) -> tuple[Coset, bool]:
    """Plus side-information: ``(u - a) ∩ b`` with ``u - a`` read as ``u - r_a + H_a``.

    Returns ``(coset, empty)``.  An empty intersection yields the trivial coset
    ``{0}`` with ``empty=True``; for ``u`` drawn from the transform this never
    happens.
    """
    U = _same_universe(a, b)
    sol = _crt((u - a.residue) % a.index, a.index, b.residue, b.index)
    if sol is None:
        return U.coset(1, 0), True
    x, _ = sol
    return U.coset(math.gcd(a.order, b.order), x), False


def sample_uniform(c: Coset, rng: np.random.Generator) -> int:
    return c.residue + int(rng.integers(c.order)) * c.index


def closure_modulus(orders: Iterable[int], limit: int = MAX_MODULUS) -> GroupUniverse:
    """Smallest universe Z/L holding subgroups of every given order."""
    orders = list(orders)
    if not orders:
        raise ValueError("closure_modulus needs at least one order")
    L = 1
    for d in orders:
        if d < 1:
            raise ValueError(f"subgroup orders must be positive, got {d}")
        L = math.lcm(L, d)
        if L > limit:
            raise ModulusOverflow(f"lcm of orders exceeds the integer budget {limit}")
    return GroupUniverse(L)


# -- vectorized algebra (int64 arrays) ----------------------------------------

def product_arrays(L: int, da, ra, db, rb):
    d = np.lcm(da, db)
    return d, (ra + rb) % (L // d)


def _inverse_mod_arrays(a, m):
    # extended Euclid, elementwise; assumes gcd(a, m) == 1
    old_r, r = a % m, m.copy()
    old_s, s = np.ones_like(a), np.zeros_like(a)
    while (r != 0).any():
        nz = r != 0
        q = np.where(nz, old_r // np.where(nz, r, 1), 0)
        old_r, r = np.where(nz, r, old_r), np.where(nz, old_r - q * r, r)
        old_s, s = np.where(nz, s, old_s), np.where(nz, old_s - q * s, s)
    return old_s % m


def phi_arrays(L: int, u, da, ra, db, rb):
    """Vectorized :func:`coset_phi`; returns ``(order, residue, empty_mask)``."""
    ma, mb = L // da, L // db
    r1 = (u - ra) % ma
    g = np.gcd(ma, mb)
    empty = (rb - r1) % g != 0
    m1g, m2g = ma // g, mb // g
    inv = _inverse_mod_arrays(m1g % m2g, m2g)
    t = (((rb - r1) // g) % m2g) * inv % m2g
    lcm = m1g * mb
    x = (r1 + ma * t) % lcm
    d = np.gcd(da, db)
    x = np.where(empty, 0, x)
    d = np.where(empty, 1, d)
    return d, x % (L // d), empty
