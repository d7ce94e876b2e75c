"""Probability vectors over lattice elements and their transform calculus.

An :class:`EpsVector` gives, for each lattice element N, the probability that
the side information is a coset of N.  Two arithmetic backends are supported:
floats (default) and exact :class:`fractions.Fraction` masses (``exact=True``).

Entropies are returned in nats.  Because every entropy here is a rational
combination of ``log p`` over primes ``p``, :func:`entropy_coefficients`
gives an exact representation usable for equality checks in rational mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from numbers import Real
from typing import Mapping, Sequence

import numpy as np

from .lattice import FiniteLattice, LatticeError, m_set

__all__ = [
    "LatticeMismatch",
    "BadInterval",
    "InvalidVector",
    "EpsVector",
    "parse_probability",
    "minus_transform",
    "plus_transform",
    "minus_arrays",
    "plus_arrays",
    "entropy",
    "entropy_coefficients",
    "quotient_entropy",
    "theta",
    "beta",
    "chi",
    "interval_masks",
    "check_partition",
    "check_recursions",
    "random_vector",
    "random_grid_vectors",
    "partial_sum_arrays",
    "identity_battery",
    "FLOAT_TOL",
]

FLOAT_TOL = 1e-12


class LatticeMismatch(ValueError):
    pass


class BadInterval(LatticeError):
    pass


class InvalidVector(ValueError):
    pass


def parse_probability(x, exact: bool):
    """Accept floats, ints, Fractions, decimal strings or ``"p/q"`` strings."""
    if isinstance(x, bool):
        raise InvalidVector(f"not a probability: {x!r}")
    if isinstance(x, Fraction):
        q = x
    elif isinstance(x, int):
        q = Fraction(x)
    elif isinstance(x, str):
        try:
            q = Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise InvalidVector(f"cannot parse probability {x!r}") from None
    elif isinstance(x, Real):
        if not math.isfinite(x):
            raise InvalidVector(f"not a probability: {x!r}")
        # decimal reading keeps 0.3 == 3/10 in exact mode
        q = Fraction(repr(float(x)))
    else:
        raise InvalidVector(f"not a probability: {x!r}")
    return q if exact else float(q)


class EpsVector:
    """Finitely supported probability vector indexed by lattice elements."""

    __slots__ = ("lattice", "masses", "exact")

    def __init__(self, lattice: FiniteLattice, masses: Sequence, exact: bool = False,
                 check: bool = True):
        if len(masses) != lattice.size:
            raise InvalidVector(f"expected {lattice.size} masses, got {len(masses)}")
        self.lattice = lattice
        self.exact = exact
        if exact:
            self.masses = tuple(m if isinstance(m, Fraction) else parse_probability(m, True)
                                for m in masses)
        else:
            self.masses = tuple(float(m) for m in masses)
        if check:
            self._validate()

    def _validate(self) -> None:
        for e, m in zip(self.lattice.elements, self.masses):
            if m < 0 or m > 1:
                raise InvalidVector(f"mass of {e!r} is {m}, outside [0, 1]")
        total = sum(self.masses) if self.exact else math.fsum(self.masses)
        if self.exact and total != 1:
            raise InvalidVector(f"masses sum to {total}, not 1")
        if not self.exact and abs(total - 1.0) > FLOAT_TOL:
            raise InvalidVector(f"masses sum to {total!r}, not 1")

    @classmethod
    def from_mapping(cls, lattice: FiniteLattice, mapping: Mapping, exact: bool = False,
                     normalize: bool = False) -> "EpsVector":
        masses = [Fraction(0) if exact else 0.0] * lattice.size
        for key, value in mapping.items():
            masses[lattice.idx(key)] += parse_probability(value, exact)
        if normalize:
            total = sum(masses)
            if total <= 0:
                raise InvalidVector("cannot normalize a vector with zero total mass")
            masses = [m / total for m in masses]
        return cls(lattice, masses, exact)

    @classmethod
    def point(cls, lattice: FiniteLattice, element, exact: bool = False) -> "EpsVector":
        one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
        i = lattice.idx(element)
        return cls(lattice, [one if k == i else zero for k in range(lattice.size)], exact)

    @classmethod
    def from_array(cls, lattice: FiniteLattice, arr) -> "EpsVector":
        return cls(lattice, list(np.asarray(arr, dtype=float)), exact=False)

    def __getitem__(self, element):
        return self.masses[self.lattice.idx(element)]

    def __iter__(self):
        return iter(zip(self.lattice.elements, self.masses))

    def __eq__(self, other) -> bool:
        return (isinstance(other, EpsVector) and other.lattice is self.lattice
                and other.masses == self.masses)

    def __hash__(self):
        return hash((id(self.lattice), self.masses))

    def __repr__(self) -> str:
        body = ", ".join(f"{e!r}: {m}" for e, m in self if m)
        return f"EpsVector({{{body}}})"

    def as_dict(self, nonzero: bool = True) -> dict:
        return {e: m for e, m in self if m or not nonzero}

    def support(self) -> list[int]:
        """Indices (not elements) carrying positive mass."""
        return [i for i, m in enumerate(self.masses) if m]

    def array(self) -> np.ndarray:
        return np.array([float(m) for m in self.masses])

    def to_float(self) -> "EpsVector":
        return self if not self.exact else EpsVector(self.lattice, [float(m) for m in self.masses])

    def to_exact(self) -> "EpsVector":
        return self if self.exact else EpsVector(self.lattice, self.masses, exact=True)

    def allclose(self, other: "EpsVector", tol: float = 1e-12) -> bool:
        _same_lattice(self, other)
        return all(abs(float(a) - float(b)) <= tol for a, b in zip(self.masses, other.masses))


def _same_lattice(e1: EpsVector, e2: EpsVector) -> FiniteLattice:
    if e1.lattice is not e2.lattice and (
            e1.lattice.elements != e2.lattice.elements
            or not np.array_equal(e1.lattice.leq_table, e2.lattice.leq_table)):
        raise LatticeMismatch("vectors live on different lattices")
    return e1.lattice


def _combine(e1: EpsVector, e2: EpsVector, table: np.ndarray) -> EpsVector:
    lat = _same_lattice(e1, e2)
    exact = e1.exact and e2.exact
    if exact:
        out = [Fraction(0)] * lat.size
    else:
        out = [0.0] * lat.size
        e1, e2 = e1.to_float(), e2.to_float()
    m1, m2 = e1.masses, e2.masses
    s2 = e2.support()
    for k in e1.support():
        row = table[k]
        for l in s2:
            out[row[l]] += m1[k] * m2[l]
    return EpsVector(lat, out, exact=exact, check=False)


def minus_transform(e1: EpsVector, e2: EpsVector) -> EpsVector:
    """Distribution of the subgroup behind ``Y1 + Y2``: mass flows to ``k v l``."""
    return _combine(e1, e2, _same_lattice(e1, e2).join_table)


def plus_transform(e1: EpsVector, e2: EpsVector) -> EpsVector:
    """Distribution of the subgroup behind the plus side-information: ``k ^ l``."""
    return _combine(e1, e2, _same_lattice(e1, e2).meet_table)


def _pair_lists(table: np.ndarray) -> list[list[tuple[int, int]]]:
    s = table.shape[0]
    out: list[list[tuple[int, int]]] = [[] for _ in range(s)]
    for k in range(s):
        for l in range(s):
            out[table[k, l]].append((k, l))
    return out


def _combine_arrays(A: np.ndarray, B: np.ndarray, table: np.ndarray) -> np.ndarray:
    # fixed-order elementwise accumulation: row results do not depend on how rows are chunked
    out = np.zeros_like(A)
    for j, pairs in enumerate(_pair_lists(table)):
        acc = out[..., j]
        for k, l in pairs:
            acc += A[..., k] * B[..., l]
    return out


def minus_arrays(A: np.ndarray, B: np.ndarray, lat: FiniteLattice) -> np.ndarray:
    """Row-wise :func:`minus_transform` on float arrays of shape ``(..., |L|)``."""
    return _combine_arrays(A, B, lat.join_table)


def plus_arrays(A: np.ndarray, B: np.ndarray, lat: FiniteLattice) -> np.ndarray:
    return _combine_arrays(A, B, lat.meet_table)


def entropy(e: EpsVector) -> float:
    """Conditional entropy (nats) of an erasure source with this vector."""
    logs = e.lattice.log_orders
    return math.fsum(float(m) * logs[i] for i, m in enumerate(e.masses) if m)


def entropy_coefficients(e: EpsVector) -> dict[int, Fraction | float]:
    """Entropy as ``{p: c_p}`` with entropy ``= sum_p c_p log p`` (exact if ``e`` is)."""
    out: dict = {}
    for i, m in enumerate(e.masses):
        if not m:
            continue
        for p, k in e.lattice.prime_exponents[i].items():
            out[p] = out.get(p, 0) + k * m
    return {p: c for p, c in sorted(out.items()) if c}


def quotient_entropy(e: EpsVector, N) -> float:
    """Entropy of ``U + N`` given the side information.

    ``U`` is uniform on a coset of ``H``, so ``U + N`` is uniform over
    ``|H v N| / |N|`` cosets of ``N``.
    """
    lat = e.lattice
    n = lat.idx(N)
    join = lat.join_table[:, n]
    logs = lat.log_orders
    return math.fsum(float(m) * (logs[join[i]] - logs[n]) for i, m in enumerate(e.masses) if m)


@dataclass(frozen=True)
class IntervalMasks:
    a: object
    b: object
    mids: tuple
    theta: np.ndarray
    beta: np.ndarray
    chi: dict = field(default_factory=dict)


def _interval(lat: FiniteLattice, a, b, admissible: bool) -> tuple:
    if not lat.lt(a, b):
        raise BadInterval(f"need {a!r} < {b!r}")
    mids = tuple(m_set(lat, a, b))
    if admissible:
        ix = [lat.idx(c) for c in mids]
        if ix and lat.lt_table[np.ix_(ix, ix)].any():
            raise BadInterval(f"interval ({a!r}, {b!r}) contains a chain a < x < y < b")
    return mids


@lru_cache(maxsize=4096)
def _masks(lat: FiniteLattice, a, b) -> IntervalMasks:
    J, M = lat.join_table, lat.meet_table
    ia, ib = lat.idx(a), lat.idx(b)
    mids = tuple(m_set(lat, a, b))
    th = J[:, ia] == J[:, ib]
    be = M[:, ia] == M[:, ib]
    chis = {}
    for c in mids:
        ic = lat.idx(c)
        chis[c] = (J[:, ia] == J[:, ic]) & (M[:, ib] == M[:, ic])
    return IntervalMasks(a, b, mids, th, be, chis)


def interval_masks(lat: FiniteLattice, a, b, admissible: bool = False) -> IntervalMasks:
    """Boolean masks selecting the elements summed by theta, beta and chi(c)."""
    _interval(lat, a, b, admissible)
    return _masks(lat, a, b)


def _masked_sum(e: EpsVector, mask: np.ndarray):
    vals = [m for m, keep in zip(e.masses, mask) if keep]
    if e.exact:
        return sum(vals, Fraction(0))
    return math.fsum(vals)


def theta(e: EpsVector, a, b):
    """Mass on ``{j : j v a = j v b}``."""
    return _masked_sum(e, interval_masks(e.lattice, a, b).theta)


def beta(e: EpsVector, a, b):
    """Mass on ``{j : j ^ a = j ^ b}``."""
    return _masked_sum(e, interval_masks(e.lattice, a, b).beta)


def chi(e: EpsVector, a, c, b):
    """Mass on ``{j : j v a = j v c, j ^ b = j ^ c}`` for ``a < c < b``."""
    masks = interval_masks(e.lattice, a, b)
    if c not in masks.chi:
        raise BadInterval(f"{c!r} is not strictly between {a!r} and {b!r}")
    return _masked_sum(e, masks.chi[c])


def _sums(e: EpsVector, masks: IntervalMasks):
    return (_masked_sum(e, masks.theta), _masked_sum(e, masks.beta),
            {c: _masked_sum(e, m) for c, m in masks.chi.items()})


def check_partition(e: EpsVector, a, b, tol: float = FLOAT_TOL) -> bool:
    """theta + beta + sum of chi over the open interval equals one."""
    masks = interval_masks(e.lattice, a, b, admissible=True)
    th, be, ch = _sums(e, masks)
    total = th + be + sum(ch.values())
    if e.exact:
        return total == 1
    return abs(total - 1.0) <= tol


@dataclass
class IdentityReport:
    """Both sides of every one-step identity, keyed by name."""
    exact: bool
    sides: dict[str, tuple] = field(default_factory=dict)
    printed_chi_sum: dict = field(default_factory=dict)

    def discrepancy(self, name: str):
        lhs, rhs = self.sides[name]
        return abs(lhs - rhs)

    @property
    def max_discrepancy(self):
        if not self.sides:
            return Fraction(0) if self.exact else 0.0
        return max(self.discrepancy(k) for k in self.sides)

    def ok(self, tol: float = FLOAT_TOL) -> bool:
        if self.exact:
            return self.max_discrepancy == 0
        return self.max_discrepancy <= tol


def check_recursions(e1: EpsVector, e2: EpsVector, a, b) -> IdentityReport:
    """Evaluate the one-step recursions of theta/beta/chi and their sum forms.

    Left-hand sides come from the actual transform outputs; right-hand sides
    are the recursions in the input sums.  The chi-sum identity is evaluated
    with the sibling reading ``chi1(c)(1 - chi2(c')) + chi2(c)(1 - chi1(c'))``
    where ``c'`` ranges over the other elements of the interval; the
    same-element reading is kept in ``printed_chi_sum`` for reference only.
    """
    lat = _same_lattice(e1, e2)
    masks = interval_masks(lat, a, b, admissible=True)
    exact = e1.exact and e2.exact
    if not exact:
        e1, e2 = e1.to_float(), e2.to_float()
    lo, hi = minus_transform(e1, e2), plus_transform(e1, e2)
    t1, b1, c1 = _sums(e1, masks)
    t2, b2, c2 = _sums(e2, masks)
    tm, bm, cm = _sums(lo, masks)
    tp, bp, cp = _sums(hi, masks)
    mids = masks.mids
    C = sum((c1[x] * c2[y] for x in mids for y in mids if x != y), Fraction(0) if exact else 0.0)

    rep = IdentityReport(exact=exact)
    rep.sides["theta_minus"] = (tm, t1 + t2 - t1 * t2 + C)
    rep.sides["beta_minus"] = (bm, b1 * b2)
    rep.sides["theta_plus"] = (tp, t1 * t2)
    rep.sides["beta_plus"] = (bp, b1 + b2 - b1 * b2 + C)
    rep.sides["theta_sum"] = (tm + tp, t1 + t2 + C)
    rep.sides["beta_sum"] = (bm + bp, b1 + b2 + C)
    for c in mids:
        rep.sides[f"chi_minus[{c!r}]"] = (cm[c], c1[c] * c2[c] + c1[c] * b2 + b1 * c2[c])
        rep.sides[f"chi_plus[{c!r}]"] = (cp[c], c1[c] * c2[c] + c1[c] * t2 + t1 * c2[c])
        o1 = sum((c1[x] for x in mids if x != c), Fraction(0) if exact else 0.0)
        o2 = sum((c2[x] for x in mids if x != c), Fraction(0) if exact else 0.0)
        rep.sides[f"chi_sum[{c!r}]"] = (cm[c] + cp[c], c1[c] * (1 - o2) + c2[c] * (1 - o1))
        rep.printed_chi_sum[c] = (cm[c] + cp[c], c1[c] * (1 - c2[c]) + c2[c] * (1 - c1[c]))
    return rep


def random_vector(lat: FiniteLattice, rng: np.random.Generator, exact: bool = False,
                  denominator: int = 720, sparsity: float = 0.3) -> EpsVector:
    """Random point of the simplex; some coordinates are zeroed at random.

    Exact vectors have masses on the grid ``1/denominator``.
    """
    s = lat.size
    keep = rng.random(s) >= sparsity
    if not keep.any():
        keep[rng.integers(s)] = True
    k = int(keep.sum())
    if exact:
        cuts = np.sort(rng.integers(0, denominator + 1, size=k - 1))
        parts = np.diff(np.concatenate([[0], cuts, [denominator]]))
        vals = iter(Fraction(int(p), denominator) for p in parts)
        masses = [next(vals) if keep[i] else Fraction(0) for i in range(s)]
    else:
        w = rng.dirichlet(np.ones(k))
        vals = iter(w)
        masses = [float(next(vals)) if keep[i] else 0.0 for i in range(s)]
        # pin the float sum to 1 exactly so transforms start from a clean vector
        j = max(range(s), key=lambda i: masses[i])
        masses[j] = 1.0 - math.fsum(m for i, m in enumerate(masses) if i != j)
    return EpsVector(lat, masses, exact=exact)


# -- batch identity checks ------------------------------------------------------
#
# Rows of X hold numerators over a common ``unit`` (``unit=1.0`` for floats; an
# integer grid ``1/unit`` for exact rationals).  Every identity below is
# polynomial in the masses, so after scaling both sides by the same power of
# ``unit`` the integer version is an exact rational check.

def random_grid_vectors(lat: FiniteLattice, rng: np.random.Generator, count: int,
                        unit: int = 720, sparsity: float = 0.3) -> np.ndarray:
    """``count`` random integer rows summing to ``unit`` (masses ``row / unit``)."""
    s = lat.size
    keep = rng.random((count, s)) >= sparsity
    keep[np.arange(count), rng.integers(s, size=count)] = True
    cuts = np.sort(rng.integers(0, unit + 1, size=(count, s - 1)), axis=1)
    parts = np.diff(np.concatenate([np.zeros((count, 1), np.int64), cuts,
                                    np.full((count, 1), unit, np.int64)], axis=1), axis=1)
    # move mass of dropped coordinates onto the first kept one
    out = np.where(keep, parts, 0)
    lost = unit - out.sum(axis=1)
    first = keep.argmax(axis=1)
    out[np.arange(count), first] += lost
    return out.astype(np.int64)


def partial_sum_arrays(X: np.ndarray, lat: FiniteLattice, a, b):
    """Row-wise theta, beta and ``{c: chi(c)}`` for the interval ``(a, b)``."""
    masks = interval_masks(lat, a, b)
    return (X[:, masks.theta].sum(axis=1), X[:, masks.beta].sum(axis=1),
            {c: X[:, m].sum(axis=1) for c, m in masks.chi.items()})


def identity_battery(X1: np.ndarray, X2: np.ndarray, lat: FiniteLattice, unit=1.0,
                  intervals=None) -> dict:
    """Largest discrepancy of every identity over all rows and intervals.

    Returns ``{name: (max_abs_discrepancy, witness)}``; the witness is
    ``(row, a, b)`` where the maximum occurs.  Integer input with integer
    ``unit`` gives exact results.
    """
    from .lattice import admissible_intervals

    if intervals is None:
        intervals = admissible_intervals(lat)
    lo = minus_arrays(X1, X2, lat)
    hi = plus_arrays(X1, X2, lat)
    u, u2 = unit, unit * unit
    worst: dict = {}

    def note(name, diff, a, b):
        diff = np.abs(diff)
        r = int(diff.argmax())
        v = diff[r]
        if name not in worst or v > worst[name][0]:
            worst[name] = (v.item(), (r, a, b))

    zero = np.zeros(len(X1), dtype=X1.dtype)
    for a, b in intervals:
        t1, b1, c1 = partial_sum_arrays(X1, lat, a, b)
        t2, b2, c2 = partial_sum_arrays(X2, lat, a, b)
        tm, bm, cm = partial_sum_arrays(lo, lat, a, b)
        tp, bp, cp = partial_sum_arrays(hi, lat, a, b)
        mids = list(c1)
        C = zero.copy()
        for x in mids:
            for y in mids:
                if x != y:
                    C = C + c1[x] * c2[y]
        note("partition", t1 + b1 + sum(c1.values(), zero) - u, a, b)
        note("partition", tm + bm + sum(cm.values(), zero) - u2, a, b)
        note("partition", tp + bp + sum(cp.values(), zero) - u2, a, b)
        note("theta_minus", tm - (u * t1 + u * t2 - t1 * t2 + C), a, b)
        note("beta_minus", bm - b1 * b2, a, b)
        note("theta_plus", tp - t1 * t2, a, b)
        note("beta_plus", bp - (u * b1 + u * b2 - b1 * b2 + C), a, b)
        note("theta_sum", tm + tp - (u * (t1 + t2) + C), a, b)
        note("beta_sum", bm + bp - (u * (b1 + b2) + C), a, b)
        for c in mids:
            o1 = sum((c1[x] for x in mids if x != c), zero)
            o2 = sum((c2[x] for x in mids if x != c), zero)
            note("chi_minus", cm[c] - (c1[c] * c2[c] + c1[c] * b2 + b1 * c2[c]), a, b)
            note("chi_plus", cp[c] - (c1[c] * c2[c] + c1[c] * t2 + t1 * c2[c]), a, b)
            note("chi_sum", cm[c] + cp[c] - (c1[c] * (u - o2) + c2[c] * (u - o1)), a, b)
    logs = lat.log_orders
    if np.issubdtype(X1.dtype, np.integer):
        # compare entropies as exact integer combinations of log p
        P = _prime_exponent_matrix(lat)
        lhs = lo @ P + hi @ P
        rhs = u * (X1 @ P) + u * (X2 @ P)
        note("entropy_conservation", (lhs - rhs).max(axis=1), None, None)
        note("entropy_conservation", (lhs - rhs).min(axis=1), None, None)
    else:
        h1, h2, hm, hp = X1 @ logs, X2 @ logs, lo @ logs, hi @ logs
        note("entropy_conservation", hm + hp - h1 - h2, None, None)
    note("closure", lo.sum(axis=1) - u2, None, None)
    note("closure", hi.sum(axis=1) - u2, None, None)
    return worst


def _prime_exponent_matrix(lat: FiniteLattice) -> np.ndarray:
    primes = sorted({p for exps in lat.prime_exponents for p in exps})
    P = np.zeros((lat.size, max(1, len(primes))), dtype=np.int64)
    for i, exps in enumerate(lat.prime_exponents):
        for j, p in enumerate(primes):
            P[i, j] = exps.get(p, 0)
    return P
