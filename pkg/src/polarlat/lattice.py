"""Finite lattices of subgroups: divisor lattices, chains, and explicit Hasse diagrams.

Every lattice here stands for the lattice of finite normal subgroups of a
locally cyclic group (restricted to a finite piece of it).  Elements carry an
``order_of`` value, the order of the subgroup they represent.

Elements are stored in canonical order (ascending subgroup order, then id) and
all operations go through dense integer tables indexed by that order, so
``join``/``meet`` on element indices are single array lookups.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "LatticeError",
    "NotALattice",
    "NotDistributive",
    "BadOrderMap",
    "IncomparablePair",
    "FiniteLattice",
    "DistributiveLattice",
    "LawViolation",
    "LawReport",
    "divisor_lattice",
    "chain_lattice",
    "explicit_lattice",
    "raw_lattice",
    "m_set",
    "s_set",
    "sublattice",
    "admissible_intervals",
    "verify_laws",
    "is_prime",
    "divisors",
    "prime_factors",
]


class LatticeError(ValueError):
    pass


class NotALattice(LatticeError):
    pass


class NotDistributive(LatticeError):
    pass


class BadOrderMap(LatticeError):
    pass


class IncomparablePair(LatticeError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def divisors(n: int) -> list[int]:
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def prime_factors(n: int) -> dict[int, int]:
    """Prime factorization of ``n`` as ``{prime: exponent}``."""
    out: dict[int, int] = {}
    f = 2
    while f * f <= n:
        while n % f == 0:
            out[f] = out.get(f, 0) + 1
            n //= f
        f += 1
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def _id_key(x):
    # ids within one lattice are either all ints or mixed; fall back to str
    return (0, x, "") if isinstance(x, int) and not isinstance(x, bool) else (1, 0, str(x))


class FiniteLattice:
    """A finite lattice given by its order relation.

    Join and meet are derived from ``leq`` and precomputed into tables.  No
    distributivity or order-map checks are made here; that is the job of
    :class:`DistributiveLattice` and :func:`verify_laws`.
    """

    def __init__(self, elements: Sequence[Hashable], leq: np.ndarray,
                 order_of: Mapping[Hashable, int], name: str = "lattice"):
        elements = list(elements)
        if len(set(elements)) != len(elements):
            raise LatticeError("duplicate element ids")
        if not elements:
            raise LatticeError("a lattice needs at least one element")
        missing = [e for e in elements if e not in order_of]
        if missing:
            raise BadOrderMap(f"no order given for {missing!r}")
        perm = sorted(range(len(elements)),
                      key=lambda i: (int(order_of[elements[i]]), _id_key(elements[i])))
        leq = np.asarray(leq, dtype=bool)[np.ix_(perm, perm)]
        self.name = name
        self.elements: tuple = tuple(elements[i] for i in perm)
        self.index: dict = {e: i for i, e in enumerate(self.elements)}
        self.orders: tuple[int, ...] = tuple(int(order_of[e]) for e in self.elements)
        self.size = len(self.elements)
        self.leq_table = leq
        self.lt_table = leq & ~np.eye(self.size, dtype=bool)
        self._check_partial_order()
        self.join_table, self.meet_table = self._bounds_tables()
        bottoms = [i for i in range(self.size) if leq[i].all()]
        tops = [i for i in range(self.size) if leq[:, i].all()]
        if len(bottoms) != 1 or len(tops) != 1:
            raise NotALattice("lattice must have a unique bottom and top")
        self.bottom_index, self.top_index = bottoms[0], tops[0]
        self.log_orders = np.log(np.array(self.orders, dtype=float))
        self.prime_exponents: tuple[dict[int, int], ...] = tuple(prime_factors(o) for o in self.orders)
        self.cover_table = self.lt_table & ~((self.lt_table.astype(np.int64) @ self.lt_table.astype(np.int64)) > 0)

    # -- construction helpers -------------------------------------------------
    def _check_partial_order(self) -> None:
        leq = self.leq_table
        if not leq.diagonal().all():
            raise NotALattice("order relation is not reflexive")
        if (leq & leq.T & ~np.eye(self.size, dtype=bool)).any():
            raise NotALattice("order relation is not antisymmetric (cycle in covers)")
        li = leq.astype(np.int64)
        if (((li @ li) > 0) & ~leq).any():
            raise NotALattice("order relation is not transitive")

    def _bounds_tables(self) -> tuple[np.ndarray, np.ndarray]:
        s = self.size
        leq = self.leq_table
        join = np.empty((s, s), dtype=np.int64)
        meet = np.empty((s, s), dtype=np.int64)
        for a in range(s):
            for b in range(a, s):
                ub = np.flatnonzero(leq[a] & leq[b])
                least = [u for u in ub if leq[u, ub].all()]
                lb = np.flatnonzero(leq[:, a] & leq[:, b])
                greatest = [v for v in lb if leq[lb, v].all()]
                if len(least) != 1 or len(greatest) != 1:
                    raise NotALattice(
                        f"{self.elements[a]!r} and {self.elements[b]!r} have no unique join/meet")
                join[a, b] = join[b, a] = least[0]
                meet[a, b] = meet[b, a] = greatest[0]
        return join, meet

    # -- element-level API ----------------------------------------------------
    @property
    def bottom(self):
        return self.elements[self.bottom_index]

    @property
    def top(self):
        return self.elements[self.top_index]

    def order_of(self, x) -> int:
        return self.orders[self.index[x]]

    def idx(self, x) -> int:
        try:
            return self.index[x]
        except KeyError:
            raise LatticeError(f"{x!r} is not an element of {self.name}") from None

    def join(self, a, b):
        return self.elements[self.join_table[self.idx(a), self.idx(b)]]

    def meet(self, a, b):
        return self.elements[self.meet_table[self.idx(a), self.idx(b)]]

    def leq(self, a, b) -> bool:
        return bool(self.leq_table[self.idx(a), self.idx(b)])

    def lt(self, a, b) -> bool:
        return bool(self.lt_table[self.idx(a), self.idx(b)])

    def covers(self, a) -> list:
        """Elements covering ``a``, in canonical order."""
        return [self.elements[j] for j in np.flatnonzero(self.cover_table[self.idx(a)])]

    def is_chain(self) -> bool:
        return bool((self.leq_table | self.leq_table.T).all())

    def cover_pairs(self) -> list[tuple]:
        return [(self.elements[i], self.elements[j]) for i, j in zip(*np.nonzero(self.cover_table))]

    def __contains__(self, x) -> bool:
        return x in self.index

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return self.size

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} |L|={self.size}>"


class DistributiveLattice(FiniteLattice):
    """A validated distributive lattice with a consistent subgroup-order map.

    Construction fails with :class:`NotDistributive` when either distributive
    law has a counterexample and with :class:`BadOrderMap` when
    ``|a v b| * |a ^ b| != |a| * |b|`` for some pair, or when orders do not
    divide along the order relation.
    """

    def __init__(self, elements, leq, order_of, name="lattice"):
        super().__init__(elements, leq, order_of, name)
        J, M = self.join_table, self.meet_table
        a, b, c = np.meshgrid(*(np.arange(self.size),) * 3, indexing="ij")
        bad = (J[a, M[b, c]] != M[J[a, b], J[a, c]]) | (M[a, J[b, c]] != J[M[a, b], M[a, c]])
        if bad.any():
            w = tuple(self.elements[i] for i in np.argwhere(bad)[0])
            raise NotDistributive(f"distributive law fails at {w!r}")
        _check_order_map(self)


def _check_order_map(lat: FiniteLattice) -> None:
    o = np.array(lat.orders, dtype=object)
    if lat.orders[lat.bottom_index] != 1:
        raise BadOrderMap("the bottom element must have order 1")
    if any(x < 1 for x in lat.orders):
        raise BadOrderMap("orders must be positive integers")
    for i, j in zip(*np.nonzero(lat.leq_table)):
        if lat.orders[j] % lat.orders[i]:
            raise BadOrderMap(
                f"order of {lat.elements[i]!r} does not divide order of {lat.elements[j]!r}")
    lhs = o[lat.join_table] * o[lat.meet_table]
    rhs = np.multiply.outer(o, o)
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        a, b = bad[0]
        raise BadOrderMap(
            f"|a v b||a ^ b| != |a||b| for a={lat.elements[a]!r}, b={lat.elements[b]!r}")


def _leq_from_covers(elements: Sequence, covers: Iterable[tuple]) -> np.ndarray:
    index = {e: i for i, e in enumerate(elements)}
    s = len(elements)
    reach = np.eye(s, dtype=bool)
    for lo, hi in covers:
        if lo not in index or hi not in index:
            raise LatticeError(f"cover ({lo!r}, {hi!r}) mentions an unknown element")
        reach[index[lo], index[hi]] = True
    # transitive closure by repeated squaring
    while True:
        nxt = (reach.astype(np.int64) @ reach.astype(np.int64)) > 0
        if (nxt == reach).all():
            return reach
        reach = nxt


def divisor_lattice(n: int) -> DistributiveLattice:
    """Subgroups of Z/nZ: divisors of ``n`` under lcm (join) and gcd (meet)."""
    if not isinstance(n, int) or n < 1:
        raise LatticeError(f"modulus must be a positive integer, got {n!r}")
    ds = divisors(n)
    leq = np.array([[b % a == 0 for b in ds] for a in ds], dtype=bool)
    return DistributiveLattice(ds, leq, {d: d for d in ds}, name=f"divisors({n})")


def chain_lattice(p: int, height: int) -> DistributiveLattice:
    """Finite subgroups of the Prüfer p-group up to order p**height.

    Elements are levels ``0..height``; level ``k`` has order ``p**k``.
    """
    if not is_prime(p):
        raise LatticeError(f"{p!r} is not prime")
    if height < 0:
        raise LatticeError("height must be nonnegative")
    ks = list(range(height + 1))
    leq = np.array([[a <= b for b in ks] for a in ks], dtype=bool)
    return DistributiveLattice(ks, leq, {k: p**k for k in ks}, name=f"chain({p},{height})")


def explicit_lattice(elements: Sequence, covers: Iterable[tuple],
                     order_of: Mapping) -> DistributiveLattice:
    leq = _leq_from_covers(list(elements), covers)
    return DistributiveLattice(list(elements), leq, dict(order_of), name="explicit")


def raw_lattice(elements: Sequence, covers: Iterable[tuple],
                order_of: Mapping | None = None) -> FiniteLattice:
    """Build a lattice without the distributivity/order checks (law testing only)."""
    elements = list(elements)
    if order_of is None:
        order_of = {e: 1 for e in elements}
    leq = _leq_from_covers(elements, covers)
    return FiniteLattice(elements, leq, dict(order_of), name="raw")


def sublattice(lat: DistributiveLattice, generators: Iterable) -> DistributiveLattice:
    """Smallest sublattice containing ``generators`` (closed under join and meet)."""
    idx = {lat.idx(g) for g in generators}
    if not idx:
        raise LatticeError("sublattice needs at least one generator")
    frontier = set(idx)
    while frontier:
        new = set()
        for a in frontier:
            for b in list(idx):
                for c in (lat.join_table[a, b], lat.meet_table[a, b]):
                    if c not in idx:
                        new.add(int(c))
        idx |= new
        frontier = new
    keep = sorted(idx)
    elems = [lat.elements[i] for i in keep]
    leq = lat.leq_table[np.ix_(keep, keep)]
    return DistributiveLattice(elems, leq, {e: lat.order_of(e) for e in elems},
                               name=f"sub({lat.name})")


def m_set(lat: FiniteLattice, a, b) -> list:
    """All ``c`` with ``a < c < b``, in canonical order."""
    i, j = lat.idx(a), lat.idx(b)
    if not lat.leq_table[i, j]:
        raise IncomparablePair(f"m_set needs {a!r} <= {b!r}")
    return [lat.elements[c] for c in np.flatnonzero(lat.lt_table[i] & lat.lt_table[:, j])]


def _has_inner_chain(lat: FiniteLattice, mids: Sequence) -> bool:
    ix = [lat.idx(c) for c in mids]
    return bool(lat.lt_table[np.ix_(ix, ix)].any()) if ix else False


def s_set(lat: FiniteLattice, k) -> list:
    """Overgroups exactly two covering steps above ``k``.

    ``h`` qualifies when some ``c`` has ``k < c < h`` and no two elements
    ``k < c1 < c2 < h`` exist.
    """
    i = lat.idx(k)
    out = []
    for j in np.flatnonzero(lat.lt_table[i]):
        mids = np.flatnonzero(lat.lt_table[i] & lat.lt_table[:, j])
        if len(mids) and not lat.lt_table[np.ix_(mids, mids)].any():
            out.append(lat.elements[j])
    return out


def admissible_intervals(lat: FiniteLattice) -> list[tuple]:
    """Pairs ``a < b`` with no chain ``a < x < y < b`` (covers and rank-2 intervals)."""
    out = []
    for i, j in zip(*np.nonzero(lat.lt_table)):
        mids = np.flatnonzero(lat.lt_table[i] & lat.lt_table[:, j])
        if not lat.lt_table[np.ix_(mids, mids)].any():
            out.append((lat.elements[i], lat.elements[j]))
    return out


@dataclass(frozen=True)
class LawViolation:
    law: str
    witness: tuple


@dataclass
class LawReport:
    lattice: str
    checked: dict[str, int] = field(default_factory=dict)
    violations: list[LawViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def laws_violated(self) -> set[str]:
        return {v.law for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "lattice": self.lattice,
            "ok": self.ok,
            "checked": dict(self.checked),
            "violations": [{"law": v.law, "witness": [repr(x) for x in v.witness]}
                           for v in self.violations],
        }


def verify_laws(lat: FiniteLattice, max_witnesses: int = 5) -> LawReport:
    """Exhaustively check lattice identities and list every violated law instance.

    Covers commutativity, associativity, absorption, order/operation
    consistency, modularity, both distributive laws, the meet-splitting
    equivalence for ``a <= b`` (``j^a = j^b and k^a = k^b`` iff
    ``(j v k)^a = (j v k)^b``), the subgroup-order identity, and the bound
    ``|M(a, b)| <= 2`` on admissible intervals.  At most ``max_witnesses``
    witnesses are kept per law; ``checked`` records instance counts.
    """
    J, M, L = lat.join_table, lat.meet_table, lat.leq_table
    s = lat.size
    E = lat.elements
    report = LawReport(lattice=lat.name)
    r = np.arange(s)

    def record(law: str, bad: np.ndarray, total: int) -> None:
        report.checked[law] = total
        for w in np.argwhere(bad)[:max_witnesses]:
            report.violations.append(LawViolation(law, tuple(E[i] for i in w)))

    a, b = np.meshgrid(r, r, indexing="ij")
    record("commutativity", (J != J.T) | (M != M.T), s * s)
    record("absorption", (J[a, M[a, b]] != a) | (M[a, J[a, b]] != a), s * s)
    record("order_consistency", (L != (M == a)) | (L != (J == b)), s * s)

    a3, b3, c3 = np.meshgrid(r, r, r, indexing="ij")
    record("associativity",
           (J[a3, J[b3, c3]] != J[J[a3, b3], c3]) | (M[a3, M[b3, c3]] != M[M[a3, b3], c3]), s**3)
    modular = L[a3, c3] & (J[a3, M[b3, c3]] != M[J[a3, b3], c3])
    record("modularity", modular, s**3)
    record("distributivity_join", J[a3, M[b3, c3]] != M[J[a3, b3], J[a3, c3]], s**3)
    record("distributivity_meet", M[a3, J[b3, c3]] != J[M[a3, b3], M[a3, c3]], s**3)

    # meet-splitting equivalence over all (j, k) and all a <= b
    pairs = np.argwhere(L)
    jj, kk = np.meshgrid(r, r, indexing="ij")
    jj, kk = jj.ravel(), kk.ravel()
    bad_rows = []
    for pa, pb in pairs:
        left = (M[jj, pa] == M[jj, pb]) & (M[kk, pa] == M[kk, pb])
        right = M[J[jj, kk], pa] == M[J[jj, kk], pb]
        for t in np.flatnonzero(left != right)[:max_witnesses]:
            bad_rows.append((jj[t], kk[t], pa, pb))
    report.checked["meet_splitting"] = len(pairs) * s * s
    for w in bad_rows[:max_witnesses]:
        report.violations.append(LawViolation("meet_splitting", tuple(E[i] for i in w)))

    o = np.array(lat.orders, dtype=object)
    record("order_identity", o[J] * o[M] != np.multiply.outer(o, o), s * s)

    wide = []
    for x, y in admissible_intervals(lat):
        if len(m_set(lat, x, y)) > 2:
            wide.append((x, y))
    report.checked["interval_width"] = len(admissible_intervals(lat))
    for w in wide[:max_witnesses]:
        report.violations.append(LawViolation("interval_width", w))
    return report
