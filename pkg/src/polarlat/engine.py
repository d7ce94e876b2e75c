"""Recursive butterfly over erasure vectors.

A window of ``m * 2**n`` sources is split into ``m`` blocks of ``2**n``; each
block evolves on its own.  At level ``k`` the block is cut into sub-blocks of
``2**k`` and, inside each, input ``t`` is paired with input ``t + 2**(k-1)``:
the minus output goes to position ``2t`` and the plus output to ``2t + 1``
(0-based).  Float tables are held as arrays of shape ``(blocks, 2**n, |L|)``.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lattice import FiniteLattice
from .vectors import (EpsVector, LatticeMismatch, minus_arrays, minus_transform, plus_arrays,
                      plus_transform)

__all__ = [
    "ResourceLimit",
    "AmbiguousDelta",
    "SourceSpec",
    "PolarTable",
    "evolve",
    "entropies",
    "classify",
    "classify_concentration",
    "classify_arrays",
    "EmpiricalMu",
    "empirical_mu",
    "cesaro_q",
    "table_csv",
    "summary",
    "DEFAULT_BUDGET",
    "DEFAULT_DELTA",
    "DEFAULT_LEVELS",
]

DEFAULT_BUDGET = 2**24
DEFAULT_DELTA = 1e-4
DEFAULT_LEVELS = 16


class ResourceLimit(RuntimeError):
    pass


class AmbiguousDelta(ValueError):
    pass


@dataclass(frozen=True)
class SourceSpec:
    """Sequence of initial vectors ``i -> dist_at(i)`` (0-based).

    ``stationary``: one dist for every index.  ``periodic``: ``dists`` repeats.
    ``explicit-prefix``: ``dists`` followed by ``tail`` forever.
    """
    lattice: FiniteLattice
    kind: str
    dists: tuple
    tail: EpsVector | None = None

    def __post_init__(self):
        if self.kind not in ("stationary", "periodic", "explicit-prefix"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if self.kind == "stationary" and len(self.dists) != 1:
            raise ValueError("a stationary source has exactly one dist")
        if self.kind == "periodic" and not self.dists:
            raise ValueError("a periodic source needs at least one dist")
        if self.kind == "explicit-prefix" and self.tail is None:
            raise ValueError("an explicit-prefix source needs a tail dist")
        for d in self.all_dists():
            if not isinstance(d, EpsVector):
                raise TypeError("source dists must be EpsVector instances")
            if d.lattice is not self.lattice:
                raise LatticeMismatch("source dist lives on another lattice")

    @classmethod
    def stationary(cls, dist: EpsVector) -> "SourceSpec":
        return cls(dist.lattice, "stationary", (dist,))

    @classmethod
    def periodic(cls, dists: Sequence[EpsVector]) -> "SourceSpec":
        return cls(dists[0].lattice, "periodic", tuple(dists))

    @classmethod
    def explicit_prefix(cls, prefix: Sequence[EpsVector], tail: EpsVector) -> "SourceSpec":
        return cls(tail.lattice, "explicit-prefix", tuple(prefix), tail)

    def all_dists(self) -> list[EpsVector]:
        return list(self.dists) + ([self.tail] if self.tail is not None else [])

    @property
    def exact(self) -> bool:
        return all(d.exact for d in self.all_dists())

    def dist_key(self, i: int) -> int:
        """Position of index ``i``'s dist in :meth:`all_dists`."""
        if self.kind == "stationary":
            return 0
        if self.kind == "periodic":
            return i % len(self.dists)
        return i if i < len(self.dists) else len(self.dists)

    def dist_at(self, i: int) -> EpsVector:
        return self.all_dists()[self.dist_key(i)]


@dataclass
class PolarTable:
    """Vectors at level ``n`` for indices ``1 .. window * 2**n``.

    Float tables keep ``masses`` (shape ``(window, 2**n, |L|)``); exact tables
    keep ``exact_vectors`` (list of blocks, each a list of EpsVector).
    """
    lattice: FiniteLattice
    level: int
    window: int
    masses: np.ndarray | None = None
    exact_vectors: list | None = None
    initial_entropy: np.ndarray | None = None  # per block, shape (window,)

    @property
    def exact(self) -> bool:
        return self.exact_vectors is not None

    def __len__(self) -> int:
        return self.window << self.level

    def vector(self, i: int) -> EpsVector:
        """Vector at 1-based index ``i``."""
        if not 1 <= i <= len(self):
            raise IndexError(i)
        b, t = divmod(i - 1, 1 << self.level)
        if self.exact:
            return self.exact_vectors[b][t]
        return EpsVector(self.lattice, list(self.masses[b, t]), exact=False, check=False)

    def vectors(self) -> list[EpsVector]:
        return [self.vector(i) for i in range(1, len(self) + 1)]

    def as_array(self) -> np.ndarray:
        """Float masses of shape ``(window * 2**n, |L|)``."""
        if self.exact:
            return np.array([[float(x) for x in v.masses] for blk in self.exact_vectors
                             for v in blk])
        return self.masses.reshape(-1, self.lattice.size)

    def block_entropy_spread(self) -> float:
        """Largest spread across blocks of the entropy at a fixed in-block position."""
        h = entropies(self).reshape(self.window, -1)
        return float((h.max(axis=0) - h.min(axis=0)).max()) if self.window > 1 else 0.0


def _butterfly_float(X: np.ndarray, lat: FiniteLattice, n: int, workers: int) -> np.ndarray:
    B, size, s = X.shape
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for k in range(1, n + 1):
            half = 1 << (k - 1)
            Y = X.reshape(B, size >> k, 2, half, s)
            top = np.ascontiguousarray(Y[:, :, 0]).reshape(-1, s)
            bot = np.ascontiguousarray(Y[:, :, 1]).reshape(-1, s)
            if pool is None:
                lo, hi = minus_arrays(top, bot, lat), plus_arrays(top, bot, lat)
            else:
                # rows are independent and each row's arithmetic is fixed, so the
                # split does not change a single bit of the result
                cuts = np.array_split(np.arange(top.shape[0]), workers)
                jobs = [(top[c], bot[c]) for c in cuts if len(c)]
                lo = np.concatenate(list(pool.map(lambda ab: minus_arrays(*ab, lat), jobs)))
                hi = np.concatenate(list(pool.map(lambda ab: plus_arrays(*ab, lat), jobs)))
            out = np.stack([lo.reshape(B, size >> k, half, s), hi.reshape(B, size >> k, half, s)],
                           axis=3)
            X = out.reshape(B, size, s)
            # each output inherits the rounding drift of both inputs, so the
            # total-mass error would double per level without this
            X /= X.sum(axis=2, keepdims=True)
    finally:
        if pool is not None:
            pool.shutdown()
    return X


def _butterfly_exact(block: list[EpsVector], n: int) -> list[EpsVector]:
    memo: dict = {}

    def step(fn, a, b, tag):
        key = (tag, a.masses, b.masses)
        if key not in memo:
            memo[key] = fn(a, b)
        return memo[key]

    cur = list(block)
    size = len(cur)
    for k in range(1, n + 1):
        half = 1 << (k - 1)
        nxt: list = [None] * size
        for start in range(0, size, 2 * half):
            for t in range(half):
                a, b = cur[start + t], cur[start + t + half]
                nxt[start + 2 * t] = step(minus_transform, a, b, "-")
                nxt[start + 2 * t + 1] = step(plus_transform, a, b, "+")
        cur = nxt
    return cur


def evolve(source: SourceSpec, n: int, m: int = 1, exact: bool | None = None,
           workers: int = 1, budget: int = DEFAULT_BUDGET) -> PolarTable:
    """Run ``n`` butterfly levels over ``m`` blocks of the source.

    Stationary sources are computed on one block (window reported as 1).
    Blocks with identical initial sequences are computed once and shared.
    """
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    lat = source.lattice
    if exact is None:
        exact = source.exact
    window = 1 if source.kind == "stationary" else m
    size = 1 << n
    if window * size > budget:
        raise ResourceLimit(f"{window} x 2^{n} = {window * size} vectors exceeds budget {budget}")
    dists = source.all_dists()
    if exact:
        dists = [d.to_exact() for d in dists]
    keys = [tuple(source.dist_key(b * size + t) for t in range(size)) for b in range(window)]
    uniq: dict[tuple, int] = {}
    for key in keys:
        uniq.setdefault(key, len(uniq))
    ent = [_entropy_row(d, lat) for d in dists]
    init_h = np.array([math.fsum(ent[j] for j in key) for key in keys])

    if exact:
        done = {key: _butterfly_exact([dists[j] for j in key], n) for key in uniq}
        return PolarTable(lat, n, window, exact_vectors=[done[k] for k in keys],
                          initial_entropy=init_h)
    base = np.array([d.to_float().array() for d in dists])
    X = np.stack([base[list(key)] for key in uniq])
    X = _butterfly_float(X, lat, n, max(1, int(workers)))
    order = [uniq[k] for k in keys]
    masses = X if order == list(range(len(uniq))) else X[order]
    return PolarTable(lat, n, window, masses=masses, initial_entropy=init_h)


def _entropy_row(d: EpsVector, lat: FiniteLattice) -> float:
    return math.fsum(float(x) * lat.log_orders[i] for i, x in enumerate(d.masses) if x)


def entropies(table: PolarTable) -> np.ndarray:
    """Conditional entropy (nats) of every index, in index order."""
    X = table.as_array()
    return (X * table.lattice.log_orders).sum(axis=1)


def _quotient_weights(lat: FiniteLattice) -> np.ndarray:
    logs = lat.log_orders
    # W[H, N] = log|H v N| - log|N|
    return logs[lat.join_table] - logs[None, :]


def classify_arrays(X: np.ndarray, lat: FiniteLattice, delta: float) -> np.ndarray:
    """Row-wise :func:`classify`; returns element indices, ``-1`` for none."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    X = np.atleast_2d(X)
    qe = X @ _quotient_weights(lat)
    h = (X * lat.log_orders).sum(axis=1)
    ok = (qe < delta) & (np.abs(h[:, None] - lat.log_orders[None, :]) < delta)
    hits = ok.sum(axis=1)
    if (hits > 1).any():
        row = int(np.argmax(hits > 1))
        names = [lat.elements[j] for j in np.flatnonzero(ok[row])]
        raise AmbiguousDelta(f"delta={delta} admits several elements {names} for one vector")
    return np.where(hits == 1, ok.argmax(axis=1), -1)


def classify(e: EpsVector, delta: float):
    """Element ``N`` whose two polarization inequalities both hold, else ``None``."""
    idx = classify_arrays(e.to_float().array()[None, :], e.lattice, delta)[0]
    return None if idx < 0 else e.lattice.elements[idx]


def classify_concentration(e: EpsVector, delta: float):
    """Fast sufficient test: mass at least ``1 - delta / log|top|`` on one element.

    If ``e(N) >= 1 - d`` then the entropy is within ``d log|top|`` of
    ``log|N|`` and the quotient entropy at ``N`` is at most ``d log|top|``, so
    :func:`classify` returns the same ``N``.  The converse can fail.
    """
    lat = e.lattice
    span = float(lat.log_orders[lat.top_index])
    if span == 0:
        return lat.bottom
    arr = e.to_float().array()
    j = int(arr.argmax())
    return lat.elements[j] if arr[j] >= 1 - delta / span else None


@dataclass
class EmpiricalMu:
    """Fraction of indices classified to each element; exact fractions of counts."""
    lattice: FiniteLattice
    counts: dict
    total: int
    unresolved_count: int
    level: int = 0
    delta: float = DEFAULT_DELTA

    @property
    def mass(self) -> dict:
        return {e: Fraction(c, self.total) for e, c in self.counts.items()}

    @property
    def unresolved(self) -> Fraction:
        return Fraction(self.unresolved_count, self.total)

    def as_float(self) -> dict:
        return {e: c / self.total for e, c in self.counts.items()}

    def __getitem__(self, element) -> float:
        return self.counts.get(element, 0) / self.total


def empirical_mu(source: SourceSpec, n: int = DEFAULT_LEVELS, m: int = 1,
                 delta: float = DEFAULT_DELTA, workers: int = 1,
                 budget: int = DEFAULT_BUDGET, table: PolarTable | None = None) -> EmpiricalMu:
    if table is None:
        table = evolve(source, n, m, exact=False, workers=workers, budget=budget)
    lat = table.lattice
    idx = classify_arrays(table.as_array(), lat, delta)
    hist = np.bincount(idx[idx >= 0], minlength=lat.size)
    counts = {lat.elements[j]: int(hist[j]) for j in range(lat.size)}
    unresolved = int((idx < 0).sum())
    return EmpiricalMu(lat, counts, len(idx), unresolved, table.level, delta)


def cesaro_q(source: SourceSpec) -> EpsVector:
    """Long-run average of the initial vectors."""
    if source.kind == "stationary":
        return source.dists[0]
    if source.kind == "explicit-prefix":
        return source.tail
    lat = source.lattice
    k = len(source.dists)
    if source.exact:
        mean = [sum((d.masses[j] for d in source.dists), Fraction(0)) / k for j in range(lat.size)]
        return EpsVector(lat, mean, exact=True)
    mean = [math.fsum(float(d.masses[j]) for d in source.dists) / k for j in range(lat.size)]
    total = math.fsum(mean)
    return EpsVector(lat, [x / total for x in mean], exact=False)


def table_csv(table: PolarTable, nonzero: bool = True) -> str:
    """CSV text with columns ``n, i, element, epsilon`` (1-based ``i``)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "i", "element", "epsilon"])
    lat = table.lattice
    for i in range(1, len(table) + 1):
        v = table.vector(i)
        for j, x in enumerate(v.masses):
            if x or not nonzero:
                w.writerow([table.level, i, lat.elements[j], str(x) if table.exact else repr(float(x))])
    return buf.getvalue()


def summary(table: PolarTable, delta: float = DEFAULT_DELTA) -> dict:
    h = entropies(table)
    mu = empirical_mu(None, table=table, delta=delta)
    return {
        "n": table.level,
        "m": table.window,
        "entropies": [float(x) for x in h],
        "mu_hat": {str(e): mu[e] for e in table.lattice.elements},
        "unresolved": float(mu.unresolved),
        "block_entropy_spread": table.block_entropy_spread(),
    }
