"""Exact limiting distribution of polarization levels.

Given the long-run average ``Q`` of the initial vectors, :func:`solve_mu`
walks an ascending chain from the bottom element.  At each step it looks at
the rank-two intervals above the current element ``K`` and picks a pair
``(H1, H2)`` with ``K < H2 < H1``; ``K`` keeps ``beta(K, H1)`` plus the
chi-mass of the sibling of ``H2`` (minus what earlier steps already took), and
the walk moves to ``H2``.  The walk happens inside the finite sublattice
generated by the support of ``Q`` together with the bottom and the queried
element.  Arithmetic is rational unless ``exact=False``.

Choosing the pair.  With ``rule="balanced"`` (default) a pair is scored by
``chi(K, H2, H1) - chi(K, H3, H1)`` where ``H3`` is the other middle element,
and when ``K`` has several covers only intervals with two middle elements
compete.  The score difference equals ``beta(K, H3) - beta(K, H2)``, so the
walk always steps to the cover with the smallest beta and every assigned mass
is non-negative.  ``rule="printed"`` ranks every rank-two interval by the raw
``chi(K, H2, H1)``; on lattices mixing a chain interval with a diamond above
the same ``K`` (divisors of 12, for instance) it can step the wrong way and
assign negative mass, and it is kept only for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .lattice import (DistributiveLattice, FiniteLattice, LatticeError, m_set, s_set,
                      sublattice, verify_laws)
from .vectors import EpsVector

__all__ = [
    "NonDistributiveLattice",
    "StructurallyAmbiguous",
    "NotAChain",
    "TraceStep",
    "MuDistribution",
    "beta_q",
    "chi_q",
    "solve_mu",
    "prufer_mu",
    "prime_marginals",
]


class NonDistributiveLattice(LatticeError):
    pass


class StructurallyAmbiguous(LatticeError):
    pass


class NotAChain(LatticeError):
    pass


def _sum_where(Q: EpsVector, mask: np.ndarray):
    vals = [m for m, keep in zip(Q.masses, mask) if keep and m]
    return sum(vals, Fraction(0)) if Q.exact else math.fsum(vals)


def beta_q(Q: EpsVector, N, H):
    """Mass of ``J`` with ``J ^ H == J ^ N``."""
    lat = Q.lattice
    M = lat.meet_table
    return _sum_where(Q, M[:, lat.idx(H)] == M[:, lat.idx(N)])


def chi_q(Q: EpsVector, N, K, H):
    """Mass of ``J`` with ``J v N == J v K`` and ``J ^ H == J ^ K``."""
    lat = Q.lattice
    J, M = lat.join_table, lat.meet_table
    n, k, h = lat.idx(N), lat.idx(K), lat.idx(H)
    return _sum_where(Q, (J[:, n] == J[:, k]) & (M[:, h] == M[:, k]))


@dataclass
class TraceStep:
    K: object
    branch: str  # "pair", "cover" or "top"
    alpha: object  # mass already assigned before this step
    s_set: list = field(default_factory=list)
    chi: dict = field(default_factory=dict)  # (H1, H2) -> chi(K, H2, H1)
    score: dict = field(default_factory=dict)  # (H1, H2) -> ranking value
    chosen: tuple | None = None
    beta: object = None
    correction: object = None
    mu: object = None

    def to_dict(self) -> dict:
        num = _jsonable
        return {
            "K": self.K,
            "branch": self.branch,
            "alpha": num(self.alpha),
            "S": list(self.s_set),
            "chi": [{"H1": h1, "H2": h2, "value": num(v), "score": num(self.score.get((h1, h2)))}
                    for (h1, h2), v in self.chi.items()],
            "chosen": list(self.chosen) if self.chosen else None,
            "beta": num(self.beta),
            "correction": num(self.correction),
            "mu": num(self.mu),
        }


def _jsonable(x):
    if x is None:
        return None
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return float(x)


@dataclass
class MuDistribution:
    lattice: FiniteLattice
    mass: dict
    chain: list
    trace: list = field(default_factory=list)
    query: object = None
    exact: bool = True
    shortcut: str | None = None

    def __getitem__(self, element):
        self.lattice.idx(element)
        return self.mass.get(element, Fraction(0) if self.exact else 0.0)

    @property
    def value(self):
        """Mass at the queried element."""
        return self[self.query if self.query is not None else self.lattice.top]

    def as_vector(self) -> EpsVector:
        zero = Fraction(0) if self.exact else 0.0
        return EpsVector(self.lattice, [self.mass.get(e, zero) for e in self.lattice.elements],
                         exact=self.exact, check=False)

    def total(self):
        return sum(self.mass.values(), Fraction(0) if self.exact else 0.0)

    def support(self) -> list:
        return [e for e in self.lattice.elements if self.mass.get(e)]

    def to_dict(self) -> dict:
        return {
            "mu": {str(e): _jsonable(m) for e, m in self.mass.items()},
            "chain": list(self.chain),
            "query": self.query,
            "trace": [s.to_dict() for s in self.trace],
            "shortcut": self.shortcut,
        }


def _ensure_distributive(lat: FiniteLattice) -> None:
    if isinstance(lat, DistributiveLattice):
        return
    rep = verify_laws(lat, max_witnesses=1)
    bad = rep.laws_violated() & {"distributivity_join", "distributivity_meet", "modularity"}
    if bad:
        raise NonDistributiveLattice(f"lattice {lat.name!r} violates {sorted(bad)}")


TieBreak = Callable[[Sequence[tuple]], tuple]


def _first(cands: Sequence[tuple]) -> tuple:
    return cands[0]


def solve_mu(lat: FiniteLattice, N, Q: EpsVector, exact: bool = True,
             tie_break: TieBreak | None = None, rule: str = "balanced",
             max_steps: int | None = None) -> MuDistribution:
    """Limiting level distribution for ``Q``; the result's ``value`` is ``mu(N)``.

    ``tie_break`` receives every best-scoring ``(H1, H2)`` pair in canonical
    order and returns one; the default takes the first.
    """
    if rule not in ("balanced", "printed"):
        raise ValueError(f"unknown rule {rule!r}")
    _ensure_distributive(lat)
    if Q.lattice is not lat:
        raise LatticeError("Q must live on the given lattice")
    lat.idx(N)
    Q = Q.to_exact() if exact else Q.to_float()
    support = [e for e, m in Q if m]
    if not support:
        raise ValueError("Q has empty support")
    uni = sublattice(lat, support + [lat.bottom, N])
    tie_break = tie_break or _first
    one = Fraction(1) if exact else 1.0
    zero = Fraction(0) if exact else 0.0
    alpha = zero

    mass: dict = {}
    chain: list = []
    trace: list[TraceStep] = []
    K = uni.bottom
    steps = max_steps or uni.size + 1
    for _ in range(steps):
        chain.append(K)
        step = TraceStep(K=K, branch="", alpha=alpha)
        S = s_set(uni, K)
        covers = uni.covers(K)
        if S:
            step.branch = "pair"
            step.s_set = list(S)
            for h1 in S:
                mids = m_set(uni, K, h1)
                if rule == "balanced" and len(covers) > 1 and len(mids) < 2:
                    continue
                vals = {h2: chi_q(Q, K, h2, h1) for h2 in mids}
                for h2, v in vals.items():
                    step.chi[(h1, h2)] = v
                    step.score[(h1, h2)] = v if rule == "printed" else (
                        v - sum((w for h3, w in vals.items() if h3 != h2), zero))
            best = max(step.score.values())
            h1, h2 = tie_break([p for p, v in step.score.items() if v == best])
            step.chosen = (h1, h2)
            step.beta = beta_q(Q, K, h1)
            step.correction = sum((chi_q(Q, K, h3, h1) for h3 in m_set(uni, K, h1) if h3 != h2),
                                  zero)
            mu_k = step.beta - alpha + step.correction
            nxt = h2
        elif covers:
            if len(covers) > 1:
                raise StructurallyAmbiguous(
                    f"{K!r} has covers {covers} but no rank-two interval above it")
            step.branch = "cover"
            step.chosen = (covers[0],)
            step.beta = beta_q(Q, K, covers[0])
            mu_k = step.beta - alpha
            nxt = covers[0]
        else:
            step.branch = "top"
            mu_k = one - alpha
            nxt = None
        step.mu = mu_k
        mass[K] = mass.get(K, 0) + mu_k
        alpha = alpha + mu_k
        trace.append(step)
        if nxt is None:
            break
        K = nxt
    else:
        raise RuntimeError("walk did not reach the top of the working lattice")
    return MuDistribution(lat, mass, chain, trace, query=N, exact=exact)


def prufer_mu(Q: EpsVector) -> MuDistribution:
    """On a chain every level keeps exactly its own ``Q`` mass."""
    lat = Q.lattice
    if not lat.is_chain():
        raise NotAChain(f"lattice {lat.name!r} is not a chain")
    mass = {e: m for e, m in Q if m}
    return MuDistribution(lat, mass, [e for e in lat.elements if e in mass], query=lat.top,
                          exact=Q.exact, shortcut="chain")


def prime_marginals(v: EpsVector) -> dict:
    """For each prime ``p`` dividing some order, the mass on elements whose order ``p`` divides."""
    lat = v.lattice
    out: dict = {}
    zero = Fraction(0) if v.exact else 0.0
    for i, m in enumerate(v.masses):
        for p in lat.prime_exponents[i]:
            out[p] = out.get(p, zero) + m
    for exps in lat.prime_exponents:
        for p in exps:
            out.setdefault(p, zero)
    return dict(sorted(out.items()))
