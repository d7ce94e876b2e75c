"""Sample-level check of the coset side-information recursion on Z/L.

Each sample draws, for every index, a subgroup order from the source vector,
a uniform coset of that subgroup and a uniform point ``X`` of the coset.  The
samples run through the butterfly (``U1 = X1 + X2``, ``U2 = X2``) while the
side information follows the coset recursion: the sum coset for the minus
branch and ``(u - Y1) ∩ Y2`` for the plus branch.  The tracked statistics are
integer counts of ``(index, order, coset, position in coset)``.

Randomness comes from Philox streams keyed by ``(seed, chunk)``.  Chunk size
depends only on ``n``, so counts do not depend on the worker count.
"""
from __future__ import annotations

import math
from statistics import NormalDist
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cosets import closure_modulus, phi_arrays, product_arrays
from .engine import SourceSpec, evolve
from .vectors import quotient_entropy

__all__ = [
    "EmptyPhi",
    "SampleConfig",
    "SampleStats",
    "simulate_block",
    "validate_coset_tracking",
    "quotient_entropy_gate",
    "MAX_LEVELS",
]

MAX_LEVELS = 12
CHUNK_CELLS = 2**20


class EmptyPhi(RuntimeError):
    pass


@dataclass(frozen=True)
class SampleConfig:
    source: SourceSpec
    levels: int
    samples: int
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.levels <= MAX_LEVELS:
            raise ValueError(f"levels must be in [0, {MAX_LEVELS}]")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        orders = [self.source.lattice.orders[i] for d in self.source.all_dists()
                  for i in d.support()]
        closure_modulus(orders)  # raises ModulusOverflow when too large

    @property
    def modulus(self) -> int:
        orders = [self.source.lattice.orders[i] for d in self.source.all_dists()
                  for i in d.support()]
        return closure_modulus(orders).modulus

    @property
    def chunk_size(self) -> int:
        return max(1, CHUNK_CELLS >> self.levels)


@dataclass
class SampleStats:
    config: SampleConfig
    modulus: int
    keys: np.ndarray  # encoded (index, element, residue * order + position)
    counts: np.ndarray
    order_hist: np.ndarray  # shape (2**n, |L|)
    violations: dict = field(default_factory=dict)

    @property
    def lattice(self):
        return self.config.source.lattice

    @property
    def size(self) -> int:
        return 1 << self.config.levels

    def decode(self):
        """Arrays ``(index, element, residue, position, count)`` for every key."""
        L = self.modulus
        s = self.lattice.size
        slot = self.keys % L
        rest = self.keys // L
        elem = rest % s
        index = rest // s
        d = np.asarray(self.lattice.orders, dtype=np.int64)[elem]
        return index, elem, slot // d, slot % d, self.counts


def _orders_array(lat) -> np.ndarray:
    return np.asarray(lat.orders, dtype=np.int64)


def _simulate_chunk(cfg: SampleConfig, L: int, cdf: np.ndarray, chunk: int, count: int):
    lat = cfg.source.lattice
    n = cfg.levels
    size = 1 << n
    s = lat.size
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed,
                                                                      spawn_key=(chunk,))))
    u = rng.random((count, size))
    elem = (u[:, :, None] >= cdf[None, :, :-1]).sum(axis=2)
    orders = _orders_array(lat)
    d = orders[elem]
    r = rng.integers(0, L // d)
    pos = rng.integers(0, d)
    U = r + pos * (L // d)

    bad = {"u_outside_coset": 0, "order_identity": 0, "empty_phi": 0}
    for k in range(1, n + 1):
        half = 1 << (k - 1)
        shape = (count, size >> k, 2, half)
        U4, d4, r4 = U.reshape(shape), d.reshape(shape), r.reshape(shape)
        u1, u2 = U4[:, :, 0], U4[:, :, 1]
        d1, d2, r1, r2 = d4[:, :, 0], d4[:, :, 1], r4[:, :, 0], r4[:, :, 1]
        um = (u1 + u2) % L
        dm, rm = product_arrays(L, d1, r1, d2, r2)
        dp, rp, empty = phi_arrays(L, um, d1, r1, d2, r2)
        bad["empty_phi"] += int(empty.sum())
        bad["order_identity"] += int((dm * dp != d1 * d2).sum())
        bad["u_outside_coset"] += int(((um - rm) % (L // dm) != 0).sum())
        bad["u_outside_coset"] += int(((u2 - rp) % (L // dp) != 0).sum())
        U = np.stack([um, u2], axis=3).reshape(count, size)
        d = np.stack([dm, dp], axis=3).reshape(count, size)
        r = np.stack([rm, rp], axis=3).reshape(count, size)

    pos = (U - r) // (L // d)
    elem = np.searchsorted(orders, d)  # orders are distinct and sorted
    index = np.broadcast_to(np.arange(size), (count, size))
    keys = ((index * s + elem) * L + r * d + pos).ravel()
    uk, uc = np.unique(keys, return_counts=True)
    hist = np.zeros((size, s), dtype=np.int64)
    np.add.at(hist, (index.ravel(), elem.ravel()), 1)
    return uk, uc, hist, bad


def _check_cyclic_model(lat) -> None:
    """Elements must be the subgroups of a cyclic group: distinct orders, lcm joins, gcd meets."""
    orders = np.asarray(lat.orders, dtype=np.int64)
    if len(set(lat.orders)) != lat.size or list(lat.orders) != sorted(lat.orders):
        raise ValueError("sampling needs distinct subgroup orders, sorted canonically")
    if not (np.array_equal(orders[lat.join_table], np.lcm.outer(orders, orders))
            and np.array_equal(orders[lat.meet_table], np.gcd.outer(orders, orders))):
        raise ValueError("lattice joins/meets are not lcm/gcd of orders; no cyclic model")


def simulate_block(cfg: SampleConfig, workers: int = 1) -> SampleStats:
    """Run ``cfg.samples`` independent copies of one ``2**n`` block."""
    lat = cfg.source.lattice
    _check_cyclic_model(lat)
    L = cfg.modulus
    size = 1 << cfg.levels
    probs = np.array([cfg.source.dist_at(i).to_float().array() for i in range(size)])
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    step = cfg.chunk_size
    jobs = [(c, min(step, cfg.samples - c * step)) for c in range(-(-cfg.samples // step))]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda job: _simulate_chunk(cfg, L, cdf, *job), jobs))
    else:
        parts = [_simulate_chunk(cfg, L, cdf, *job) for job in jobs]
    keys = np.concatenate([p[0] for p in parts])
    counts = np.concatenate([p[1] for p in parts])
    uk, inv = np.unique(keys, return_inverse=True)
    merged = np.bincount(inv.ravel(), weights=counts, minlength=len(uk)).astype(np.int64)
    hist = sum((p[2] for p in parts), np.zeros((size, lat.size), dtype=np.int64))
    bad: dict = {}
    for p in parts:
        for k, v in p[3].items():
            bad[k] = bad.get(k, 0) + v
    if bad.get("empty_phi"):
        raise EmptyPhi(f"{bad['empty_phi']} empty plus-branch intersections")
    return SampleStats(cfg, L, uk, merged, hist, bad)


def _predicted_vectors(cfg: SampleConfig):
    table = evolve(cfg.source, cfg.levels, 1, exact=False)
    return table.vectors()


def _tv_per_index(stats: SampleStats) -> np.ndarray:
    index, elem, resid, pos, cnt = stats.decode()
    d = np.asarray(stats.lattice.orders, dtype=np.int64)[elem]
    group = (index * stats.lattice.size + elem) * stats.modulus + resid
    gk, ginv = np.unique(group, return_inverse=True)
    gtot = np.bincount(ginv, weights=cnt)
    # cells never hit still count toward TV: |0 - 1/d| for each missing position
    seen = np.bincount(ginv)
    gd = np.zeros(len(gk))
    gd[ginv] = d
    frac = cnt / gtot[ginv]
    tv_seen = np.bincount(ginv, weights=np.abs(frac - 1.0 / d))
    tv = 0.5 * (tv_seen + (gd - seen) / gd)
    gidx = gk // (stats.lattice.size * stats.modulus)
    out = np.zeros(stats.size)
    np.add.at(out, gidx, tv * gtot)
    return out / stats.config.samples


def validate_coset_tracking(stats: SampleStats, tol: float = 0.02, sigmas: float = 3.0) -> dict:
    """Uniformity inside tracked cosets and log-order means against the exact vectors."""
    lat = stats.lattice
    N = stats.config.samples
    logs = lat.log_orders
    preds = _predicted_vectors(stats.config)
    tv = _tv_per_index(stats)
    rows = []
    ok = all(v == 0 for v in stats.violations.values())
    # one band per (index, element) cell; split the two-sided tail of a single
    # ``sigmas`` test across all cells so the family keeps its false-alarm rate
    tail = 2 * (1 - NormalDist().cdf(sigmas))
    z_cells = NormalDist().inv_cdf(1 - tail / (2 * stats.size * lat.size))
    for i in range(stats.size):
        hist = stats.order_hist[i]
        p_hat = hist / N
        mean = float(p_hat @ logs)
        var = float(p_hat @ logs**2) - mean**2
        sigma = math.sqrt(max(var, 0.0) / N)
        pred = preds[i].array()
        h_pred = float(pred @ logs)
        diff = abs(mean - h_pred)
        ent_ok = diff <= sigmas * sigma if sigma > 0 else diff <= 1e-12
        band = z_cells * np.sqrt(pred * (1 - pred) / N)
        order_ok = bool(np.all(np.abs(p_hat - pred) <= np.maximum(band, 1e-12)))
        row_ok = bool(tv[i] <= tol and ent_ok and order_ok)
        ok = ok and row_ok
        rows.append({
            "index": i + 1,
            "order_hist": {str(e): int(c) for e, c in zip(lat.elements, hist) if c},
            "tv_max": float(tv[i]),
            "entropy_hat": mean,
            "entropy_pred": h_pred,
            "sigma": sigma,
            "entropy_ok": bool(ent_ok),
            "order_ok": order_ok,
            "pass": row_ok,
        })
    return {
        "modulus": stats.modulus,
        "levels": stats.config.levels,
        "samples": N,
        "seed": stats.config.seed,
        "tol": tol,
        "violations": dict(stats.violations),
        "tv_max": float(tv.max()),
        "per_index": rows,
        "pass": bool(ok),
    }


def _conditional_entropy(groups: np.ndarray, cells: np.ndarray, counts: np.ndarray, total: int):
    """Plug-in H(cell | group) with the Miller-Madow correction, and its std. error."""
    ck, cinv = np.unique(np.stack([groups, cells]), axis=1, return_inverse=True)
    c = np.bincount(cinv.ravel(), weights=counts)
    gk, ginv = np.unique(ck[0], return_inverse=True)
    g = np.bincount(ginv, weights=c)
    p_cond = c / g[ginv]
    logs = -np.log(p_cond)
    h = float(np.sum(c * logs) / total)
    bins = np.bincount(ginv)
    h_mm = h + float(np.sum(bins - 1)) / (2 * total)
    var = (float(np.sum(c * logs**2) / total) - h * h) / total
    var += float(np.sum(bins - 1)) / (2 * total**2)
    return h_mm, math.sqrt(max(var, 0.0))


def quotient_entropy_gate(stats: SampleStats, sigmas: float = 3.0) -> dict:
    """Compare sampled H(U + N | side information) with the closed form, every N and index."""
    lat = stats.lattice
    L = stats.modulus
    N_total = stats.config.samples
    preds = _predicted_vectors(stats.config)
    index, elem, resid, pos, cnt = stats.decode()
    d = np.asarray(lat.orders, dtype=np.int64)[elem]
    u = resid + pos * (L // d)
    group = (index * lat.size + elem) * L + resid
    rows = []
    ok = True
    for j, N in enumerate(lat.elements):
        if L % lat.orders[j]:
            continue
        cell = u % (L // lat.orders[j])
        for i in range(stats.size):
            sel = index == i
            h_hat, sigma = _conditional_entropy(group[sel], cell[sel], cnt[sel], N_total)
            h_pred = quotient_entropy(preds[i], N)
            # spread of the same estimate under the predicted law; keeps the
            # test meaningful when the sample never sees a rare non-trivial cell
            w = preds[i].array()
            ratio = lat.log_orders[lat.join_table[:, j]] - lat.log_orders[j]
            sigma = max(sigma, math.sqrt(max(float(w @ ratio**2) - h_pred**2, 0.0) / N_total))
            diff = abs(h_hat - h_pred)
            good = diff <= sigmas * sigma if sigma > 0 else diff <= 1e-12
            ok = ok and good
            rows.append({"index": i + 1, "element": N, "entropy_hat": h_hat,
                         "entropy_pred": h_pred, "sigma": sigma, "pass": bool(good)})
    return {"rows": rows, "pass": bool(ok)}
