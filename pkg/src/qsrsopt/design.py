"""Good-lattice-point uniform designs on the unit hypercube."""

from __future__ import annotations

import csv
import itertools
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .interval import UncertainBox

# exhaustive generator search is abandoned for a Korobov search above this many candidates
MAX_EXHAUSTIVE_CANDIDATES = 200_000


@dataclass(frozen=True)
class SamplingPlan:
    """`m` points in ``[0, 1)^d`` plus the record needed to rebuild them."""

    points: np.ndarray
    generator: dict = field(compare=False)

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def discrepancy(self) -> float:
        return centered_l2_discrepancy(self.points)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"u{j + 1}" for j in range(self.d)])
            for row in self.points:
                writer.writerow([repr(float(v)) for v in row])


def centered_l2_discrepancy(points) -> float:
    """Squared centered L2 discrepancy (Hickernell), as computed by scipy."""
    return float(qmc.discrepancy(np.asarray(points, dtype=float), method="CD"))


def lattice_points(m: int, generator) -> np.ndarray:
    """Centered rank-1 lattice ``((i * h_j - 0.5) / m) mod 1`` for i = 1..m."""
    i = np.arange(1, m + 1).reshape(-1, 1)
    h = np.asarray(generator, dtype=np.int64).reshape(1, -1)
    return np.mod((i * h % m) - 0.5, m) / m


def _coprimes(m: int) -> list:
    return [h for h in range(1, m) if math.gcd(h, m) == 1] or [1]


class _CDFactors:
    """Per-column factors of the centered L2 discrepancy for lattice columns.

    Every lattice column with a generator coprime to ``m`` is a permutation of
    the same value set, so the discrepancy of a candidate generator vector is
    a sum over elementwise products of precomputed per-column matrices.
    """

    def __init__(self, m: int, gens: list):
        self.m = m
        self.single = {}
        self.pair = {}
        for h in gens:
            x = lattice_points(m, [h])[:, 0]
            z = np.abs(x - 0.5)
            self.single[h] = 1.0 + 0.5 * z - 0.5 * z * z
            self.pair[h] = (1.0 + 0.5 * z[:, None] + 0.5 * z[None, :]
                            - 0.5 * np.abs(x[:, None] - x[None, :]))

    def value(self, generator) -> float:
        d = len(generator)
        s = np.ones(self.m)
        p = np.ones((self.m, self.m))
        for h in generator:
            s = s * self.single[h]
            p = p * self.pair[h]
        return (13.0 / 12.0) ** d - 2.0 / self.m * s.sum() + p.sum() / self.m ** 2


def _candidate_generators(m: int, d: int):
    others = [h for h in _coprimes(m) if h != 1]
    k = d - 1
    if k == 0:
        return "exhaustive", [()]
    if len(others) >= k:
        count = math.comb(len(others), k)
        combos = itertools.combinations(others, k)
    else:
        pool = others or [1]
        count = math.comb(len(pool) + k - 1, k)
        combos = itertools.combinations_with_replacement(pool, k)
    if count <= MAX_EXHAUSTIVE_CANDIDATES:
        return "exhaustive", combos
    korobov = []
    for a in _coprimes(m):
        korobov.append(tuple(pow(a, j, m) for j in range(1, d)))
    return "korobov", korobov


def _search_glp(m: int, d: int) -> SamplingPlan:
    search, candidates = _candidate_generators(m, d)
    candidates = [(1,) + tuple(c) for c in candidates]
    factors = _CDFactors(m, sorted({h for c in candidates for h in c}))
    best, best_val = None, np.inf
    for gen in candidates:
        val = factors.value(gen)
        # strict improvement keeps the first (smallest) generator on ties
        if val < best_val - 1e-15:
            best, best_val = gen, val
    points = lattice_points(m, best)
    record = {"method": "glp", "m": m, "d": d, "generator": list(best),
              "search": search, "candidates": len(candidates),
              "discrepancy_cd": float(best_val)}
    return SamplingPlan(points, record)


def _halton_plan(m: int, d: int) -> SamplingPlan:
    points = qmc.Halton(d=d, scramble=False).random(m)
    record = {"method": "halton", "m": m, "d": d, "scramble": False, "skip": 0}
    return SamplingPlan(points, record)


_cache: dict = {}
_cache_lock = threading.Lock()


def generate_plan(m: int, d: int) -> SamplingPlan:
    """Uniform design with `m` points in `d` dimensions.

    Uses a good-lattice-point design whose generator minimizes the centered
    L2 discrepancy.  When ``d >= m`` (no useful lattice exists) an
    unscrambled Halton sequence is used instead; ``plan.generator`` records
    which construction was used.  Plans are cached per ``(m, d)``.
    """
    m, d = int(m), int(d)
    if m < 1 or d < 1:
        raise ValueError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    key = (m, d)
    with _cache_lock:
        plan = _cache.get(key)
    if plan is not None:
        return plan
    if m == 1:
        plan = SamplingPlan(np.full((1, d), 0.5), {"method": "glp", "m": 1, "d": d,
                                                    "generator": [1] * d, "search": "trivial"})
    elif d >= m:
        plan = _halton_plan(m, d)
    else:
        plan = _search_glp(m, d)
    plan.points.setflags(write=False)
    with _cache_lock:
        plan = _cache.setdefault(key, plan)
    return plan


def plan_from_generator(record: dict) -> SamplingPlan:
    """Rebuild a plan from its `generator` record."""
    method = record["method"]
    if method == "glp":
        return SamplingPlan(lattice_points(record["m"], record["generator"]), dict(record))
    if method == "halton":
        return _halton_plan(record["m"], record["d"])
    raise ValueError(f"unknown plan method {method!r}")


def map_plan_to_box(plan: SamplingPlan, box: UncertainBox) -> np.ndarray:
    if plan.d != box.dimension:
        raise ValueError(f"plan dimension {plan.d} != box dimension {box.dimension}")
    return box.lo + plan.points * (box.hi - box.lo)
