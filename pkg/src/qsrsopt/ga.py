"""Island-model real-coded genetic algorithm over design midpoints.

Each island evolves its own subpopulation with binary feasibility-rule
tournaments, simulated binary crossover and bounded polynomial mutation.
Every ``migration_interval`` generations the best individuals of each
island replace the worst of the next island on a ring.
"""

from __future__ import annotations

import csv
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

TRACE_COLUMNS = ("generation", "best_f_upper", "mean_f_upper", "feasible_fraction", "evaluator_calls")


@dataclass(frozen=True)
class GaConfig:
    """Island GA settings.

    `subpopulation_size` is per island, so one generation requests
    ``islands * subpopulation_size`` evaluations.  `mutation_rate` is the
    per-variable mutation probability.  `elite` individuals per island are
    copied unchanged into the next generation.
    """

    islands: int = 4
    subpopulation_size: int = 50
    generations: int = 50
    migration_interval: int = 5
    migration_rate: float = 0.1
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    seed: int = 0
    elite: int = 1
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0
    stall_generations: Optional[int] = None
    stall_tol: float = 1e-8
    parallel: int = 1

    def __post_init__(self):
        for name in ("islands", "subpopulation_size", "generations", "migration_interval", "parallel"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.subpopulation_size < 4:
            raise ValueError("subpopulation_size must be at least 4")
        for name in ("migration_rate", "crossover_rate", "mutation_rate"):
            if not 0.0 <= float(getattr(self, name)) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0 <= self.elite < self.subpopulation_size:
            raise ValueError("elite must be in [0, subpopulation_size)")
        if self.sbx_eta < 0 or self.mutation_eta < 0:
            raise ValueError("distribution indices must be nonnegative")
        if self.stall_generations is not None and self.stall_generations < 1:
            raise ValueError("stall_generations must be positive")

    @property
    def evaluations_per_generation(self) -> int:
        return self.islands * self.subpopulation_size

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Individual:
    x_c: np.ndarray
    f_upper: float
    g_upper: np.ndarray
    feasible: bool
    violation: float

    @classmethod
    def make(cls, x_c, f_upper, g_upper) -> "Individual":
        g = np.asarray(g_upper, dtype=float).ravel()
        x = np.asarray(x_c, dtype=float).copy()
        x.setflags(write=False)
        g.setflags(write=False)
        return cls(x, float(f_upper), g, bool(np.all(g <= 0.0)), float(np.sum(np.maximum(g, 0.0))))

    def rank_key(self) -> tuple:
        """Smaller is better: feasible by objective, then infeasible by violation."""
        return (0, self.f_upper) if self.feasible else (1, self.violation)

    def to_dict(self) -> dict:
        return {"x_c": self.x_c.tolist(), "f_upper": self.f_upper, "g_upper": self.g_upper.tolist(),
                "feasible": self.feasible, "violation": self.violation}


def better(a: Individual, b: Individual) -> Individual:
    """Feasibility rules; `a` wins ties."""
    return a if a.rank_key() <= b.rank_key() else b


def select_parent(pop, rng) -> Individual:
    """Binary tournament under the feasibility rules."""
    if len(pop) == 0:
        raise ValueError("empty population")
    if len(pop) == 1:
        return pop[0]
    i, j = rng.choice(len(pop), size=2, replace=False)
    return better(pop[i], pop[j])


def sbx_crossover(p1, p2, lo, hi, eta, rng) -> tuple:
    """Simulated binary crossover, each variable crossed with probability 1/2."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    u = rng.random(p1.shape)
    swap = rng.random(p1.shape) <= 0.5
    beta = np.where(u <= 0.5, (2.0 * u) ** (1.0 / (eta + 1.0)),
                    (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)))
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    c1 = np.where(swap, c1, p1)
    c2 = np.where(swap, c2, p2)
    return clamp(c1, lo, hi), clamp(c2, lo, hi)


def polynomial_mutation(x, lo, hi, rate, eta, rng) -> np.ndarray:
    """Bounded polynomial mutation applied to each variable with probability `rate`."""
    x = np.asarray(x, dtype=float).copy()
    mask = rng.random(x.shape) < rate
    u = rng.random(x.shape)
    span = hi - lo
    for j in np.flatnonzero(mask & (span > 0)):
        d1 = (x[j] - lo[j]) / span[j]
        d2 = (hi[j] - x[j]) / span[j]
        p = 1.0 / (eta + 1.0)
        if u[j] < 0.5:
            dq = (2.0 * u[j] + (1.0 - 2.0 * u[j]) * (1.0 - d1) ** (eta + 1.0)) ** p - 1.0
        else:
            dq = 1.0 - (2.0 * (1.0 - u[j]) + 2.0 * (u[j] - 0.5) * (1.0 - d2) ** (eta + 1.0)) ** p
        x[j] += dq * span[j]
    return clamp(x, lo, hi)


def clamp(x, lo, hi) -> np.ndarray:
    return np.minimum(np.maximum(x, lo), hi)


def migrate(islands: list, cfg: GaConfig, rng=None) -> list:
    """Ring migration: island i's best ``ceil(rate * size)`` replace the worst of island i+1.

    Migrants are chosen from the populations as they were before any
    replacement, so the result does not depend on island order.
    """
    n = len(islands)
    if n < 2 or cfg.migration_rate <= 0:
        return [list(p) for p in islands]
    ranked = [sorted(p, key=Individual.rank_key) for p in islands]
    out = []
    for i in range(n):
        src = ranked[(i - 1) % n]
        k = min(math.ceil(cfg.migration_rate * len(src)), len(islands[i]))
        dest = ranked[i]
        out.append(dest[:len(dest) - k] + src[:k])
    return out


class CachedEvaluator:
    """Memoizes ``func(x_c) -> (f_upper, g_upper)`` by the exact midpoint."""

    def __init__(self, func: Callable, parallel: int = 1):
        self.func = func
        self.parallel = int(parallel)
        self.cache = {}
        self.requests = 0
        self.hits = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self.requests - self.hits

    def _compute(self, x):
        f, g = self.func(np.array(x))
        return float(f), np.asarray(g, dtype=float).ravel()

    def evaluate_many(self, xs) -> list:
        keys = [tuple(float(v) for v in x) for x in xs]
        with self._lock:
            todo = list(dict.fromkeys(k for k in keys if k not in self.cache))
        if self.parallel > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.parallel) as pool:
                results = list(pool.map(self._compute, todo))
        else:
            results = [self._compute(k) for k in todo]
        with self._lock:
            self.cache.update(zip(todo, results))
            self.requests += len(keys)
            self.hits += len(keys) - len(todo)
            return [Individual.make(k, *self.cache[k]) for k in keys]


@dataclass
class OptimizationRun:
    problem: str
    config: GaConfig
    best: Optional[Individual]
    trace: list = field(default_factory=list)
    requested: int = 0
    cache_hits: int = 0
    generations_run: int = 0
    stopped_by_stall: bool = False

    @property
    def evaluator_calls(self) -> int:
        return self.requested - self.cache_hits

    def trace_rows(self) -> list:
        return [[r[c] for c in TRACE_COLUMNS] for r in self.trace]

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows(self.trace_rows())

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "config": self.config.to_dict(),
            "best": None if self.best is None else self.best.to_dict(),
            "trace": self.trace,
            "requested": self.requested,
            "cache_hits": self.cache_hits,
            "evaluator_calls": self.evaluator_calls,
            "generations_run": self.generations_run,
            "stopped_by_stall": self.stopped_by_stall,
        }


class OptimizationError(RuntimeError):
    """Evaluator failure during a GA run; `run` holds the trace so far."""

    def __init__(self, message, run: OptimizationRun):
        super().__init__(message)
        self.run = run


def _breed(pop, n_children, lo, hi, cfg, rng) -> list:
    xs = []
    while len(xs) < n_children:
        a = select_parent(pop, rng).x_c
        b = select_parent(pop, rng).x_c
        if rng.random() < cfg.crossover_rate:
            c1, c2 = sbx_crossover(a, b, lo, hi, cfg.sbx_eta, rng)
        else:
            c1, c2 = a.copy(), b.copy()
        for c in (c1, c2):
            if len(xs) < n_children:
                xs.append(polynomial_mutation(c, lo, hi, cfg.mutation_rate, cfg.mutation_eta, rng))
    return xs


def optimize(problem, cfg: GaConfig, evaluator: Callable) -> OptimizationRun:
    """Minimize the worst-case objective over the shrunk design box.

    Parameters
    ----------
    problem : UncertainProblem
    cfg : GaConfig
    evaluator : callable
        ``evaluator(x_c) -> (f_upper, g_upper)``, e.g. :func:`qsrs_evaluator`.

    Returns
    -------
    OptimizationRun
        Best-ever individual (least violating if nothing was feasible), the
        per-generation trace and the evaluation budget.
    """
    lo, hi = problem.shrunk_bounds()
    if np.any(lo > hi):
        raise ValueError("design box is empty after shrinking")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.islands)]
    cache = evaluator if isinstance(evaluator, CachedEvaluator) else CachedEvaluator(evaluator, cfg.parallel)
    req0, hit0 = cache.requests, cache.hits
    run = OptimizationRun(problem.name, cfg, None)
    n = cfg.subpopulation_size

    def evaluate(batches):
        flat = [x for b in batches for x in b]
        try:
            inds = cache.evaluate_many(flat)
        except Exception as exc:
            run.requested, run.cache_hits = cache.requests - req0, cache.hits - hit0
            raise OptimizationError(f"evaluator failed in generation {run.generations_run + 1}: {exc}",
                                    run) from exc
        out, k = [], 0
        for b in batches:
            out.append(inds[k:k + len(b)])
            k += len(b)
        return out

    pops = evaluate([[lo + rng.random(lo.shape) * (hi - lo) for _ in range(n)] for rng in streams])
    best = None
    stall = 0
    for gen in range(1, cfg.generations + 1):
        if gen > 1:
            batches = []
            for pop, rng in zip(pops, streams):
                elites = sorted(pop, key=Individual.rank_key)[:cfg.elite]
                batches.append([e.x_c for e in elites] + _breed(pop, n - len(elites), lo, hi, cfg, rng))
            pops = evaluate(batches)
            if gen % cfg.migration_interval == 0:
                pops = migrate(pops, cfg)
        prev = best
        for pop in pops:
            for ind in pop:
                if best is None or ind.rank_key() < best.rank_key():
                    best = ind
        run.best = best
        run.generations_run = gen
        run.requested, run.cache_hits = cache.requests - req0, cache.hits - hit0
        allf = np.array([i.f_upper for p in pops for i in p])
        feas = np.mean([i.feasible for p in pops for i in p])
        run.trace.append({
            "generation": gen,
            "best_f_upper": best.f_upper if best.feasible else float("nan"),
            "mean_f_upper": float(allf.mean()),
            "feasible_fraction": float(feas),
            "evaluator_calls": run.evaluator_calls,
        })
        if cfg.stall_generations is not None and prev is not None:
            gain = _improvement(prev, best)
            stall = 0 if gain > cfg.stall_tol else stall + 1
            if stall >= cfg.stall_generations:
                run.stopped_by_stall = True
                break
    return run


def _improvement(prev: Individual, best: Individual) -> float:
    if best.feasible and not prev.feasible:
        return math.inf
    if best.feasible:
        return prev.f_upper - best.f_upper
    return prev.violation - best.violation


def qsrs_evaluator(problem, m: int) -> Callable:
    """``x_c -> (f_upper, g_upper)`` through sparse-surrogate interval bounds."""
    from .surrogate import worst_case_evaluation

    def evaluate(x_c):
        wc = worst_case_evaluation(problem, x_c, m)
        return wc.f_upper, wc.g_upper
    return evaluate
