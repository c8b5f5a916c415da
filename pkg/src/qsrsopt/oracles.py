"""Independent reference computations: grid scans, the double-loop optimizer
and Gauss-Chebyshev quadrature of expansion coefficients."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional, Sequence

import numpy as np

from .chebyshev import chebyshev_table
from .ga import GaConfig, OptimizationRun, optimize
from .interval import UncertainBox

# grid points the double-loop reference may evaluate in one run
DOUBLE_LOOP_BUDGET = 2e10
SCAN_CHUNK = 1 << 18


@dataclass(frozen=True)
class ScanConfig:
    """Tensor-grid density; None picks 201 points per dimension up to 2-D, 21 above."""

    points_per_dimension: Optional[int] = None

    def __post_init__(self):
        if self.points_per_dimension is not None and self.points_per_dimension < 2:
            raise ValueError("points_per_dimension must be at least 2")

    def points_for(self, d: int) -> int:
        if self.points_per_dimension is not None:
            return int(self.points_per_dimension)
        return 201 if d <= 2 else 21


class NonFiniteValueError(ValueError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


def scan_grid(box: UncertainBox, cfg: ScanConfig = ScanConfig()) -> np.ndarray:
    """All tensor-grid points of `box` (corners included), one per row.

    Zero-width dimensions contribute their single value.
    """
    active = ~box.degenerate_mask()
    k = cfg.points_for(int(active.sum()))
    axes = [np.linspace(lo, hi, k) if a else np.array([lo])
            for lo, hi, a in zip(box.lo, box.hi, active)]
    for ax, hi in zip(axes, box.hi):
        ax[-1] = hi
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dimension)


def scan_box_max(func: Callable, box: UncertainBox, cfg: ScanConfig = ScanConfig(),
                 vectorized: bool = True) -> tuple:
    """Largest value of `func` over the scan grid of `box`.

    Parameters
    ----------
    func : callable
        With ``vectorized=True`` maps an ``(N, d)`` array to ``N`` values;
        otherwise maps one point to a real.

    Returns
    -------
    (max_value, argmax)
    """
    grid = scan_grid(box, cfg)
    best, arg = -np.inf, None
    for start in range(0, len(grid), SCAN_CHUNK):
        chunk = grid[start:start + SCAN_CHUNK]
        if vectorized:
            vals = np.asarray(func(chunk), dtype=float).reshape(-1)
        else:
            vals = np.array([float(func(x)) for x in chunk])
        bad = np.flatnonzero(~np.isfinite(vals))
        if bad.size:
            x = chunk[bad[0]]
            raise NonFiniteValueError(f"non-finite value {vals[bad[0]]} at {x.tolist()}", x)
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, arg = float(vals[i]), chunk[i].copy()
    return best, arg


def scan_worst_case(problem, x_c, cfg: ScanConfig = ScanConfig()) -> tuple:
    """Grid maxima of the objective and each constraint over the uncertainty box of `x_c`.

    Returns ``(f_max, g_max, f_argmax, g_argmax)``.
    """
    x_c = np.asarray(x_c, dtype=float)
    problem.check_midpoint(x_c)
    box = problem.joint_box(x_c)
    grid = scan_grid(box, cfg)
    d = problem.dimension
    f_max, f_arg = -np.inf, None
    g_max = np.full(problem.n_constraints, -np.inf)
    g_arg = [None] * problem.n_constraints
    for start in range(0, len(grid), SCAN_CHUNK):
        chunk = grid[start:start + SCAN_CHUNK]
        f, g = problem.evaluate_batch(chunk[:, :d], chunk[:, d:])
        for name, vals in [("objective", f)] + [(f"g{i + 1}", g[:, i]) for i in range(g.shape[1])]:
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                raise NonFiniteValueError(f"{name} non-finite at {chunk[bad[0]].tolist()}", chunk[bad[0]])
        i = int(np.argmax(f))
        if f[i] > f_max:
            f_max, f_arg = float(f[i]), chunk[i].copy()
        for j in range(g.shape[1]):
            i = int(np.argmax(g[:, j]))
            if g[i, j] > g_max[j]:
                g_max[j], g_arg[j] = g[i, j], chunk[i].copy()
    return f_max, g_max, f_arg, g_arg


def scan_evaluator(problem, cfg: ScanConfig = ScanConfig()) -> Callable:
    def evaluate(x_c):
        f, g, _, _ = scan_worst_case(problem, x_c, cfg)
        return f, g
    return evaluate


class BudgetExceededError(RuntimeError):
    pass


def double_loop_cost(problem, outer_cfg: GaConfig, inner_cfg: ScanConfig) -> float:
    """Upper estimate of true-function evaluations of a double-loop run."""
    active = int(np.count_nonzero(problem.widths > 0)) + sum(
        not p.is_degenerate for p in problem.parameters)
    per_box = float(inner_cfg.points_for(active)) ** active
    return float(outer_cfg.islands * outer_cfg.subpopulation_size * outer_cfg.generations) * per_box


def double_loop_reference(problem, outer_cfg: GaConfig, inner_cfg: ScanConfig = ScanConfig(),
                          budget: float = DOUBLE_LOOP_BUDGET) -> OptimizationRun:
    """Min-max optimum with the inner worst case found by grid scan of the true functions."""
    if problem.dimension > 4:
        raise BudgetExceededError(f"double-loop reference limited to 4 design variables, got {problem.dimension}")
    cost = double_loop_cost(problem, outer_cfg, inner_cfg)
    if cost > budget:
        raise BudgetExceededError(f"estimated {cost:.3g} function evaluations exceeds budget {budget:.3g}")
    return optimize(problem, outer_cfg, scan_evaluator(problem, inner_cfg))


def chebyshev_coefficients_quadrature(func: Callable, box: UncertainBox, index_set: Sequence,
                                      points_per_dim: int) -> np.ndarray:
    """Expansion coefficients by tensor Gauss-Chebyshev quadrature.

    Each coefficient is ``prod_k w(a_k) * (pi / N)^d * sum g(x(u)) prod_k T_{a_k}(u_k)``
    over the node grid ``u = cos((2j - 1) pi / (2N))``, with ``w = 1/pi`` for
    degree 0 and ``2/pi`` otherwise.  `func` maps an ``(N^d, d)`` array of
    box points to values.
    """
    index = np.asarray([tuple(a) for a in index_set], dtype=np.int64).reshape(len(index_set), -1)
    d = box.dimension
    if index.shape[1] != d:
        raise ValueError("index set and box dimensions differ")
    max_deg = int(index.max(initial=0))
    if points_per_dim <= max_deg:
        raise ValueError(f"{points_per_dim} quadrature nodes cannot resolve degree {max_deg}; "
                         f"need more than {max_deg}")
    N = int(points_per_dim)
    nodes = np.cos((2.0 * np.arange(1, N + 1) - 1.0) * np.pi / (2.0 * N))
    grid_u = np.stack(np.meshgrid(*([nodes] * d), indexing="ij"), axis=-1).reshape(-1, d)
    x = box.center + box.half_widths * grid_u
    vals = np.asarray(func(x), dtype=float).reshape((N,) * d)
    table = chebyshev_table(nodes, max_deg)  # (max_deg + 1, N)
    coef = np.empty(len(index))
    for r, alpha in enumerate(index):
        t = vals
        for k in range(d - 1, -1, -1):
            t = t @ table[alpha[k]]
        w = np.prod(np.where(alpha == 0, 1.0 / np.pi, 2.0 / np.pi))
        coef[r] = w * (np.pi / N) ** d * t
    return coef


def load_reference(name: str = "three_hump_reference.json") -> dict:
    """Frozen reference optimum shipped with the package."""
    return json.loads((resources.files("qsrsopt") / "data" / name).read_text())


def rows_to_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def elastic_net_coordinate_descent(x, y, lambda1: float, lambda2: float, tol: float = 1e-15,
                                   max_sweeps: int = 200_000) -> np.ndarray:
    """Minimizer of ``|y - x b|^2 + lambda2 |b|^2 + lambda1 |b|_1`` by cyclic coordinate descent.

    This is the unrescaled objective; the rescaled elastic-net estimate is
    ``(1 + lambda2)`` times the returned vector.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[1]
    b = np.zeros(n)
    r = y.copy()
    sq = np.einsum("ij,ij->j", x, x)
    for _ in range(max_sweeps):
        delta = 0.0
        for j in range(n):
            if sq[j] + lambda2 == 0.0:
                continue
            z = x[:, j] @ r + sq[j] * b[j]
            new = np.sign(z) * max(abs(z) - 0.5 * lambda1, 0.0) / (sq[j] + lambda2)
            if new != b[j]:
                r -= x[:, j] * (new - b[j])
                delta = max(delta, abs(new - b[j]))
                b[j] = new
        if delta <= tol * max(1.0, np.abs(b).max()):
            break
    return b
