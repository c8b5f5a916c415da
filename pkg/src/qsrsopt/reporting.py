"""Run configuration files and the optimize / validate / sparsity reports."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import os
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chebyshev import build_index_set
from .ga import TRACE_COLUMNS, CachedEvaluator, GaConfig, OptimizationError, optimize, qsrs_evaluator
from .interval import UncertainBox
from .oracles import ScanConfig, chebyshev_coefficients_quadrature, scan_grid
from .problems import BUILTIN_PROBLEMS, get_problem
from .surrogate import ATOMS_PER_SAMPLE, worst_case_evaluation

SIGNIFICANCE_RTOL = 1e-6

# problem-specific defaults: samples per surrogate and GA settings
PROBLEM_DEFAULTS = {
    "three_hump": {"m": 30, "ga": {"subpopulation_size": 200, "generations": 2}},
    "pressure_vessel": {"m": 100, "ga": {"subpopulation_size": 300, "generations": 6}},
}
GENERIC_DEFAULTS = {"m": 30, "ga": {"subpopulation_size": 50, "generations": 20}}

SUMMARY_COLUMNS = ("seed", "x_c", "f_upper", "g_upper", "feasible", "violation",
                   "requested", "cache_hits", "evaluator_calls")
VALIDATE_COLUMNS = ("response", "qsrs_lower", "qsrs_upper", "scan_min", "scan_max",
                    "abs_gap", "rel_gap")
SPARSITY_COLUMNS = ("rank", "multi_index", "coefficient", "abs_coefficient", "significant")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def _family(problem: str) -> str:
    if problem.startswith("three_hump"):
        return "three_hump"
    return problem


@dataclass(frozen=True)
class RunConfig:
    problem: str = "three_hump"
    m: int = 30
    ga: GaConfig = field(default_factory=GaConfig)
    seeds: tuple = (0,)
    scan: ScanConfig = field(default_factory=ScanConfig)
    width: Optional[float] = None
    out: Optional[str] = None

    def __post_init__(self):
        if int(self.m) < 2:
            raise ConfigError(f"m: need at least 2 samples, got {self.m}")
        if len(self.seeds) == 0:
            raise ConfigError("seeds: at least one seed is required")
        if self.width is not None and self.width < 0:
            raise ConfigError("width: must be nonnegative")

    @property
    def n_atoms(self) -> int:
        return ATOMS_PER_SAMPLE * self.m

    def load_problem(self):
        try:
            problem = get_problem(self.problem)
        except (KeyError, OSError, ValueError) as exc:
            raise ConfigError(f"problem: {exc}") from None
        if self.width is not None:
            try:
                problem = problem.with_widths(self.width)
            except ValueError as exc:
                raise ConfigError(f"width: {exc}") from None
        return problem

    def to_dict(self) -> dict:
        return {"problem": self.problem, "m": self.m, "n_atoms": self.n_atoms,
                "ga": self.ga.to_dict(), "seeds": list(self.seeds),
                "scan": {"points_per_dimension": self.scan.points_per_dimension},
                "width": self.width, "out": self.out}

    @classmethod
    def from_dict(cls, record: dict) -> "RunConfig":
        return cls(record["problem"], int(record["m"]), GaConfig(**record["ga"]),
                   tuple(record["seeds"]), ScanConfig(record["scan"]["points_per_dimension"]),
                   record.get("width"), record.get("out"))


_GA_FIELDS = {f.name: f.type for f in dataclasses.fields(GaConfig)}


def _convert(section: str, key: str, value: str, kind):
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
        if kind == "Optional[int]":
            return None if value.strip().lower() in ("", "none") else int(value)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {value!r}") from None
    return value


def resolve_config(problem: Optional[str] = None, path: Optional[str] = None,
                   seed: Optional[int] = None, out: Optional[str] = None,
                   parallel: Optional[int] = None) -> RunConfig:
    """Merge problem defaults, an optional INI file and command-line overrides.

    The INI file has a ``[run]`` section (problem, m, seeds, width, out), a
    ``[ga]`` section with :class:`GaConfig` fields and an ``[oracle]``
    section with ``points_per_dimension``.
    """
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config: file {path!r} not found")
        try:
            cp.read(path)
        except configparser.Error as exc:
            raise ConfigError(f"config: {exc}") from None
    for section in cp.sections():
        if section not in ("run", "ga", "oracle"):
            raise ConfigError(f"{section}: unknown section")
    run = cp["run"] if cp.has_section("run") else {}
    name = problem or run.get("problem", "three_hump")
    if name not in BUILTIN_PROBLEMS and not os.path.exists(name):
        raise ConfigError(f"problem: unknown problem {name!r}")
    defaults = PROBLEM_DEFAULTS.get(_family(name), GENERIC_DEFAULTS)
    for key in run:
        if key not in ("problem", "m", "seeds", "width", "out"):
            raise ConfigError(f"run.{key}: unknown field")
    m = _convert("run", "m", run["m"], int) if "m" in run else defaults["m"]
    ga_kwargs = dict(defaults["ga"])
    if cp.has_section("ga"):
        for key, value in cp["ga"].items():
            if key not in _GA_FIELDS:
                raise ConfigError(f"ga.{key}: unknown field")
            ga_kwargs[key] = _convert("ga", key, value, _GA_FIELDS[key])
    if parallel is not None:
        ga_kwargs["parallel"] = parallel
    if "seeds" in run:
        try:
            seeds = tuple(int(s) for s in run["seeds"].replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"run.seeds: cannot parse {run['seeds']!r}") from None
    else:
        seeds = (0,)
    if seed is not None:
        seeds = (int(seed),)
    ga_kwargs["seed"] = seeds[0]
    try:
        ga = GaConfig(**ga_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"ga: {exc}") from None
    scan = ScanConfig()
    if cp.has_section("oracle"):
        for key in cp["oracle"]:
            if key != "points_per_dimension":
                raise ConfigError(f"oracle.{key}: unknown field")
        try:
            scan = ScanConfig(_convert("oracle", "points_per_dimension",
                                       cp["oracle"]["points_per_dimension"], int))
        except ValueError as exc:
            raise ConfigError(f"oracle.points_per_dimension: {exc}") from None
    width = _convert("run", "width", run["width"], float) if "width" in run else None
    cfg = RunConfig(name, m, ga, seeds, scan, width, out or run.get("out"))
    cfg.load_problem()
    return cfg


def budget_line(cfg: RunConfig, deterministic: bool) -> str:
    if deterministic:
        return "deterministic mode: 1 direct evaluation per candidate, no surrogate"
    return f"sampling points per iteration: {cfg.m}, basis functions: {cfg.n_atoms}"


def cmd_optimize(cfg: RunConfig) -> dict:
    """Run the surrogate-based min-max GA once per seed and build the report."""
    problem = cfg.load_problem()
    deterministic = problem.deterministic
    runs = []
    for seed in cfg.seeds:
        ga = dataclasses.replace(cfg.ga, seed=int(seed))
        t0 = time.perf_counter()
        run = optimize(problem, ga, CachedEvaluator(qsrs_evaluator(problem, cfg.m), ga.parallel))
        elapsed = time.perf_counter() - t0
        best = run.best
        runs.append({
            "seed": int(seed),
            "x_c": best.x_c.tolist(),
            "f_upper": best.f_upper,
            "g_upper": best.g_upper.tolist(),
            "feasible": best.feasible,
            "violation": best.violation,
            "requested": run.requested,
            "cache_hits": run.cache_hits,
            "evaluator_calls": run.evaluator_calls,
            "generations_run": run.generations_run,
            "stopped_by_stall": run.stopped_by_stall,
            "budget_arithmetic": ga.evaluations_per_generation * run.generations_run,
            "trace": run.trace,
            "_elapsed": elapsed,
        })
    return {
        "command": "optimize",
        "problem": problem.name,
        "description": problem.description,
        "mode": "deterministic" if deterministic else "interval",
        "budget": {
            "line": budget_line(cfg, deterministic),
            "sampling_points_per_iteration": 1 if deterministic else cfg.m,
            "basis_functions": 0 if deterministic else cfg.n_atoms,
            "evaluations_per_generation": cfg.ga.evaluations_per_generation,
            "total_evaluator_calls": sum(r["evaluator_calls"] for r in runs),
            "total_cache_hits": sum(r["cache_hits"] for r in runs),
            "total_function_evaluations": sum(r["evaluator_calls"] for r in runs)
            * (1 if deterministic else cfg.m),
        },
        "config": cfg.to_dict(),
        "runs": runs,
    }


def format_optimize(report: dict) -> str:
    det = report["mode"] == "deterministic"
    fname, gname = ("f", "g") if det else ("f_upper", "g_upper")
    lines = [f"problem: {report['problem']} ({report['description']})"]
    if det:
        lines.append("deterministic mode: widths are zero, interval columns omitted")
    lines.append(report["budget"]["line"])
    for r in report["runs"]:
        lines.append(f"seed {r['seed']}: x_c = {np.array2string(np.asarray(r['x_c']), precision=6)}")
        lines.append(f"  {fname} = {r['f_upper']:.6g}, {gname} = "
                     f"{np.array2string(np.asarray(r['g_upper']), precision=6)}, feasible = {r['feasible']}")
        lines.append(f"  evaluator calls = {r['evaluator_calls']} "
                     f"({r['budget_arithmetic']} requested - {r['cache_hits']} cache hits), "
                     f"generations = {r['generations_run']}, time = {r['_elapsed']:.1f} s")
    lines.append(f"total evaluator calls: {report['budget']['total_evaluator_calls']}, "
                 f"function evaluations: {report['budget']['total_function_evaluations']}")
    return "\n".join(lines)


def _jsonable(report: dict) -> dict:
    """Drop timing fields (prefixed with an underscore) so reports are reproducible."""
    if isinstance(report, dict):
        return {k: _jsonable(v) for k, v in report.items() if not k.startswith("_")}
    if isinstance(report, list):
        return [_jsonable(v) for v in report]
    if isinstance(report, float) and not np.isfinite(report):
        return None
    return report


def write_optimize(report: dict, out: str) -> list:
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, "report.json"), os.path.join(out, "summary.csv")]
    with open(paths[0], "w") as fh:
        json.dump(_jsonable(report), fh, indent=1)
    with open(paths[1], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for r in report["runs"]:
            writer.writerow([r["seed"], " ".join(repr(v) for v in r["x_c"]), repr(r["f_upper"]),
                             " ".join(repr(v) for v in r["g_upper"]), r["feasible"], repr(r["violation"]),
                             r["requested"], r["cache_hits"], r["evaluator_calls"]])
    for r in report["runs"]:
        path = os.path.join(out, f"trace_seed{r['seed']}.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            writer.writerows([[row[c] for c in TRACE_COLUMNS] for row in r["trace"]])
        paths.append(path)
    return paths


def cmd_validate(cfg: RunConfig, point) -> dict:
    """Surrogate interval bounds next to scan ranges at one design midpoint."""
    problem = cfg.load_problem()
    point = np.asarray(point, dtype=float)
    try:
        problem.check_midpoint(point)
    except ValueError as exc:
        raise ConfigError(f"point: {exc}") from None
    wc = worst_case_evaluation(problem, point, cfg.m, keep_models=True)
    box = problem.joint_box(point)
    grid = scan_grid(box, cfg.scan)
    d = problem.dimension
    f, g = problem.evaluate_batch(grid[:, :d], grid[:, d:])
    values = [f] + [g[:, i] for i in range(g.shape[1])]
    names = ["objective"] + [f"g{i + 1}" for i in range(g.shape[1])]
    rows = []
    for name, model, vals in zip(names, wc.models, values):
        bound = model.interval_bound()
        smax, smin = float(vals.max()), float(vals.min())
        gap = bound.hi - smax
        rel = gap / abs(smax) if smax != 0 else (0.0 if gap == 0 else float("inf"))
        rows.append({"response": name, "qsrs_lower": bound.lo, "qsrs_upper": bound.hi,
                     "scan_min": smin, "scan_max": smax, "abs_gap": gap, "rel_gap": rel,
                     "n_selected": model.fit_report.n_selected,
                     "lambda2": model.fit_report.lambda2, "fraction": model.fit_report.fraction})
    return {"command": "validate", "problem": problem.name, "point": point.tolist(),
            "budget_line": budget_line(cfg, problem.deterministic),
            "scan_points_per_dimension": cfg.scan.points_for(int(np.count_nonzero(~box.degenerate_mask()))),
            "config": cfg.to_dict(), "rows": rows}


def format_validate(report: dict) -> str:
    lines = [f"problem: {report['problem']} at x_c = {report['point']}", report["budget_line"],
             f"scan grid: {report['scan_points_per_dimension']} points per dimension",
             "{:<10} {:>14} {:>14} {:>14} {:>14} {:>12} {:>10}".format(*VALIDATE_COLUMNS)]
    for r in report["rows"]:
        lines.append("{:<10} {:>14.6g} {:>14.6g} {:>14.6g} {:>14.6g} {:>12.4g} {:>10.3g}".format(
            *(r[c] for c in VALIDATE_COLUMNS)))
    return "\n".join(lines)


def write_rows(path: str, columns, rows) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for r in rows:
            writer.writerow([r[c] for c in columns])


def write_validate(report: dict, out: str) -> list:
    os.makedirs(out, exist_ok=True)
    paths = [os.path.join(out, "validate.json"), os.path.join(out, "validate.csv")]
    with open(paths[0], "w") as fh:
        json.dump(_jsonable(report), fh, indent=1)
    write_rows(paths[1], VALIDATE_COLUMNS, report["rows"])
    return paths


def _quadratic_demo(x):
    return (x[:, 0] + 2 * x[:, 1] - 7) ** 2 + (2 * x[:, 0] + x[:, 1] - 5) ** 2


SPARSITY_DEMOS = {
    "quadratic": (_quadratic_demo, ([-10, -10], [10, 10]), 30),
    "cubic": (lambda x: x[:, 0] ** 3 + 2 * x[:, 0], ([-1], [1]), 4),
    "t5": (lambda x: np.cos(5 * np.arccos(np.clip(x[:, 0], -1, 1))), ([-1], [1]), 8),
    "zero": (lambda x: np.zeros(len(x)), ([-1], [1]), 8),
}


def significant_count(coef, rtol: float = SIGNIFICANCE_RTOL) -> int:
    coef = np.abs(np.asarray(coef, dtype=float))
    top = coef.max(initial=0.0)
    return int(np.count_nonzero(coef > rtol * top)) if top > 0 else 0


def cmd_demo_sparsity(target: str = "quadratic", n_atoms: Optional[int] = None,
                      order: Optional[int] = None) -> dict:
    """Quadrature coefficients of a demo function, sorted by magnitude."""
    if target not in SPARSITY_DEMOS:
        raise ConfigError(f"target: unknown demo {target!r}; choose from {sorted(SPARSITY_DEMOS)}")
    func, (lo, hi), default_atoms = SPARSITY_DEMOS[target]
    n_atoms = default_atoms if n_atoms is None else int(n_atoms)
    box = UncertainBox.from_bounds(lo, hi)
    index = build_index_set(box.dimension, n_atoms)
    max_deg = max(max(a) for a in index)
    order = max_deg + 8 if order is None else int(order)
    try:
        coef = chebyshev_coefficients_quadrature(func, box, index, order)
    except ValueError as exc:
        raise ConfigError(f"order: {exc}") from None
    ranked = np.argsort(-np.abs(coef), kind="stable")
    top = float(np.abs(coef).max(initial=0.0))
    rows = [{"rank": r + 1, "multi_index": " ".join(str(k) for k in index[i]),
             "coefficient": float(coef[i]), "abs_coefficient": float(abs(coef[i])),
             "significant": bool(top > 0 and abs(coef[i]) > SIGNIFICANCE_RTOL * top)}
            for r, i in enumerate(ranked)]
    return {"command": "demo-sparsity", "target": target, "n_atoms": n_atoms,
            "quadrature_points_per_dimension": order, "threshold_rtol": SIGNIFICANCE_RTOL,
            "significant": significant_count(coef), "rows": rows}


def format_demo_sparsity(report: dict) -> str:
    lines = [f"target: {report['target']}, atoms: {report['n_atoms']}, "
             f"quadrature points per dimension: {report['quadrature_points_per_dimension']}",
             f"{report['significant']} significant coefficients (|c| > 1e-6 max|c|)"]
    for r in report["rows"][:max(report["significant"], 1) + 4]:
        mark = "*" if r["significant"] else " "
        lines.append(f"{mark} ({r['multi_index']}) {r['coefficient']: .6e}")
    return "\n".join(lines)


def write_demo_sparsity(report: dict, out: str) -> list:
    path = os.path.join(out, f"sparsity_{report['target']}.csv")
    write_rows(path, SPARSITY_COLUMNS, report["rows"])
    return [path]


__all__ = ["ConfigError", "OptimizationError", "RunConfig", "resolve_config", "cmd_optimize",
           "cmd_validate", "cmd_demo_sparsity"]
