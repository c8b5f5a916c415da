"""Sparse Chebyshev surrogates over a box and their interval upper bounds.

A surrogate is fitted from a uniform design of ``m`` samples on ``3 m``
graded Chebyshev atoms by cross-validated elastic net.  The range of the
surrogate over its box is then enclosed by the absolute coefficient sum,
which replaces an inner worst-case search.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .chebyshev import Dictionary, evaluate_atoms, map_to_canonical
from .design import generate_plan
from .interval import Interval, UncertainBox, chebyshev_coefficient_bound
from .regression import FitContext

ATOMS_PER_SAMPLE = 3


class SampleEvaluationError(RuntimeError):
    """The evaluator returned a non-finite value at one of the design samples."""

    def __init__(self, message, index=None, point=None, response=None):
        super().__init__(message)
        self.index = index
        self.point = point
        self.response = response


@dataclass(frozen=True)
class FitReport:
    lambda2: float
    fraction: float
    n_selected: int
    training_residual: float
    m: int
    n_atoms: int
    cv_folds: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class ChebyshevModel:
    """``intercept + sum_i coefficients[i] * atom_i(u)`` over `box`.

    Degenerate (zero-width) dimensions of `box` are frozen: the dictionary
    spans only `active_dims` and `predict` requires the frozen coordinates
    to equal their box value.  The coefficient of the constant atom is
    always zero; the constant lives in `intercept`.
    """

    box: UncertainBox
    active_dims: tuple
    dictionary: Optional[Dictionary]
    coefficients: np.ndarray
    intercept: float
    fit_report: FitReport = field(compare=False)

    def predict(self, x) -> float:
        return float(self.predict_many(np.atleast_2d(x))[0])

    def predict_many(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.box.dimension:
            raise ValueError(f"point dimension {x.shape[1]} != box dimension {self.box.dimension}")
        outside = np.flatnonzero(~self.box.contains_rows(x))
        if outside.size:
            raise ValueError(f"point {x[outside[0]].tolist()} lies outside the model box")
        if self.dictionary is None:
            return np.full(x.shape[0], self.intercept)
        u = map_to_canonical(x[:, list(self.active_dims)], self.dictionary.box)
        return self.intercept + evaluate_atoms(self.dictionary.index_array, u) @ self.coefficients

    def interval_bound(self) -> Interval:
        return chebyshev_coefficient_bound(self.intercept, self.coefficients)

    def scan_max(self, points_per_dimension: int = 21) -> float:
        """Largest surrogate value on a tensor grid of the box (corners included)."""
        if self.dictionary is None:
            return self.intercept
        axes = [np.linspace(-1.0, 1.0, points_per_dimension)] * len(self.active_dims)
        u = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        return float(np.max(self.intercept + evaluate_atoms(self.dictionary.index_array, u)
                            @ self.coefficients))

    @property
    def index_set(self) -> list:
        return [] if self.dictionary is None else list(self.dictionary.index_set)

    def to_dict(self) -> dict:
        return {
            "box": {"lo": self.box.lo.tolist(), "hi": self.box.hi.tolist()},
            "active_dims": list(self.active_dims),
            "index_set": [list(idx) for idx in self.index_set],
            "coefficients": self.coefficients.tolist(),
            "intercept": self.intercept,
            "fit_report": self.fit_report.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, record: dict) -> "ChebyshevModel":
        box = UncertainBox.from_bounds(record["box"]["lo"], record["box"]["hi"])
        active = tuple(int(i) for i in record["active_dims"])
        coef = np.asarray(record["coefficients"], dtype=float)
        dictionary = None
        if active:
            dictionary = Dictionary(box.subbox(active), len(coef))
            stored = [tuple(idx) for idx in record["index_set"]]
            if stored != [tuple(idx) for idx in dictionary.index_set]:
                raise ValueError("stored index set does not match the graded order")
        return cls(box, active, dictionary, coef, float(record["intercept"]),
                   FitReport(**record["fit_report"]))

    @classmethod
    def from_json(cls, text: str) -> "ChebyshevModel":
        return cls.from_dict(json.loads(text))


_contexts: dict = {}
_contexts_lock = threading.Lock()


def _fit_context(m: int, d: int, n_atoms: int) -> tuple:
    """Plan, canonical points and fit context shared by every box of shape (m, d)."""
    key = (m, d, n_atoms)
    with _contexts_lock:
        hit = _contexts.get(key)
    if hit is not None:
        return hit
    plan = generate_plan(m, d)
    u = 2.0 * plan.points - 1.0
    index = np.array(Dictionary(UncertainBox.from_bounds(-np.ones(d), np.ones(d)), n_atoms).index_array)
    phi = evaluate_atoms(index, u)
    ctx = FitContext(phi, constant_column=0)
    with _contexts_lock:
        hit = _contexts.setdefault(key, (plan, u, ctx))
    return hit


def design_samples(box: UncertainBox, m: int) -> tuple:
    """Uniform-design samples over `box`; returns ``(samples, active_dims)``.

    Degenerate dimensions are held at their value and all samples share it.
    """
    if m < 2:
        raise ValueError(f"need m >= 2 samples, got {m}")
    active = tuple(int(i) for i in np.flatnonzero(~box.degenerate_mask()))
    if not active:
        return box.center.reshape(1, -1), active
    plan, _, _ = _fit_context(m, len(active), ATOMS_PER_SAMPLE * m)
    samples = np.tile(box.center, (m, 1))
    lo, hi = box.lo[list(active)], box.hi[list(active)]
    samples[:, list(active)] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * (2.0 * plan.points - 1.0)
    return samples, active


def fit_surrogate(box: UncertainBox, values, m: int, active_dims: Optional[tuple] = None) -> ChebyshevModel:
    """Fit a surrogate to responses at the :func:`design_samples` of `box`."""
    values = np.asarray(values, dtype=float).ravel()
    if active_dims is None:
        active_dims = tuple(int(i) for i in np.flatnonzero(~box.degenerate_mask()))
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise SampleEvaluationError(f"non-finite response at sample {int(bad[0])}", index=int(bad[0]))
    if not active_dims:
        report = FitReport(0.0, 1.0, 0, 0.0, 1, 0, 0)
        return ChebyshevModel(box, (), None, np.zeros(0), float(values[0]), report)
    n_atoms = ATOMS_PER_SAMPLE * m
    _, u, ctx = _fit_context(m, len(active_dims), n_atoms)
    coef, intercept, cv = ctx.fit(values)
    coef = np.array(coef, dtype=float)
    intercept += coef[0]
    coef[0] = 0.0
    residual = float(np.linalg.norm(values - intercept - ctx.phi @ coef))
    report = FitReport(cv.lambda2, cv.fraction, int(np.count_nonzero(coef)), residual,
                       m, n_atoms, ctx.k)
    dictionary = Dictionary(box.subbox(active_dims), n_atoms)
    return ChebyshevModel(box, tuple(active_dims), dictionary, coef, float(intercept), report)


def build_qsrs(evaluator: Callable, box: UncertainBox, m: int) -> ChebyshevModel:
    """Sample `evaluator` on a uniform design over `box` and fit a surrogate.

    Parameters
    ----------
    evaluator : callable
        Maps a point (1-D array of length ``box.dimension``) to a real.
    box : UncertainBox
    m : int
        Number of samples; the dictionary has ``3 m`` atoms.
    """
    samples, active = design_samples(box, m)
    values = np.empty(len(samples))
    for i, x in enumerate(samples):
        v = float(evaluator(x))
        if not np.isfinite(v):
            raise SampleEvaluationError(f"evaluator returned {v} at sample {i}, x={x.tolist()}",
                                        index=i, point=x.copy())
        values[i] = v
    return fit_surrogate(box, values, m, active)


@dataclass(frozen=True)
class WorstCase:
    f_upper: float
    g_upper: np.ndarray
    models: tuple = field(compare=False, repr=False)

    @property
    def violation(self) -> float:
        return float(np.sum(np.maximum(self.g_upper, 0.0)))


def worst_case_evaluation(problem, x_c, m: int, keep_models: bool = False) -> WorstCase:
    """Upper bounds of the objective and every constraint over the uncertainty box of `x_c`.

    One sample set over the joint (design, parameter) box is shared by all
    responses; each response gets its own surrogate whose coefficient-sum
    bound is reported.
    """
    x_c = np.asarray(x_c, dtype=float)
    problem.check_midpoint(x_c)
    box = problem.joint_box(x_c)
    samples, active = design_samples(box, m)
    d = problem.dimension
    f, g = problem.evaluate_batch(samples[:, :d], samples[:, d:])
    responses = [("objective", f)] + [(f"g{i + 1}", g[:, i]) for i in range(g.shape[1])]
    uppers, models = [], []
    for name, values in responses:
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            i = int(bad[0])
            raise SampleEvaluationError(
                f"{name} is non-finite at sample {i}, point {samples[i].tolist()}",
                index=i, point=samples[i].copy(), response=name)
        try:
            model = fit_surrogate(box, values, m, active)
        except Exception as exc:
            raise RuntimeError(f"surrogate fit failed for {name}: {exc}") from exc
        uppers.append(model.interval_bound().hi)
        if keep_models:
            models.append(model)
    return WorstCase(uppers[0], np.asarray(uppers[1:], dtype=float), tuple(models))
