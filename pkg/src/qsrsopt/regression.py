"""LASSO paths by least-angle regression and elastic net via data augmentation.

The elastic net with ridge weight ``lam2`` is solved as a LASSO on the
augmented data ``X* = (X; sqrt(lam2) I) / sqrt(1 + lam2)``, ``y* = (y; 0)``
and the path coefficients are rescaled by ``sqrt(1 + lam2)``.  The
augmentation is applied to the Gram matrix, never to ``X`` itself.

Path points are chosen by k-fold cross-validation over ``lam2`` and the
fraction of the final L1 norm at which the path is read.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from . import _lars

log = logging.getLogger(__name__)

LAMBDA2_GRID = (0.0, 0.0001, 0.001, 0.01, 0.1, 1.0, 10.0)
FRACTION_GRID = tuple(np.round(np.arange(1, 21) * 0.05, 2))
RANK_TOL = 1e-10
CORR_TOL = 1e-12
# CV errors closer than this fraction of the response variance count as ties
CV_TIE_RTOL = 1e-10


class RankDeficiencyWarning(UserWarning):
    pass


class InsufficientSamplesError(ValueError):
    pass


@dataclass
class RegressionProblem:
    """Centred, column-normalized regression data.

    `design` holds the normalized penalized columns; the unpenalized
    constant column (if any) of the raw matrix is absorbed into the
    intercept.  ``raw_j = centred_j * column_scales[j] + column_means[j]``.
    """

    design: np.ndarray
    response: np.ndarray
    column_scales: np.ndarray
    column_means: np.ndarray
    response_offset: float
    penalized: np.ndarray
    n_raw: int

    @classmethod
    def from_raw(cls, phi, f, constant_column: Optional[int] = 0) -> "RegressionProblem":
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        f = np.asarray(f, dtype=float).ravel()
        if phi.shape[0] != f.shape[0]:
            raise ValueError(f"design has {phi.shape[0]} rows but response has {f.shape[0]}")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(f))):
            raise ValueError("non-finite values in regression data")
        n_raw = phi.shape[1]
        penalized = np.array([j for j in range(n_raw) if j != constant_column], dtype=np.int64)
        x = phi[:, penalized]
        means = x.mean(axis=0)
        xc = x - means
        scales = np.sqrt(np.einsum("ij,ij->j", xc, xc))
        # a column constant on the samples carries no information
        flat = scales <= 1e-14 * max(1.0, np.sqrt(x.shape[0]))
        scales = np.where(flat, 1.0, scales)
        xn = xc / scales
        xn[:, flat] = 0.0
        offset = float(f.mean())
        return cls(xn, f - offset, scales, means, offset, penalized, n_raw)

    @property
    def n_samples(self) -> int:
        return self.design.shape[0]

    @property
    def n_features(self) -> int:
        return self.design.shape[1]

    def gram(self) -> np.ndarray:
        return self.design.T @ self.design

    def correlations(self) -> np.ndarray:
        return self.design.T @ self.response

    def to_raw(self, beta_normalized) -> tuple:
        """Map normalized coefficients back to raw columns; returns (coef, intercept)."""
        beta_normalized = np.asarray(beta_normalized, dtype=float)
        coef = np.zeros(self.n_raw)
        raw = beta_normalized / self.column_scales
        coef[self.penalized] = raw
        intercept = self.response_offset - float(self.column_means @ raw)
        return coef, intercept


@dataclass
class LarsStep:
    active_set: tuple
    beta: np.ndarray
    l1_norm: float
    max_correlation: float


@dataclass
class LarsPath:
    """Breakpoints of a LASSO path, in normalized coordinates."""

    betas: np.ndarray
    l1_norms: np.ndarray
    max_correlations: np.ndarray
    active: np.ndarray
    complete: bool
    n_excluded: int = 0

    @property
    def steps(self) -> list:
        return [LarsStep(tuple(np.flatnonzero(a).tolist()), b, float(l), float(c))
                for a, b, l, c in zip(self.active, self.betas, self.l1_norms, self.max_correlations)]

    @property
    def final_l1(self) -> float:
        return float(self.l1_norms[-1])

    def lambda1(self, k: int) -> float:
        """Penalty weight of breakpoint `k` for ``||y - X b||^2 + lam1 ||b||_1``."""
        return 2.0 * float(self.max_correlations[k])

    def at_fraction(self, s: float) -> np.ndarray:
        return _lars.interpolate_at_l1(self.betas, self.l1_norms, float(s) * self.final_l1)

    def at_l1(self, t: float) -> np.ndarray:
        return _lars.interpolate_at_l1(self.betas, self.l1_norms, float(t))

    def with_at_most(self, n_atoms: int) -> np.ndarray:
        counts = self.active.sum(axis=1)
        ok = np.flatnonzero(counts <= n_atoms)
        return self.betas[ok[-1]].copy()


def _run_path(gram, xy, lam2=0.0, max_l1=np.inf, max_steps=None) -> LarsPath:
    n = gram.shape[0]
    if max_steps is None:
        max_steps = 8 * n + 16
    betas, l1s, cmax, active, _, complete, n_excl = _lars.lars_lasso_gram(
        gram, xy, float(lam2), float(max_l1), int(max_steps), RANK_TOL, CORR_TOL)
    return LarsPath(betas, l1s, cmax, active, bool(complete), int(n_excl))


def lars_lasso_path(prob: RegressionProblem, lambda2: float = 0.0) -> LarsPath:
    """Full LASSO path of a preprocessed problem (augmented when ``lambda2 > 0``).

    Atoms that become numerically collinear with the active set are skipped
    with a :class:`RankDeficiencyWarning`.
    """
    xy = prob.correlations()
    # unit-norm columns bound |c_j| by ||y||; anything below the floor is round-off
    if np.abs(xy).max(initial=0.0) <= CORR_TOL * np.linalg.norm(prob.response):
        xy = np.zeros_like(xy)
    path = _run_path(prob.gram(), xy, lambda2)
    if path.n_excluded:
        warnings.warn(f"{path.n_excluded} collinear atom(s) skipped on the LARS path",
                      RankDeficiencyWarning, stacklevel=2)
    if not path.complete:
        log.debug("LARS path stopped before reaching zero residual correlation")
    return path


def augmented_data(x, y, lambda2: float) -> tuple:
    """Explicit augmented data set ``(X*, y*)``; used to check the Gram identity."""
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    xs = np.vstack([x, np.sqrt(lambda2) * np.eye(n)]) / np.sqrt(1.0 + lambda2)
    ys = np.concatenate([np.asarray(y, dtype=float), np.zeros(n)])
    return xs, ys


@dataclass
class ElasticNetConfig:
    lambda2: float = 0.0
    fraction: float = 1.0
    max_atoms: Optional[int] = None
    cv_folds: int = 10
    lambda2_grid: Sequence[float] = LAMBDA2_GRID
    fraction_grid: Sequence[float] = FRACTION_GRID
    shuffle_seed: Optional[int] = None

    def __post_init__(self):
        if self.lambda2 < 0:
            raise ValueError("lambda2 must be nonnegative")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("fraction must lie in (0, 1]")
        if any(v < 0 for v in self.lambda2_grid):
            raise ValueError("lambda2 grid values must be nonnegative")


@dataclass
class ElasticNetFit:
    coef: np.ndarray
    intercept: float
    beta_normalized: np.ndarray
    lambda2: float
    fraction: float
    path: LarsPath

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.coef))


def _endpoint(gram, xy, lam2):
    # least-squares end of the augmented path, full rank for lam2 > 0
    a = (gram + lam2 * np.eye(gram.shape[0])) / (1.0 + lam2)
    return linalg.solve(a, xy / np.sqrt(1.0 + lam2), assume_a="pos")


def select_on_path(path: LarsPath, fraction: float, max_atoms: Optional[int] = None,
                   endpoint: Optional[np.ndarray] = None) -> np.ndarray:
    if max_atoms is not None:
        return path.with_at_most(max_atoms)
    if endpoint is not None:
        if fraction >= 1.0:
            return endpoint.copy()
        return path.at_l1(fraction * float(np.abs(endpoint).sum()))
    return path.at_fraction(fraction)


def elastic_net_fit(prob: RegressionProblem, cfg: ElasticNetConfig) -> ElasticNetFit:
    """Elastic-net coefficients in the raw basis.

    Runs the augmented LASSO path, reads it at ``cfg.fraction`` of its final
    L1 norm (or at the last point with at most ``cfg.max_atoms`` atoms),
    rescales by ``sqrt(1 + lambda2)`` and undoes the preprocessing.  With
    ``lambda2 == 0`` this is exactly the plain LASSO path selection.
    """
    lam2 = float(cfg.lambda2)
    path = lars_lasso_path(prob, lam2)
    beta_star = select_on_path(path, cfg.fraction, cfg.max_atoms)
    beta = np.sqrt(1.0 + lam2) * beta_star
    coef, intercept = prob.to_raw(beta)
    return ElasticNetFit(coef, intercept, beta, lam2, cfg.fraction, path)


def fold_indices(m: int, k: int, seed: Optional[int] = None) -> list:
    """Contiguous folds of the sample ordering, optionally after a seeded shuffle."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if m < k:
        raise InsufficientSamplesError(f"insufficient samples for folds: m={m} < k={k}")
    order = np.arange(m)
    if seed is not None:
        order = np.random.default_rng(seed).permutation(m)
    return [np.sort(block) for block in np.array_split(order, k)]


def default_folds(m: int, preferred: int = 10) -> int:
    """`preferred` folds when m allows it, otherwise the largest divisor of m below it."""
    if m >= preferred and m % preferred == 0:
        return preferred
    for k in range(min(preferred, m), 1, -1):
        if m % k == 0:
            return k
    return min(preferred, m)


@dataclass
class CVResult:
    lambda2: float
    fraction: float
    lambda2_grid: np.ndarray
    fraction_grid: np.ndarray
    mean_errors: np.ndarray            # (n_lambda2, n_fraction)
    fold_errors: np.ndarray            # (n_lambda2, n_fraction, k)

    def rows(self) -> list:
        out = []
        for a, lam2 in enumerate(self.lambda2_grid):
            for b, s in enumerate(self.fraction_grid):
                out.append((float(lam2), float(s), float(self.mean_errors[a, b]),
                            [float(e) for e in self.fold_errors[a, b]]))
        return out

    def to_csv(self, path) -> None:
        k = self.fold_errors.shape[2]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lambda2", "fraction", "mean_error"] + [f"fold_{i + 1}" for i in range(k)])
            for lam2, s, mean, folds in self.rows():
                writer.writerow([lam2, s, mean] + folds)


def _first_tied(tied, lambda2_grid, fraction_grid) -> tuple:
    # smallest lambda2 first, then smallest fraction
    cells = np.argwhere(tied)
    keys = [(lambda2_grid[a], fraction_grid[b]) for a, b in cells]
    a, b = cells[min(range(len(keys)), key=keys.__getitem__)]
    return int(a), int(b)


class _Fold:
    __slots__ = ("train", "test", "prob", "gram", "xh", "endpoint_ops")

    def __init__(self, phi, train, test, constant_column, lambda2_grid):
        self.train = train
        self.test = test
        # response is set per fit; only the column statistics matter here
        self.prob = RegressionProblem.from_raw(phi[train], np.zeros(len(train)), constant_column)
        self.gram = self.prob.gram()
        x = phi[test][:, self.prob.penalized]
        xh = (x - self.prob.column_means) / self.prob.column_scales
        xh[:, np.all(self.prob.design == 0.0, axis=0)] = 0.0
        self.xh = np.ascontiguousarray(xh)
        # endpoint of the augmented path is linear in the centred response
        self.endpoint_ops = {}
        xt = self.prob.design.T
        for lam2 in lambda2_grid:
            if lam2 > 0:
                a = (self.gram + lam2 * np.eye(self.gram.shape[0])) / (1.0 + lam2)
                self.endpoint_ops[lam2] = linalg.solve(a, xt, assume_a="pos") / np.sqrt(1.0 + lam2)


class FitContext:
    """Cross-validated elastic-net fitting for a fixed design matrix.

    Everything that depends only on the design (fold splits, column
    statistics, Gram matrices, augmented endpoint operators) is computed
    once; :meth:`fit` then only depends on the response.
    """

    def __init__(self, phi, constant_column: Optional[int] = 0, cv_folds: Optional[int] = None,
                 lambda2_grid: Sequence[float] = LAMBDA2_GRID,
                 fraction_grid: Sequence[float] = FRACTION_GRID,
                 shuffle_seed: Optional[int] = None):
        phi = np.ascontiguousarray(np.atleast_2d(np.asarray(phi, dtype=float)))
        self.phi = phi
        self.m = phi.shape[0]
        self.constant_column = constant_column
        self.k = default_folds(self.m) if cv_folds is None else int(cv_folds)
        self.lambda2_grid = np.asarray(lambda2_grid, dtype=float)
        self.fraction_grid = np.asarray(fraction_grid, dtype=float)
        self.full = RegressionProblem.from_raw(phi, np.zeros(self.m), constant_column)
        self.full_gram = self.full.gram()
        self.folds = [
            _Fold(phi, np.setdiff1d(np.arange(self.m), test), test, constant_column, self.lambda2_grid)
            for test in fold_indices(self.m, self.k, shuffle_seed)
        ]

    def problem(self, f) -> RegressionProblem:
        f = np.asarray(f, dtype=float)
        offset = float(f.mean())
        return RegressionProblem(self.full.design, f - offset, self.full.column_scales,
                                 self.full.column_means, offset, self.full.penalized, self.full.n_raw)

    def cross_validate(self, f, prune: bool = False) -> CVResult:
        """CV error table over the (lambda2, fraction) grid.

        With ``prune=True`` the lambda2 rows are evaluated in ascending order
        and evaluation stops once a row reaches the tie floor: no later row
        can then be selected, since ties go to the smaller lambda2.  Skipped
        rows are reported as NaN.
        """
        f = np.asarray(f, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("non-finite responses")
        nl, ns = len(self.lambda2_grid), len(self.fraction_grid)
        fold_err = np.full((nl, ns, self.k), np.nan)
        partial = self.fraction_grid[self.fraction_grid < 1.0]
        max_partial = float(partial.max()) if partial.size else 0.0
        scale = float(np.mean((f - f.mean()) ** 2))
        floor = CV_TIE_RTOL * max(scale, np.finfo(float).tiny)
        order = np.argsort(self.lambda2_grid, kind="stable")
        folds = []
        for fold in self.folds:
            ytr = f[fold.train]
            off = ytr.mean()
            yc = ytr - off
            folds.append((fold, yc, fold.prob.design.T @ yc, f[fold.test] - off))
        for a in order:
            lam2 = float(self.lambda2_grid[a])
            for i, (fold, yc, xy, rh) in enumerate(folds):
                if lam2 > 0:
                    end = fold.endpoint_ops[lam2] @ yc
                    l1_end = float(np.abs(end).sum())
                    betas, l1s, _, _, _, _, _ = _lars.lars_lasso_gram(
                        fold.gram, xy, lam2, max_partial * l1_end, 8 * len(xy) + 16, RANK_TOL, CORR_TOL)
                else:
                    betas, l1s, _, _, _, _, _ = _lars.lars_lasso_gram(
                        fold.gram, xy, 0.0, np.inf, 8 * len(xy) + 16, RANK_TOL, CORR_TOL)
                    end = betas[-1]
                    l1_end = float(l1s[-1])
                fold_err[a, :, i] = _lars.fraction_errors(
                    betas, l1s, l1_end, end, self.fraction_grid, np.sqrt(1.0 + lam2), fold.xh, rh)
            if prune and fold_err[a].mean(axis=1).min() <= floor:
                break
        mean_err = fold_err.mean(axis=2)
        best = np.nanmin(mean_err)
        tied = mean_err <= best + floor + 1e-12 * best
        a, b = _first_tied(tied, self.lambda2_grid, self.fraction_grid)
        return CVResult(float(self.lambda2_grid[a]), float(self.fraction_grid[b]),
                        self.lambda2_grid.copy(), self.fraction_grid.copy(), mean_err, fold_err)

    def fit_at(self, f, lambda2: float, fraction: float) -> tuple:
        """Fit on all samples at a given (lambda2, fraction); returns (coef, intercept, beta_normalized)."""
        prob = self.problem(f)
        xy = prob.correlations()
        lam2 = float(lambda2)
        if lam2 > 0:
            end = _endpoint(self.full_gram, xy, lam2)
            target = fraction * float(np.abs(end).sum())
            if fraction >= 1.0:
                beta_star = end
            else:
                path = _run_path(self.full_gram, xy, lam2, max_l1=target)
                beta_star = path.at_l1(target)
        else:
            path = _run_path(self.full_gram, xy, 0.0)
            beta_star = path.at_fraction(fraction)
        beta = np.sqrt(1.0 + lam2) * beta_star
        coef, intercept = prob.to_raw(beta)
        return coef, intercept, beta

    def fit(self, f, prune: bool = True) -> tuple:
        """Cross-validate, then refit on all samples.  Returns (coef, intercept, CVResult)."""
        cv = self.cross_validate(f, prune=prune)
        coef, intercept, _ = self.fit_at(f, cv.lambda2, cv.fraction)
        return coef, intercept, cv


def cross_validate_lambda2(prob: RegressionProblem, cfg: ElasticNetConfig,
                           phi: Optional[np.ndarray] = None) -> CVResult:
    """k-fold CV over the ``(lambda2, fraction)`` grid.

    Folds are re-preprocessed from the raw design, which is rebuilt from
    `prob` when `phi` is not given.  The minimizing pair is returned with
    ties broken toward smaller ``lambda2`` and then smaller fraction.
    """
    if phi is None:
        phi = np.zeros((prob.n_samples, prob.n_raw))
        phi[:, prob.penalized] = prob.design * prob.column_scales + prob.column_means
        constant = [j for j in range(prob.n_raw) if j not in set(prob.penalized.tolist())]
        for j in constant:
            phi[:, j] = 1.0
        constant_column = constant[0] if constant else None
    else:
        constant_column = None if len(prob.penalized) == prob.n_raw else \
            [j for j in range(prob.n_raw) if j not in set(prob.penalized.tolist())][0]
    if prob.n_samples < cfg.cv_folds:
        raise InsufficientSamplesError(
            f"insufficient samples for folds: m={prob.n_samples} < k={cfg.cv_folds}")
    ctx = FitContext(phi, constant_column, cfg.cv_folds, cfg.lambda2_grid, cfg.fraction_grid,
                     cfg.shuffle_seed)
    return ctx.cross_validate(prob.response + prob.response_offset)
