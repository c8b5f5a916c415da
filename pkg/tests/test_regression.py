import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsrsopt.chebyshev import Dictionary
from qsrsopt.design import generate_plan, map_plan_to_box
from qsrsopt.interval import UncertainBox
from qsrsopt.oracles import elastic_net_coordinate_descent
from qsrsopt.regression import (LAMBDA2_GRID, ElasticNetConfig, FitContext,
                                InsufficientSamplesError, RankDeficiencyWarning, RegressionProblem,
                                augmented_data, cross_validate_lambda2, default_folds,
                                elastic_net_fit, fold_indices, lars_lasso_path)


def centred_orthonormal(m, n, seed):
    z = np.random.default_rng(seed).standard_normal((m, n))
    z -= z.mean(axis=0)
    q, _ = np.linalg.qr(z)
    return q


def kkt_residual(prob, path, k):
    r = prob.response - prob.design @ path.betas[k]
    c = prob.design.T @ r
    half = 0.5 * path.lambda1(k)
    active = path.active[k]
    return max(np.abs(np.abs(c[active]) - half).max(initial=0.0),
               np.maximum(np.abs(c[~active]) - half, 0).max(initial=0.0))


def test_preprocessing_invariants():
    rng = np.random.default_rng(0)
    phi = np.column_stack([np.ones(12), rng.standard_normal((12, 4)) * [1, 10, 0.1, 3] + 5])
    f = rng.standard_normal(12)
    prob = RegressionProblem.from_raw(phi, f)
    assert np.allclose(np.linalg.norm(prob.design, axis=0), 1)
    assert np.allclose(prob.design.mean(axis=0), 0, atol=1e-15)
    assert abs(prob.response.mean()) < 1e-15
    beta = rng.standard_normal(4)
    coef, b0 = prob.to_raw(beta)
    assert coef[0] == 0
    assert np.allclose(phi @ coef + b0, prob.design @ beta + prob.response_offset)


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        RegressionProblem.from_raw(np.ones((3, 2)), [1, np.nan, 2])


def test_orthonormal_design_soft_threshold():
    x = centred_orthonormal(20, 5, 1)
    y = x @ np.array([3.0, -2.0, 1.0, 0.5, -0.25])
    prob = RegressionProblem.from_raw(x, y, constant_column=None)
    path = lars_lasso_path(prob)
    b = prob.design.T @ prob.response
    for k in range(len(path.l1_norms)):
        lam = path.lambda1(k)
        expected = np.sign(b) * np.maximum(np.abs(b) - lam / 2, 0)
        assert np.allclose(path.betas[k], expected, atol=1e-12)


def test_single_column_one_step():
    col = centred_orthonormal(8, 1, 2)
    prob = RegressionProblem.from_raw(col, 2 * col[:, 0], constant_column=None)
    path = lars_lasso_path(prob)
    assert len(path.l1_norms) == 2
    assert path.betas[-1][0] == pytest.approx(2.0)


def test_orthogonal_response_gives_zero_path():
    q = centred_orthonormal(10, 3, 3)
    prob = RegressionProblem.from_raw(q[:, :2], q[:, 2], constant_column=None)
    path = lars_lasso_path(prob)
    assert len(path.l1_norms) == 1 and np.all(path.betas[0] == 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 25), st.integers(2, 40),
       st.sampled_from(LAMBDA2_GRID))
def test_path_invariants(seed, m, n, lam2):
    rng = np.random.default_rng(seed)
    prob = RegressionProblem.from_raw(rng.standard_normal((m, n)), rng.standard_normal(m),
                                      constant_column=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        path = lars_lasso_path(prob, lam2)
    assert np.all(np.diff(path.l1_norms) >= -1e-12)
    sizes = path.active.sum(axis=1)
    assert np.all(np.abs(np.diff(sizes)) <= 1)
    if lam2 == 0:
        assert sizes.max() <= m
        for k in range(len(path.l1_norms)):
            assert kkt_residual(prob, path, k) <= 1e-8 * max(1.0, path.lambda1(0))


def test_augmented_path_kkt():
    rng = np.random.default_rng(4)
    x, y = rng.standard_normal((10, 15)), rng.standard_normal(10)
    prob = RegressionProblem.from_raw(x, y, constant_column=None)
    lam2 = 0.1
    path = lars_lasso_path(prob, lam2)
    xs, ys = augmented_data(prob.design, prob.response, lam2)
    for k in range(len(path.l1_norms)):
        c = xs.T @ (ys - xs @ path.betas[k])
        half = 0.5 * path.lambda1(k)
        act = path.active[k]
        assert np.allclose(np.abs(c[act]), half, atol=1e-8)
        assert np.all(np.abs(c[~act]) <= half + 1e-8)


def test_kkt_holds_through_drops():
    # near-square instances exercise atoms leaving and re-entering the active set
    drops = 0
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 16))
        m = int(rng.integers(n, n + 4))
        lam2 = float(LAMBDA2_GRID[seed % len(LAMBDA2_GRID)])
        x = rng.standard_normal((m, n))
        y = x @ (rng.standard_normal(n) * (rng.random(n) < 0.5)) + 0.1 * rng.standard_normal(m)
        prob = RegressionProblem.from_raw(x, y, constant_column=None)
        path = lars_lasso_path(prob, lam2)
        xs, ys = augmented_data(prob.design, prob.response, lam2)
        sizes = path.active.sum(axis=1)
        drops += int(np.sum(np.diff(sizes) < 0))
        assert np.all(np.diff(path.max_correlations) <= 1e-12)
        for k in range(len(path.l1_norms)):
            c = xs.T @ (ys - xs @ path.betas[k])
            half = 0.5 * path.lambda1(k)
            nz = path.betas[k] != 0
            assert np.allclose(c[nz], half * np.sign(path.betas[k][nz]), atol=1e-8)
            assert np.all(np.abs(c) <= half + 1e-8)
    assert drops > 0


def test_gram_identity():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((9, 6))
    for lam2 in LAMBDA2_GRID:
        xs, _ = augmented_data(x, np.zeros(9), lam2)
        assert np.allclose(xs.T @ xs, (x.T @ x + lam2 * np.eye(6)) / (1 + lam2), atol=1e-10, rtol=0)


def test_zero_ridge_equals_lasso_selection():
    rng = np.random.default_rng(6)
    prob = RegressionProblem.from_raw(rng.standard_normal((15, 8)), rng.standard_normal(15),
                                      constant_column=None)
    path = lars_lasso_path(prob)
    for s in (0.1, 0.5, 1.0):
        fit = elastic_net_fit(prob, ElasticNetConfig(lambda2=0.0, fraction=s))
        assert np.array_equal(fit.beta_normalized, path.at_fraction(s))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(LAMBDA2_GRID))
def test_elastic_net_matches_coordinate_descent(seed, lam2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 10))
    m = int(rng.integers(n + 1, 20))
    prob = RegressionProblem.from_raw(rng.standard_normal((m, n)), rng.standard_normal(m),
                                      constant_column=None)
    path = lars_lasso_path(prob, lam2)
    k = len(path.l1_norms) // 2
    lam1 = path.lambda1(k)
    naive = elastic_net_coordinate_descent(prob.design, prob.response, lam1 * np.sqrt(1 + lam2), lam2)
    assert np.allclose(np.sqrt(1 + lam2) * path.betas[k], (1 + lam2) * naive, atol=1e-6)


def test_ridge_lifts_sparsity_cap():
    rng = np.random.default_rng(7)
    prob = RegressionProblem.from_raw(rng.standard_normal((8, 20)), rng.standard_normal(8),
                                      constant_column=None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        lasso = elastic_net_fit(prob, ElasticNetConfig(lambda2=0.0))
    ridge = elastic_net_fit(prob, ElasticNetConfig(lambda2=1.0))
    assert np.count_nonzero(lasso.beta_normalized) <= 8
    assert np.count_nonzero(ridge.beta_normalized) > 8


def uniform_design_problem(func, m=30, n=90):
    box = UncertainBox.from_bounds([-1, -1], [1, 1])
    x = map_plan_to_box(generate_plan(m, 2), box)
    phi = Dictionary(box, n).design_matrix(x)
    return phi, func(phi)


def test_exact_sparse_recovery():
    truth = np.zeros(90)
    truth[[0, 2, 5, 9, 17, 30]] = [1.5, -2.0, 0.7, 3.0, -0.4, 1.1]
    phi, f = uniform_design_problem(lambda p: p @ truth)
    prob = RegressionProblem.from_raw(phi, f)
    fit = elastic_net_fit(prob, ElasticNetConfig(lambda2=0.0))
    coef = fit.coef.copy()
    coef[0] += fit.intercept
    assert set(np.flatnonzero(np.abs(coef) > 1e-6)) == {0, 2, 5, 9, 17, 30}
    assert np.allclose(coef, truth, atol=1e-6)


def test_cv_selects_zero_ridge_for_representable_response():
    truth = np.zeros(90)
    truth[[0, 1, 4, 7]] = [2.0, 1.0, -0.5, 0.25]
    phi, f = uniform_design_problem(lambda p: p @ truth)
    prob = RegressionProblem.from_raw(phi, f)
    cv = cross_validate_lambda2(prob, ElasticNetConfig(), phi)
    assert cv.lambda2 == 0.0
    assert cv.mean_errors.shape == (7, 20)


def test_cv_constant_response_ties_to_zero_ridge():
    phi, _ = uniform_design_problem(lambda p: None)
    prob = RegressionProblem.from_raw(phi, np.full(30, 4.0))
    cv = cross_validate_lambda2(prob, ElasticNetConfig(), phi)
    assert cv.lambda2 == 0.0 and cv.fraction == 0.05
    assert np.all(cv.mean_errors == cv.mean_errors[0, 0])


def test_cv_insufficient_samples():
    rng = np.random.default_rng(8)
    prob = RegressionProblem.from_raw(rng.standard_normal((6, 4)), rng.standard_normal(6))
    with pytest.raises(InsufficientSamplesError, match="insufficient samples for folds"):
        cross_validate_lambda2(prob, ElasticNetConfig(cv_folds=10))


def test_cv_prefers_ridge_with_duplicated_columns():
    ridge_wins = zero_wins = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        z = rng.standard_normal((30, 8))
        phi = np.column_stack([np.ones(30), z, z[:, :3] + 1e-3 * rng.standard_normal((30, 3))])
        f = z[:, :3] @ [1.0, -1.0, 0.5] + 0.3 * rng.standard_normal(30)
        prob = RegressionProblem.from_raw(phi, f)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RankDeficiencyWarning)
            cv = cross_validate_lambda2(prob, ElasticNetConfig(), phi)
        ridge_wins += cv.lambda2 > 0
        zero_wins += cv.lambda2 == 0
    assert ridge_wins >= zero_wins


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_pruned_cv_selects_same_cell(seed):
    rng = np.random.default_rng(seed)
    phi, _ = uniform_design_problem(lambda p: None, m=20, n=40)
    beta = rng.standard_normal(40) * (rng.random(40) < 0.2)
    f = phi @ beta + (rng.random() < 0.5) * 0.01 * rng.standard_normal(20)
    ctx = FitContext(phi)
    full, pruned = ctx.cross_validate(f), ctx.cross_validate(f, prune=True)
    assert (full.lambda2, full.fraction) == (pruned.lambda2, pruned.fraction)


def test_folds():
    folds = fold_indices(30, 10)
    assert [len(f) for f in folds] == [3] * 10
    assert np.array_equal(np.concatenate(folds), np.arange(30))
    shuffled = fold_indices(30, 10, seed=1)
    assert shuffled[0].tolist() == fold_indices(30, 10, seed=1)[0].tolist()
    assert default_folds(30) == 10 and default_folds(27) == 9 and default_folds(100) == 10
    with pytest.raises(InsufficientSamplesError):
        fold_indices(3, 5)


def test_cv_table_csv(tmp_path):
    phi, f = uniform_design_problem(lambda p: p[:, 1] * 2.0)
    cv = FitContext(phi).cross_validate(f)
    cv.to_csv(tmp_path / "cv.csv")
    lines = (tmp_path / "cv.csv").read_text().splitlines()
    assert lines[0].split(",")[:3] == ["lambda2", "fraction", "mean_error"]
    assert len(lines) == 1 + 7 * 20
