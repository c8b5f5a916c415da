import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsrsopt.acceptance import PV_REFERENCE_G, PV_REFERENCE_POINT
from qsrsopt.interval import Interval, UncertainBox
from qsrsopt.oracles import ScanConfig, scan_box_max, scan_worst_case
from qsrsopt.problems import (cubic_problem, expression_problem, pressure_vessel_problem,
                              three_hump_problem)
from qsrsopt.surrogate import (ChebyshevModel, SampleEvaluationError, build_qsrs, design_samples,
                               fit_surrogate, worst_case_evaluation)

UNIT1 = UncertainBox.from_bounds([-1], [1])
UNIT2 = UncertainBox.from_bounds([-1, -1], [1, 1])


def full_coefficients(model):
    coef = model.coefficients.copy()
    coef[0] = model.intercept
    return coef


def test_cubic_recovered_exactly():
    model = build_qsrs(lambda x: x[0] ** 3 + 2 * x[0], UNIT1, 30)
    coef = full_coefficients(model)
    expected = np.zeros(90)
    expected[[1, 3]] = [2.75, 0.25]
    assert np.allclose(coef, expected, atol=1e-8)
    bound = model.interval_bound()
    assert bound.lo == pytest.approx(-3, abs=1e-8) and bound.hi == pytest.approx(3, abs=1e-8)


def test_constant_response():
    model = build_qsrs(lambda x: 7.0, UNIT2, 30)
    assert model.intercept == pytest.approx(7.0)
    assert np.all(model.coefficients == 0)
    assert model.interval_bound() == Interval(7.0, 7.0)


def test_quadratic_uses_six_atoms():
    def quad(x):
        return 1 + 0.5 * x[0] - x[1] + 2 * x[0] ** 2 + 0.3 * x[0] * x[1] + x[1] ** 2
    model = build_qsrs(quad, UNIT2, 30)
    coef = full_coefficients(model)
    assert set(np.flatnonzero(np.abs(coef) > 1e-8)) <= set(range(6))
    grid = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    assert np.allclose(model.predict_many(grid), [quad(x) for x in grid], atol=1e-8)


def test_predict_errors():
    model = build_qsrs(lambda x: x[0], UNIT1, 10)
    with pytest.raises(ValueError, match="outside"):
        model.predict([1.5])
    with pytest.raises(ValueError, match="dimension"):
        model.predict([0.0, 0.0])


def test_non_finite_sample_reported():
    def bad(x):
        return np.nan if x[0] > 0.5 else x[0]
    with pytest.raises(SampleEvaluationError) as info:
        build_qsrs(bad, UNIT1, 10)
    assert info.value.index is not None and info.value.point[0] > 0.5


def test_too_few_samples():
    with pytest.raises(ValueError):
        design_samples(UNIT1, 1)


def test_json_round_trip():
    box = UncertainBox.from_bounds([0, 3, 1], [2, 3, 4])
    model = build_qsrs(lambda x: np.sin(x[0]) * x[2] + x[1], box, 20)
    copy = ChebyshevModel.from_json(model.to_json())
    assert copy.active_dims == (0, 2)
    x = np.array([[0.3, 3.0, 2.0], [1.9, 3.0, 1.1]])
    assert np.array_equal(copy.predict_many(x), model.predict_many(x))
    assert copy.interval_bound() == model.interval_bound()


def test_degenerate_box_gives_constant_model():
    box = UncertainBox.from_bounds([1.0, 2.0], [1.0, 2.0])
    model = build_qsrs(lambda x: x[0] * x[1], box, 10)
    assert model.dictionary is None and model.interval_bound() == Interval(2.0, 2.0)
    assert model.predict([1.0, 2.0]) == 2.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_bound_contains_model_values(seed):
    rng = np.random.default_rng(seed)
    lo = rng.uniform(-5, 5, 2)
    box = UncertainBox.from_bounds(lo, lo + rng.uniform(0.1, 3, 2))
    a = rng.standard_normal(4)
    model = build_qsrs(lambda x: a[0] * np.exp(0.3 * x[0]) + a[1] * x[0] * x[1] + a[2] * np.cos(x[1]), box, 20)
    bound = model.interval_bound()
    g = np.linspace(0, 1, 41)
    pts = box.lo + (box.hi - box.lo) * np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    vals = model.predict_many(pts)
    assert vals.max() <= bound.hi + 1e-9 * max(1, abs(bound.hi))
    assert vals.min() >= bound.lo - 1e-9 * max(1, abs(bound.lo))
    assert model.scan_max() <= bound.hi + 1e-9 * max(1, abs(bound.hi))


def test_surrogate_error_shrinks_with_samples():
    box = UncertainBox.from_bounds([0.5, -1], [1.5, 2])
    func = lambda x: np.exp(0.5 * x[0]) * np.sin(x[1])  # noqa: E731
    pts = np.random.default_rng(1).uniform(box.lo, box.hi, (400, 2))
    truth = np.array([func(x) for x in pts])
    errors = [np.abs(build_qsrs(func, box, m).predict_many(pts) - truth).max() for m in (15, 30, 60, 100)]
    assert np.all(np.diff(errors) < 0)
    assert errors[-1] < 1e-3


def test_fit_surrogate_matches_build():
    samples, active = design_samples(UNIT2, 30)
    values = samples[:, 0] ** 2 - samples[:, 1]
    a = fit_surrogate(UNIT2, values, 30, active)
    b = build_qsrs(lambda x: x[0] ** 2 - x[1], UNIT2, 30)
    assert np.array_equal(a.coefficients, b.coefficients) and a.intercept == b.intercept


def test_zero_width_equals_nominal_values():
    problem = three_hump_problem(width=0.0)
    x_c = np.array([1.3, -0.7])
    wc = worst_case_evaluation(problem, x_c, 30)
    f, _ = problem.evaluate(x_c)
    assert wc.f_upper == pytest.approx(f, rel=1e-12)


def test_cubic_problem_worst_case():
    wc = worst_case_evaluation(cubic_problem(), [0.0], 30, keep_models=True)
    assert wc.f_upper == pytest.approx(3.0, abs=1e-8)
    assert wc.g_upper.shape == (0,) and wc.violation == 0.0
    assert len(wc.models) == 1


def test_worst_case_dominates_scan_three_hump():
    problem = three_hump_problem()
    x_c = np.array([-4.9, 2.4])
    wc = worst_case_evaluation(problem, x_c, 30)
    f_scan, _, _, _ = scan_worst_case(problem, x_c, ScanConfig(201))
    assert wc.f_upper >= f_scan - 1e-9 * abs(f_scan)
    assert wc.f_upper - f_scan <= 0.01 * abs(f_scan)


def test_pressure_vessel_constraint_bounds():
    problem = pressure_vessel_problem()
    wc = worst_case_evaluation(problem, np.array(PV_REFERENCE_POINT), 100)
    assert np.allclose(wc.g_upper, PV_REFERENCE_G, rtol=1e-3, atol=1e-3)
    _, g_scan, _, _ = scan_worst_case(problem, np.array(PV_REFERENCE_POINT), ScanConfig(21))
    assert np.all(wc.g_upper >= g_scan - 1e-9 * np.abs(g_scan))


def test_non_finite_response_names_constraint():
    problem = expression_problem("bad", ("x",), "x", ("1/(x - 0.5)",), (0,), (1,), (0.2,))
    with pytest.raises(SampleEvaluationError) as info:
        worst_case_evaluation(problem, [0.5], 11)
    assert info.value.response == "g1"


def test_scan_and_surrogate_share_samples_with_parameters():
    problem = expression_problem("par", ("x",), "x*p + p^2", (), (-2,), (2,), (0.5,),
                                 parameters=((1.0, 2.0),), parameter_names=("p",))
    wc = worst_case_evaluation(problem, [1.0], 30)
    box = problem.joint_box([1.0])
    f_max, _ = scan_box_max(lambda z: z[:, 0] * z[:, 1] + z[:, 1] ** 2, box, ScanConfig(101))
    assert wc.f_upper >= f_max - 1e-9
    assert wc.f_upper == pytest.approx(f_max, rel=0.05)
