import numpy as np
import pytest
from hypothesis import given, strategies as st

from qsrsopt.chebyshev import (DegenerateBoxError, Dictionary, MultiIndex, atom_value,
                               build_index_set, design_matrix, map_to_canonical)
from qsrsopt.interval import UncertainBox


def recurrence(k, u):
    t0, t1 = np.ones_like(u), u
    if k == 0:
        return t0
    for _ in range(k - 1):
        t0, t1 = t1, 2 * u * t1 - t0
    return t1


def test_map_to_canonical_examples():
    box = UncertainBox.from_bounds([2, -4], [6, 0])
    assert np.allclose(map_to_canonical(box.center, box), 0)
    unit = UncertainBox.from_bounds([-1, -1, -1], [1, 1, 1])
    x = np.array([0.3, -0.7, 1.0])
    assert np.allclose(map_to_canonical(x, unit), x)
    assert map_to_canonical([np.pi], UncertainBox.from_bounds([0], [np.pi]))[0] == 1.0


def test_map_to_canonical_errors():
    with pytest.raises(DegenerateBoxError, match="degenerate box dimension"):
        map_to_canonical([1.0, 0.0], UncertainBox.from_bounds([1, -1], [1, 1]))
    with pytest.raises(ValueError):
        map_to_canonical([1.5], UncertainBox.from_bounds([-1], [1]))


def test_map_to_canonical_accepts_tiny_overshoot():
    box = UncertainBox.from_bounds([93.397], [93.597])
    assert map_to_canonical([93.597 * (1 + 1e-15)], box)[0] == 1.0


def test_atom_value_examples():
    assert atom_value((0, 0, 0), [0.2, -0.4, 0.9]) == 1.0
    assert atom_value((1,), [0.5]) == pytest.approx(0.5)
    assert atom_value((3,), [0.5]) == pytest.approx(-1.0)
    assert atom_value((1, 1), [1.0, 1.0]) == pytest.approx(1.0)


def test_build_index_set_examples():
    assert build_index_set(1, 4) == [(0,), (1,), (2,), (3,)]
    assert build_index_set(2, 3) == [(0, 0), (1, 0), (0, 1)]
    assert build_index_set(2, 6) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert MultiIndex((2, 1)).total_degree() == 3


@given(st.integers(1, 4), st.integers(1, 120), st.integers(1, 120))
def test_index_sets_are_nested_graded_and_unique(d, n1, n2):
    small, big = sorted((n1, n2))
    a, b = build_index_set(d, small), build_index_set(d, big)
    assert b[:small] == a
    assert b[0] == (0,) * d
    assert len(set(b)) == len(b)
    degrees = [sum(i) for i in b]
    assert degrees == sorted(degrees)


def test_published_atom_counts():
    # 90 atoms in 2-D and 300 in 4-D are not complete total-degree sets
    assert max(sum(i) for i in build_index_set(2, 90)) == 12
    # 4-D: 210 atoms up to degree 6, 330 up to degree 7
    assert max(sum(i) for i in build_index_set(4, 300)) == 7
    assert max(sum(i) for i in build_index_set(4, 210)) == 6


@given(st.integers(0, 30), st.floats(-1, 1))
def test_atom_matches_recurrence(k, u):
    assert atom_value((k,), [u]) == pytest.approx(recurrence(k, np.array(u)), abs=1e-10)


@given(st.integers(0, 20), st.floats(-1, 1))
def test_parity(k, u):
    assert atom_value((k,), [-u]) == pytest.approx((-1) ** k * atom_value((k,), [u]), abs=1e-12)


@given(st.lists(st.integers(0, 12), min_size=1, max_size=4), st.data())
def test_atoms_bounded(idx, data):
    u = data.draw(st.lists(st.floats(-1, 1), min_size=len(idx), max_size=len(idx)))
    assert abs(atom_value(idx, u)) <= 1.0 + 1e-15


def test_design_matrix_examples():
    box = UncertainBox.from_bounds([-3], [5])
    dic = Dictionary(box, 6)
    phi = design_matrix([[1.0]], dic)
    assert np.allclose(phi, [[1, 0, -1, 0, 1, 0]])
    samples = np.random.default_rng(0).uniform(-3, 5, (7, 1))
    assert np.all(design_matrix(samples, dic)[:, 0] == 1)
    u = np.cos((2 * np.arange(1, 4) - 1) * np.pi / 6)
    phi = Dictionary(UncertainBox.from_bounds([-1], [1]), 3).design_matrix(u.reshape(-1, 1))
    expected = np.stack([recurrence(k, u) for k in range(3)], axis=1)
    assert np.allclose(phi, expected, atol=1e-14)


def test_design_matrix_entries_bounded_2d():
    box = UncertainBox.from_bounds([0, 10], [1, 12])
    samples = np.random.default_rng(1).uniform([0, 10], [1, 12], (50, 2))
    phi = Dictionary(box, 90).design_matrix(samples)
    assert phi.shape == (50, 90) and np.abs(phi).max() <= 1.0 + 1e-15


def test_dictionary_rejects_degenerate_box():
    with pytest.raises(DegenerateBoxError):
        Dictionary(UncertainBox.from_bounds([0, 1], [1, 1]), 5)
