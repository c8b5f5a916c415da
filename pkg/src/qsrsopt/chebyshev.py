"""Tensor-product Chebyshev atoms, graded index sets and design matrices."""

from __future__ import annotations

from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .interval import UncertainBox

# samples within this relative distance of a box face are accepted and clipped
BOX_TOL = 1e-12


class DegenerateBoxError(ValueError):
    pass


class MultiIndex(tuple):
    """Per-dimension Chebyshev degrees of one tensor atom."""

    def __new__(cls, degrees):
        degrees = tuple(int(k) for k in degrees)
        if any(k < 0 for k in degrees):
            raise ValueError(f"degrees must be nonnegative, got {degrees}")
        return super().__new__(cls, degrees)

    @property
    def degrees(self) -> tuple:
        return tuple(self)

    def total_degree(self) -> int:
        return sum(self)

    def is_constant(self) -> bool:
        return not any(self)


def _compositions(total: int, parts: int) -> Iterator[tuple]:
    """Weak compositions of `total` into `parts`, descending lexicographic."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _graded_indices(dimension: int, n_atoms: int) -> tuple:
    out = []
    degree = 0
    while len(out) < n_atoms:
        for comp in _compositions(degree, dimension):
            out.append(MultiIndex(comp))
            if len(out) == n_atoms:
                break
        degree += 1
    return tuple(out)


def build_index_set(dimension: int, n_atoms: int) -> list:
    """First `n_atoms` multi-indices in graded order.

    Total degree ascends; ties are broken by descending lexicographic order
    of the degree tuple, so ``(2, 0)`` precedes ``(1, 1)`` precedes ``(0, 2)``.
    The result for a smaller `n_atoms` is always a prefix of a larger one.
    """
    if dimension < 1:
        raise ValueError("dimension must be positive")
    if n_atoms < 1:
        raise ValueError("n_atoms must be positive")
    return list(_graded_indices(int(dimension), int(n_atoms)))


def map_to_canonical(x, box: UncertainBox) -> np.ndarray:
    """Affine map of points in `box` onto ``[-1, 1]^d``.

    Accepts a single point (shape ``(d,)``) or a batch (shape ``(m, d)``).
    """
    x = np.asarray(x, dtype=float)
    lo, hi = box.lo, box.hi
    if x.shape[-1] != box.dimension:
        raise ValueError(f"point dimension {x.shape[-1]} != box dimension {box.dimension}")
    width = hi - lo
    if np.any(width <= 0):
        bad = np.flatnonzero(width <= 0).tolist()
        raise DegenerateBoxError(f"degenerate box dimension {bad}: cannot normalize")
    u = (2.0 * x - lo - hi) / width
    if np.any(np.abs(u) > 1.0 + 2.0 * BOX_TOL * np.maximum(1.0, np.abs(lo) + np.abs(hi)) / width):
        raise ValueError("point lies outside the box")
    return np.clip(u, -1.0, 1.0)


def atom_value(idx: Sequence[int], u) -> float:
    """``prod_j cos(k_j * arccos(u_j))`` for one atom at one canonical point."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    k = np.asarray(tuple(idx), dtype=float)
    if k.shape != u.shape:
        raise ValueError("multi-index and point dimensions differ")
    if np.any(np.abs(u) > 1.0):
        raise ValueError("canonical coordinates must lie in [-1, 1]")
    return float(np.prod(np.cos(k * np.arccos(u))))


def chebyshev_table(u: np.ndarray, max_degree: int) -> np.ndarray:
    """``T[k, ...] = cos(k * arccos(u))`` for k = 0..max_degree."""
    theta = np.arccos(np.clip(u, -1.0, 1.0))
    k = np.arange(max_degree + 1).reshape((-1,) + (1,) * theta.ndim)
    return np.cos(k * theta)


def evaluate_atoms(index_array: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Matrix of atom values, rows = canonical points, columns = atoms."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    m, d = u.shape
    if index_array.shape[1] != d:
        raise ValueError("index set and points have different dimensions")
    table = chebyshev_table(u, int(index_array.max(initial=0)))  # (K+1, m, d)
    out = np.ones((m, index_array.shape[0]))
    for j in range(d):
        out *= table[index_array[:, j], :, j].T
    return out


class Dictionary:
    """An ordered set of tensor Chebyshev atoms over a box.

    Parameters
    ----------
    box : UncertainBox
        Region the atoms are defined on; every dimension must have positive width.
    n_atoms : int
        Number of atoms, taken in graded order.
    """

    def __init__(self, box: UncertainBox, n_atoms: int):
        if np.any(box.degenerate_mask()):
            raise DegenerateBoxError("dictionary boxes cannot have zero-width dimensions")
        self.box = box
        self.dimension = box.dimension
        self.index_set = build_index_set(self.dimension, n_atoms)
        self.index_array = np.array(self.index_set, dtype=np.int64).reshape(len(self.index_set), self.dimension)
        self.index_array.setflags(write=False)

    @property
    def n_atoms(self) -> int:
        return len(self.index_set)

    def design_matrix(self, samples) -> np.ndarray:
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        return evaluate_atoms(self.index_array, map_to_canonical(samples, self.box))

    def canonical_design_matrix(self, u) -> np.ndarray:
        return evaluate_atoms(self.index_array, u)

    def __repr__(self) -> str:
        return f"Dictionary(dimension={self.dimension}, n_atoms={self.n_atoms}, box={self.box!r})"


def design_matrix(samples, dictionary: Dictionary) -> np.ndarray:
    return dictionary.design_matrix(samples)
