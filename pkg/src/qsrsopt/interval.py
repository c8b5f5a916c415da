"""Closed real intervals and the coefficient-sum range bound of a Chebyshev model.

Only the operations needed to bound a Chebyshev expansion are provided:
endpoint addition and subtraction, scaling by a real, and the absolute
coefficient sum enclosure.  No directed rounding is performed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Interval:
    """A closed interval ``[lo, hi]``.

    Degenerate intervals (``lo == hi``) are allowed and behave as reals.
    """

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"interval endpoints must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"invalid interval: lo={lo} > hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_midpoint(cls, center: float, half_width: float) -> "Interval":
        if half_width < 0:
            raise ValueError("half_width must be nonnegative")
        return cls(center - half_width, center + half_width)

    @classmethod
    def point(cls, value: float) -> "Interval":
        return cls(value, value)

    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def half_width(self) -> float:
        return 0.5 * (self.hi - self.lo)

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= value <= self.hi + tol

    def issubset(self, other: "Interval") -> bool:
        return other.lo <= self.lo and self.hi <= other.hi

    def __add__(self, other: "Interval") -> "Interval":
        return add(self, _as_interval(other))

    __radd__ = __add__

    def __sub__(self, other: "Interval") -> "Interval":
        return sub(self, _as_interval(other))

    def __rsub__(self, other) -> "Interval":
        return sub(_as_interval(other), self)

    def __mul__(self, c: float) -> "Interval":
        if isinstance(c, Interval):
            return NotImplemented
        return scale(self, c)

    __rmul__ = __mul__

    def __neg__(self) -> "Interval":
        return scale(self, -1.0)

    def __iter__(self):
        yield self.lo
        yield self.hi

    def __repr__(self) -> str:
        return f"Interval({self.lo!r}, {self.hi!r})"


def _as_interval(value) -> Interval:
    if isinstance(value, Interval):
        return value
    return Interval.point(float(value))


def add(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo + b.lo, a.hi + b.hi)


def sub(a: Interval, b: Interval) -> Interval:
    return Interval(a.lo - b.hi, a.hi - b.lo)


def scale(a: Interval, c: float) -> Interval:
    c = float(c)
    if not np.isfinite(c):
        raise ValueError(f"scale factor must be finite, got {c}")
    if c >= 0:
        return Interval(c * a.lo, c * a.hi)
    return Interval(c * a.hi, c * a.lo)


def chebyshev_coefficient_bound(beta0: float, betas: Iterable[float]) -> Interval:
    """Enclose the range of ``beta0 + sum(beta_i * phi_i)`` on the canonical box.

    Every non-constant tensor Chebyshev atom maps ``[-1, 1]^d`` into
    ``[-1, 1]``, so the model range lies within ``beta0 -/+ sum |beta_i|``.
    The enclosure is exact when all atoms can reach +1 (or -1) at a common
    point, e.g. 1-D expansions with same-signed coefficients.
    """
    radius = float(np.sum(np.abs(np.asarray(list(betas), dtype=float))))
    beta0 = float(beta0)
    return Interval(beta0 - radius, beta0 + radius)


class UncertainBox:
    """Cartesian product of closed intervals, one per dimension."""

    def __init__(self, intervals: Sequence[Interval]):
        intervals = tuple(_as_interval(iv) if not isinstance(iv, Interval) else iv
                          for iv in intervals)
        if len(intervals) == 0:
            raise ValueError("a box needs at least one dimension")
        self.intervals = intervals
        self.lo = np.array([iv.lo for iv in intervals])
        self.hi = np.array([iv.hi for iv in intervals])
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)

    @classmethod
    def from_bounds(cls, lo, hi) -> "UncertainBox":
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lo and hi must have the same shape")
        return cls([Interval(a, b) for a, b in zip(lo, hi)])

    @classmethod
    def from_center_width(cls, center, widths) -> "UncertainBox":
        """Build ``[x_c - xi, x_c + xi]`` componentwise."""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        widths = np.broadcast_to(np.asarray(widths, dtype=float), center.shape)
        if np.any(widths < 0):
            raise ValueError("widths must be nonnegative")
        return cls([Interval.from_midpoint(c, w) for c, w in zip(center, widths)])

    @property
    def dimension(self) -> int:
        return len(self.intervals)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def half_widths(self) -> np.ndarray:
        return 0.5 * (self.hi - self.lo)

    def degenerate_mask(self) -> np.ndarray:
        return self.hi == self.lo

    def subbox(self, dims) -> "UncertainBox":
        return UncertainBox([self.intervals[i] for i in dims])

    def contains(self, x, tol: float = 1e-12) -> bool:
        return bool(np.all(self.contains_rows(np.atleast_2d(x), tol)))

    def contains_rows(self, x, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of the rows of `x` lying in the box (relative tolerance `tol`)."""
        x = np.asarray(x, dtype=float)
        scale_ = tol * np.maximum(1.0, np.maximum(np.abs(self.lo), np.abs(self.hi)))
        return np.all((x >= self.lo - scale_) & (x <= self.hi + scale_), axis=-1)

    def key(self) -> tuple:
        return tuple(self.lo.tolist()) + tuple(self.hi.tolist())

    def __len__(self) -> int:
        return self.dimension

    def __getitem__(self, i) -> Interval:
        return self.intervals[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, UncertainBox) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def __repr__(self) -> str:
        parts = ", ".join(f"[{iv.lo:g}, {iv.hi:g}]" for iv in self.intervals)
        return f"UncertainBox({parts})"
