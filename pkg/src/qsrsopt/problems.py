"""Uncertain optimization problems, the built-in benchmarks and their definition files.

A problem minimizes ``f(x, y)`` subject to ``g_i(x, y) <= 0`` where the
design midpoint ``x`` carries a symmetric uncertainty half-width ``xi`` and
the parameters ``y`` range over fixed intervals.  Objective and constraint
functions are vectorized: they take ``x`` of shape ``(N, d)`` and ``y`` of
shape ``(N, p)`` and return ``N`` values.
"""

from __future__ import annotations

import ast
import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .interval import Interval, UncertainBox

BOUNDS_RTOL = 1e-9


class ExpressionError(ValueError):
    pass


_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)
_CONSTANTS = {"pi": math.pi}


def _check_node(node, names):
    if isinstance(node, ast.Expression):
        return _check_node(node.body, names)
    if isinstance(node, ast.BinOp) and isinstance(node.op, _BINOPS):
        _check_node(node.left, names)
        _check_node(node.right, names)
        return
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, _UNARY):
        _check_node(node.operand, names)
        return
    if isinstance(node, ast.Constant) and type(node.value) in (int, float):
        return
    if isinstance(node, ast.Name):
        if node.id not in names and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
        return
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


@dataclass(frozen=True)
class Expression:
    """Arithmetic expression over named variables.

    Grammar: numbers, names, ``pi``, parentheses, unary ``+``/``-`` and the
    binary operators ``+ - * / ^`` (``^`` is exponentiation, as is ``**``).
    """

    text: str
    names: tuple
    code: object = field(compare=False, repr=False)

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "Expression":
        names = tuple(names)
        try:
            tree = ast.parse(text.replace("^", "**").strip(), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
        _check_node(tree, set(names))
        return cls(text.strip(), names, compile(tree, "<expression>", "eval"))

    def __call__(self, columns) -> np.ndarray:
        """Evaluate with ``columns[k]`` bound to ``names[k]``."""
        env = dict(_CONSTANTS)
        env.update(zip(self.names, columns))
        with np.errstate(all="ignore"):
            return eval(self.code, {"__builtins__": {}}, env)


@dataclass(frozen=True)
class UncertainProblem:
    """Min-max problem over design midpoints with interval uncertainty.

    Parameters
    ----------
    name : str
    variables : tuple of str
        Design variable names.
    objective : callable
        ``objective(x, y) -> (N,)`` array.
    constraints : tuple of callables
        Each ``g(x, y) -> (N,)``; ``g <= 0`` is feasible.
    lower, upper : ndarray
        Design bounds ``x^L`` and ``x^R``.
    widths : ndarray
        Half-width ``xi`` of the uncertainty interval of each design variable.
    parameters : tuple of Interval
        Uncertain parameter intervals.
    """

    name: str
    variables: tuple
    objective: Callable
    constraints: tuple
    lower: np.ndarray
    upper: np.ndarray
    widths: np.ndarray
    parameters: tuple = ()
    parameter_names: tuple = ()
    objective_text: Optional[str] = None
    constraint_texts: Optional[tuple] = None
    description: str = ""

    def __post_init__(self):
        for attr in ("lower", "upper", "widths"):
            arr = np.atleast_1d(np.asarray(getattr(self, attr), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)
        d = len(self.variables)
        if not (self.lower.shape == self.upper.shape == self.widths.shape == (d,)):
            raise ValueError("bounds and widths must have one entry per design variable")
        if np.any(self.widths < 0):
            raise ValueError("widths must be nonnegative")
        lo, hi = self.shrunk_bounds()
        if np.any(lo > hi):
            bad = [self.variables[i] for i in np.flatnonzero(lo > hi)]
            raise ValueError(f"design box is empty after shrinking by the widths: {bad}")
        object.__setattr__(self, "parameters", tuple(self.parameters))
        if not self.parameter_names:
            object.__setattr__(self, "parameter_names",
                               tuple(f"y{i + 1}" for i in range(len(self.parameters))))
        if len(self.parameter_names) != len(self.parameters):
            raise ValueError("one name per parameter interval is required")
        object.__setattr__(self, "constraints", tuple(self.constraints))

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def n_parameters(self) -> int:
        return len(self.parameters)

    @property
    def n_constraints(self) -> int:
        return len(self.constraints)

    @property
    def deterministic(self) -> bool:
        """True when every uncertainty interval has zero width."""
        return bool(np.all(self.widths == 0) and all(p.is_degenerate for p in self.parameters))

    def shrunk_bounds(self) -> tuple:
        return self.lower + self.widths, self.upper - self.widths

    def check_midpoint(self, x_c) -> None:
        lo, hi = self.shrunk_bounds()
        x_c = np.asarray(x_c, dtype=float)
        if x_c.shape != (self.dimension,):
            raise ValueError(f"expected {self.dimension} design values, got shape {x_c.shape}")
        tol = BOUNDS_RTOL * np.maximum(1.0, np.abs(self.upper) + np.abs(self.lower))
        if np.any(x_c < lo - tol) or np.any(x_c > hi + tol):
            raise ValueError(f"design midpoint {x_c.tolist()} outside the shrunk bounds "
                             f"[{lo.tolist()}, {hi.tolist()}]")

    def joint_box(self, x_c) -> UncertainBox:
        """Uncertainty box over design variables followed by parameters."""
        x_c = np.asarray(x_c, dtype=float)
        design = [Interval.from_midpoint(c, w) for c, w in zip(x_c, self.widths)]
        return UncertainBox(design + list(self.parameters))

    def parameter_box(self) -> Optional[UncertainBox]:
        return UncertainBox(self.parameters) if self.parameters else None

    def _check_inputs(self, x, y):
        tol = BOUNDS_RTOL * np.maximum(1.0, np.abs(self.upper) + np.abs(self.lower))
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            raise ValueError("design point outside the design bounds")
        if self.parameters:
            plo = np.array([p.lo for p in self.parameters])
            phi = np.array([p.hi for p in self.parameters])
            ptol = BOUNDS_RTOL * np.maximum(1.0, np.abs(plo) + np.abs(phi))
            if np.any(y < plo - ptol) or np.any(y > phi + ptol):
                raise ValueError("parameter point outside its intervals")

    def evaluate_batch(self, x, y=None) -> tuple:
        """Objective ``(N,)`` and constraints ``(N, n_constraints)`` at rows of `x`, `y`."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dimension:
            raise ValueError(f"expected {self.dimension} design columns, got {x.shape[1]}")
        if y is None or np.size(y) == 0:
            if self.parameters:
                raise ValueError("parameter values are required")
            y = np.zeros((x.shape[0], 0))
        y = np.atleast_2d(np.asarray(y, dtype=float)).reshape(x.shape[0], -1)
        self._check_inputs(x, y)
        n = x.shape[0]
        f = np.broadcast_to(np.asarray(self.objective(x, y), dtype=float), (n,)).copy()
        g = np.empty((n, self.n_constraints))
        for i, con in enumerate(self.constraints):
            g[:, i] = np.broadcast_to(np.asarray(con(x, y), dtype=float), (n,))
        return f, g

    def evaluate(self, x, y=None) -> tuple:
        """Objective value and constraint vector at one point."""
        f, g = self.evaluate_batch(np.asarray(x, dtype=float).reshape(1, -1),
                                   None if y is None else np.asarray(y, dtype=float).reshape(1, -1))
        return float(f[0]), g[0]

    def with_widths(self, widths) -> "UncertainProblem":
        widths = np.broadcast_to(np.asarray(widths, dtype=float), self.widths.shape)
        return _replace(self, widths=widths)

    def to_ini(self) -> str:
        if self.objective_text is None or self.constraint_texts is None:
            raise ValueError("only expression-defined problems can be written to a definition file")
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["problem"] = {"name": self.name, "objective": self.objective_text}
        if self.description:
            cp["problem"]["description"] = self.description
        cp["variables"] = {v: f"{lo!r}, {hi!r}, {w!r}" for v, lo, hi, w in
                           zip(self.variables, self.lower.tolist(), self.upper.tolist(),
                               self.widths.tolist())}
        cp["parameters"] = {n: f"{p.lo!r}, {p.hi!r}" for n, p in zip(self.parameter_names, self.parameters)}
        cp["constraints"] = {f"g{i + 1}": t for i, t in enumerate(self.constraint_texts)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _replace(problem: UncertainProblem, **changes) -> UncertainProblem:
    fields = {k: getattr(problem, k) for k in problem.__dataclass_fields__}
    fields.update(changes)
    return UncertainProblem(**fields)


def _bind(expr: Expression, d: int) -> Callable:
    def func(x, y):
        cols = [x[:, j] for j in range(d)] + [y[:, j] for j in range(y.shape[1])]
        return expr(cols)
    return func


def expression_problem(name, variables, objective, constraints=(), lower=(), upper=(),
                       widths=(), parameters=(), parameter_names=(), description="") -> UncertainProblem:
    """Build a problem from expression strings over design and parameter names."""
    variables = tuple(variables)
    parameters = tuple(p if isinstance(p, Interval) else Interval(*p) for p in parameters)
    parameter_names = tuple(parameter_names) or tuple(f"y{i + 1}" for i in range(len(parameters)))
    names = variables + parameter_names
    if len(set(names)) != len(names):
        raise ExpressionError("variable and parameter names must be distinct")
    obj = Expression.parse(objective, names)
    cons = tuple(Expression.parse(c, names) for c in constraints)
    d = len(variables)
    return UncertainProblem(name, variables, _bind(obj, d), tuple(_bind(c, d) for c in cons),
                            np.asarray(lower, dtype=float), np.asarray(upper, dtype=float),
                            np.asarray(widths, dtype=float), parameters, parameter_names,
                            obj.text, tuple(c.text for c in cons), description)


def load_problem_file(path) -> UncertainProblem:
    with open(path) as fh:
        return parse_problem_ini(fh.read())


def parse_problem_ini(text: str) -> UncertainProblem:
    """Read a problem definition.

    ``[problem]`` holds ``name`` and ``objective``; ``[variables]`` maps each
    design variable to ``lower, upper, width``; the optional ``[parameters]``
    maps parameter names to ``lower, upper``; the optional ``[constraints]``
    maps labels to expressions (``g <= 0`` feasible, kept in file order).
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp.read_string(text)
    if not cp.has_section("problem") or "objective" not in cp["problem"]:
        raise ValueError("definition file needs a [problem] section with an objective")
    if not cp.has_section("variables") or not cp["variables"]:
        raise ValueError("definition file needs a [variables] section")
    names, lo, hi, w = [], [], [], []
    for key, val in cp["variables"].items():
        parts = [float(p) for p in val.split(",")]
        if len(parts) != 3:
            raise ValueError(f"variable {key}: expected 'lower, upper, width'")
        names.append(key)
        lo.append(parts[0])
        hi.append(parts[1])
        w.append(parts[2])
    pnames, params = [], []
    if cp.has_section("parameters"):
        for key, val in cp["parameters"].items():
            parts = [float(p) for p in val.split(",")]
            if len(parts) != 2:
                raise ValueError(f"parameter {key}: expected 'lower, upper'")
            pnames.append(key)
            params.append(Interval(*parts))
    cons = list(cp["constraints"].values()) if cp.has_section("constraints") else []
    sec = cp["problem"]
    return expression_problem(sec.get("name", "custom"), names, sec["objective"], cons, lo, hi, w,
                              params, pnames, sec.get("description", ""))


THREE_HUMP_VARIANT = "2*x1^2 - 1.05*x1^4 + x1^2/6 + x1*x2 + x2^2"
THREE_HUMP_STANDARD = "2*x1^2 - 1.05*x1^4 + x1^6/6 + x1*x2 + x2^2"


def three_hump_problem(standard: bool = False, width: float = 0.1) -> UncertainProblem:
    """Three-hump camel on ``[-5, 5]^2`` with half-width `width` on both variables.

    ``standard=False`` keeps the sixth-order term written as ``x1^2 / 6``;
    ``standard=True`` uses the usual ``x1^6 / 6``.
    """
    if standard:
        return expression_problem("three_hump_standard", ("x1", "x2"), THREE_HUMP_STANDARD,
                                  (), (-5, -5), (5, 5), (width, width),
                                  description="three-hump camel, standard x1^6/6 term")
    return expression_problem("three_hump_variant", ("x1", "x2"), THREE_HUMP_VARIANT,
                              (), (-5, -5), (5, 5), (width, width),
                              description="three-hump camel with x1^2/6 in place of x1^6/6")


PRESSURE_VESSEL_OBJECTIVE = "0.6224*x1*x3*x4 + 1.7781*x2*x3^2 + 3.1661*x1^2*x4 + 19.84*x1^2*x3"
PRESSURE_VESSEL_CONSTRAINTS = (
    "-x1 + 0.0193*x3",
    "-x2 + 0.00954*x3",
    "-pi*x3^2*x4 - (4/3)*pi*x3^3 + 1296000",
    "x4 - 240",
)


def pressure_vessel_problem(width: float = 0.1) -> UncertainProblem:
    """Cylindrical pressure vessel: shell and head thickness, radius, length."""
    return expression_problem("pressure_vessel", ("x1", "x2", "x3", "x4"), PRESSURE_VESSEL_OBJECTIVE,
                              PRESSURE_VESSEL_CONSTRAINTS, (1, 1, 10, 10), (99, 99, 200, 200),
                              (width,) * 4, description="pressure vessel material, forming and welding cost")


def cubic_problem(width: float = 1.0) -> UncertainProblem:
    """``x^3 + 2x`` on ``[-1, 1]``; with unit width the only midpoint is 0."""
    return expression_problem("cubic", ("x",), "x^3 + 2*x", (), (-1,), (1,), (width,),
                              description="odd cubic on [-1, 1]")


def sphere_problem(dimension: int = 2, width: float = 0.0, bound: float = 5.0) -> UncertainProblem:
    names = tuple(f"x{i + 1}" for i in range(dimension))
    return expression_problem("sphere", names, " + ".join(f"{v}^2" for v in names), (),
                              (-bound,) * dimension, (bound,) * dimension, (width,) * dimension,
                              description="sum of squares")


BUILTIN_PROBLEMS = {
    "three_hump": lambda: three_hump_problem(False),
    "three_hump_variant": lambda: three_hump_problem(False),
    "three_hump_standard": lambda: three_hump_problem(True),
    "pressure_vessel": pressure_vessel_problem,
    "cubic": cubic_problem,
    "sphere": sphere_problem,
}


def get_problem(name_or_path: str) -> UncertainProblem:
    """A built-in problem by name, or a problem definition file by path."""
    if name_or_path in BUILTIN_PROBLEMS:
        return BUILTIN_PROBLEMS[name_or_path]()
    if name_or_path.endswith((".ini", ".cfg", ".txt")):
        return load_problem_file(name_or_path)
    raise KeyError(f"unknown problem {name_or_path!r}; built-ins: {sorted(BUILTIN_PROBLEMS)}")
