"""Min-max design optimization with sparse Chebyshev surrogates and interval bounds.

The worst case of a function over an uncertainty box is bounded from above by
fitting a sparse Chebyshev expansion on a uniform design and summing the
absolute values of its coefficients; an island genetic algorithm minimizes
that bound over the design midpoints.
"""

from .interval import Interval, UncertainBox
from .problems import UncertainProblem, get_problem
from .surrogate import ChebyshevModel, build_qsrs, worst_case_evaluation

__version__ = "0.1.0"

__all__ = ["ChebyshevModel", "Interval", "UncertainBox", "UncertainProblem", "build_qsrs",
           "get_problem", "worst_case_evaluation"]
