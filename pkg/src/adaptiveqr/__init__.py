"""Infinite-dimensional almost-banded operators solved by adaptive QR.

Functions live in coefficient space (Taylor, Chebyshev or ultraspherical
bases); ODE boundary-value problems are stacks of functionals over a banded
operator, and two-term tensor equations on rectangles are reduced to a
sequence of such ODE solves.
"""

from .algebra import (
    InterlaceOperator,
    PlusFunctional,
    PlusOperator,
    SavedOperator,
    TimesFunctional,
    TimesOperator,
    conversion_operator,
    functional_times_operator,
    interlace,
    plus,
    plus_functionals,
    saved,
    times,
)
from .almost_banded import (
    AlmostBandedSystem,
    MutableAlmostBandedOperator,
    adaptive_qr_solve,
    back_substitute,
    givens_eliminate_column,
)
from .errors import (
    BandMismatch,
    DomainError,
    NoConversion,
    NoConvergence,
    ResidualImag,
    SingularBoundaryBlock,
    SingularError,
)
from .operators import (
    BandedBlock,
    BandedOperator,
    Evaluation,
    Functional,
    Identity,
    TaylorDerivative,
    TaylorEvaluation,
    TaylorMultiplication,
    UltrasphericalDerivative,
    evaluation_functional,
    taylor_derivative,
    taylor_evaluation,
    taylor_multiplication,
    ultraspherical_derivative,
)
from .spaces import Chebyshev, Fun, Space, Taylor, Ultraspherical, evaluate
from .sylvester import TensorProblem, solve_pde

__version__ = "0.1.0"
