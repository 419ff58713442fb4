"""Canned ODE and PDE problems used by the command line and the tests."""

from __future__ import annotations

import numpy as np

from .algebra import conversion_operator
from .almost_banded import AlmostBandedSystem
from .operators import (
    Evaluation,
    Identity,
    TaylorDerivative,
    TaylorEvaluation,
    UltrasphericalDerivative,
)
from .spaces import Chebyshev, Taylor, Ultraspherical
from .sylvester import BivariateSolution, TensorProblem


def exp_problem() -> AlmostBandedSystem:
    """``u' - u = 0``, ``u(0) = 1`` in Taylor coefficients; solution ``exp(z)``."""
    D = TaylorDerivative()
    return AlmostBandedSystem([TaylorEvaluation(0.0)], D - Identity(Taylor()), None, [1.0])


def constant_problem(value: float = 3.0) -> AlmostBandedSystem:
    """``u' = 0``, ``u(0) = value``."""
    return AlmostBandedSystem([TaylorEvaluation(0.0)], TaylorDerivative(), None, [value])


def oscillatory_problem(k: float = 10.0) -> AlmostBandedSystem:
    """``u'' + k^2 u = 0``, ``u(-1) = u(1) = 1``; solution ``cos(k x) / cos(k)``."""
    cheb = Chebyshev()
    L = UltrasphericalDerivative(2) + k**2 * Identity(cheb)
    return AlmostBandedSystem([Evaluation(cheb, -1.0), Evaluation(cheb, 1.0)], L, None, [1.0, 1.0])


def oscillatory_exact(k: float = 10.0):
    return lambda x: np.cos(k * x) / np.cos(k)


def forcing_to_range(F_cheb, xspace, yspace):
    """Convert a Chebyshev x Chebyshev coefficient block into ``xspace x yspace``.

    Conversions are upper banded, so the leading block converts exactly.
    """
    F_cheb = np.atleast_2d(np.asarray(F_cheb))
    F_cheb = F_cheb.astype(np.result_type(F_cheb, float))
    nx, ny = F_cheb.shape
    Cx = conversion_operator(Chebyshev(), xspace).matrix(nx)
    Cy = conversion_operator(Chebyshev(), yspace).matrix(ny)
    return Cx @ F_cheb @ Cy.T


def dirichlet_rows():
    cheb = Chebyshev()
    return [Evaluation(cheb, -1.0), Evaluation(cheb, 1.0)]


def helmholtz_problem(F_cheb, k2: float = 100.0, gx=None, gy=None) -> TensorProblem:
    """``u_xx + u_yy + k2 u = f`` on ``[-1, 1]^2`` with Dirichlet rows on all sides.

    ``F_cheb[i, j]`` multiplies ``T_i(x) T_j(y)``.  ``gx`` columns are the
    y-coefficients of ``u(-1, y)`` and ``u(1, y)``; ``gy`` columns are the
    x-coefficients of ``u(x, -1)`` and ``u(x, 1)``.
    """
    cheb, c2 = Chebyshev(), Ultraspherical(2)
    S = conversion_operator(cheb, c2)
    D2 = UltrasphericalDerivative(2)
    L = D2 + k2 * S if k2 != 0 else D2
    return TensorProblem(
        L=L,
        N=S,
        M=S,
        S=D2,
        Bx=dirichlet_rows(),
        By=dirichlet_rows(),
        F=forcing_to_range(F_cheb, c2, c2),
        gx=gx,
        gy=gy,
    )


def poisson_problem(F_cheb, gx=None, gy=None) -> TensorProblem:
    """``u_xx + u_yy = f`` with Dirichlet rows on all sides."""
    return helmholtz_problem(F_cheb, k2=0.0, gx=gx, gy=gy)


def ones_forcing(nx: int, ny: int) -> np.ndarray:
    """``sum_{k<nx, j<ny} T_k(x) T_j(y)``."""
    return np.ones((nx, ny))


def helmholtz_residual(sol, F_cheb, k2, x, y):
    """Pointwise ``u_xx + u_yy + k2 u - f`` from the solution coefficients.

    Derivatives are taken by applying the lazy derivative operators to the
    coefficient columns (x) and rows (y), then evaluating in the
    corresponding ultraspherical bases.
    """
    X = sol.X
    D2 = UltrasphericalDerivative(2)
    Uxx = np.column_stack([D2.apply(X[:, j]) for j in range(X.shape[1])])
    Uyy = np.vstack([D2.apply(X[i, :]) for i in range(X.shape[0])])
    c2, cheb = Ultraspherical(2), Chebyshev()
    uxx = BivariateSolution(Uxx, c2, cheb)(x, y)
    uyy = BivariateSolution(Uyy, cheb, c2)(x, y)
    u = sol(x, y)
    f = BivariateSolution(np.atleast_2d(F_cheb), cheb, cheb)(x, y)
    return uxx + uyy + k2 * u - f
