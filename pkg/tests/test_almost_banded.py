import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptiveqr import (
    AlmostBandedSystem,
    Chebyshev,
    Evaluation,
    Fun,
    Identity,
    MutableAlmostBandedOperator,
    NoConvergence,
    SingularError,
    Taylor,
    TaylorDerivative,
    TaylorEvaluation,
    TaylorMultiplication,
    UltrasphericalDerivative,
    adaptive_qr_solve,
    back_substitute,
    givens_eliminate_column,
)
from adaptiveqr.almost_banded import GrowableVector, back_substitute_dense, givens
from adaptiveqr.problems import constant_problem, exp_problem, oscillatory_exact, oscillatory_problem
from oracles import dense_finite_section_solve, dense_stacked, factorial_coefficients


def lower_band_problem():
    """``u' - (1 + z/2) u = 0``, ``u(0) = 1``: band -1:1."""
    L = TaylorDerivative() - TaylorMultiplication([1.0, 0.5])
    return AlmostBandedSystem([TaylorEvaluation(0.0)], L, None, [1.0])


def complex_problem():
    """``u' - i u = 0``, ``u(0) = 1``: solution ``exp(i z)``."""
    L = TaylorDerivative() - 1j * Identity(Taylor())
    return AlmostBandedSystem([TaylorEvaluation(0.0)], L, None, [1.0])


def forced_problem():
    """``u'' + u = f`` with ``u`` a known Chebyshev polynomial."""
    rng = np.random.default_rng(7)
    c = rng.standard_normal(9)
    f = np.polynomial.chebyshev.chebder(c, 2)
    f = np.pad(f, (0, len(c) - len(f))) + c
    L = UltrasphericalDerivative(2) + Identity(Chebyshev())
    cheb = Chebyshev()
    bc = [np.polynomial.chebyshev.chebval(-1, c), np.polynomial.chebyshev.chebval(1, c)]
    sys = AlmostBandedSystem([Evaluation(cheb, -1.0), Evaluation(cheb, 1.0)], L, Fun(cheb, f), bc)
    return sys, c


PROBLEMS = {
    "exp": exp_problem,
    "oscillatory": lambda: oscillatory_problem(10.0),
    "lower_band": lower_band_problem,
    "complex": complex_problem,
    "forced": lambda: forced_problem()[0],
}


def workspace(sys, record=False):
    A = MutableAlmostBandedOperator(sys.functionals, sys.operator, record=record)
    rhs = GrowableVector(sys.stacked_rhs(), dtype=A.dtype)
    return A, rhs


# entries ---------------------------------------------------------------------


def test_fresh_wrap_entries():
    A = MutableAlmostBandedOperator([TaylorEvaluation(1.0)], TaylorDerivative())
    assert A[1, 3] == 1
    assert A[1, 500] == 1
    assert A[2, 3] == 0
    assert A[2, 2] == 1
    assert A[5, 5] == 4
    assert A.bcfilldata.tolist() == [[1.0]]


def test_entry_after_editing_storage_matches_formula():
    A = MutableAlmostBandedOperator([TaylorEvaluation(0.5)], TaylorDerivative())
    A._materialize(6)
    A.fill[2] = 0.0
    A.fill[1] = 3.0
    k = 2
    # explicit branch
    A.data[k - 1, 1 - (k + A.a - A.K)] = 9.0
    assert A[k, 1] == 9.0
    # fill branch: 3 * B_1[j] for j >= M + k
    j = A.M + k + 4
    assert A[k, j] == pytest.approx(3 * 0.5 ** (j - 1))
    assert A[3, A.M + 3 + 1] == 0


def test_section_of_fresh_wrap_matches_stacked_operator():
    for name, make in PROBLEMS.items():
        sys = make()
        A = MutableAlmostBandedOperator(sys.functionals, sys.operator)
        np.testing.assert_allclose(A.section(25), dense_stacked(sys.functionals, sys.operator, 25), err_msg=name)


# elimination -----------------------------------------------------------------


def test_elimination_identity_is_noop():
    A = MutableAlmostBandedOperator([], Identity(Taylor()))
    rhs = GrowableVector([1.0, 2.0, 3.0])
    before = A.section(6)
    for c in range(1, 6):
        givens_eliminate_column(A, rhs, c)
    np.testing.assert_array_equal(A.section(6), before)
    np.testing.assert_array_equal(rhs.data[:3], [1, 2, 3])
    assert A.rotation_count == 0


def test_givens_convention():
    c, s, r = givens(3.0, 4.0)
    assert (c, s, r) == (0.6, 0.8, 5.0)
    G = np.array([[np.conj(c), np.conj(s)], [-s, c]])
    np.testing.assert_allclose(G @ [3, 4], [5, 0], atol=1e-15)
    c, s, r = givens(1j, 1.0)
    G = np.array([[np.conj(c), np.conj(s)], [-s, c]])
    np.testing.assert_allclose(G @ [1j, 1.0], [r, 0], atol=1e-15)
    np.testing.assert_allclose(G.conj().T @ G, np.eye(2), atol=1e-15)


@pytest.mark.parametrize("name", list(PROBLEMS))
def test_upper_triangular_matches_dense_qr(name):
    sys = PROBLEMS[name]()
    n = 20
    A, rhs = workspace(sys)
    for c in range(1, n + 1):
        A.eliminate_column(c, rhs)
    R = A.section(n)
    assert np.max(np.abs(np.tril(R, -1))) == 0
    assert np.all(np.diag(R).real > 0) and np.max(np.abs(np.diag(R).imag)) < 1e-14
    rows = n + A.K - A.a
    dense = dense_stacked(sys.functionals, sys.operator, rows)[:, :n]
    _, Rd = np.linalg.qr(dense)
    phase = np.diag(Rd) / np.abs(np.diag(Rd))
    Rd = Rd / phase[:, None]
    np.testing.assert_allclose(R, Rd, atol=1e-12 * max(1, np.max(np.abs(Rd))))


def apply_rotations(dense, rotations):
    out = dense.astype(complex if np.iscomplexobj(dense) or any(np.iscomplexobj(g.c) for g in rotations) else float)
    for g in rotations:
        k1, k2 = g.rows
        out[[k1 - 1, k2 - 1]] = g.matrix() @ out[[k1 - 1, k2 - 1]]
    return out


@pytest.mark.parametrize("name", list(PROBLEMS))
def test_representation_exactness(name):
    sys = PROBLEMS[name]()
    A, rhs = workspace(sys, record=True)
    n = 60
    original = dense_stacked(sys.functionals, sys.operator, n + 10)[:, :n]
    done = 0
    for stage in (1, 7, 25, 60):
        for c in range(done + 1, stage + 1):
            A.eliminate_column(c, rhs)
        done = stage
        rotated = apply_rotations(original, A.rotations)
        scale = max(1.0, np.max(np.abs(original)))
        assert np.max(np.abs(A.section(n) - rotated[:n])) <= 1e-12 * scale, f"{name} after {stage} columns"


@pytest.mark.parametrize("name", ["oscillatory", "complex", "lower_band"])
def test_rotations_are_orthogonal(name):
    sys = PROBLEMS[name]()
    A, rhs = workspace(sys, record=True)
    for c in range(1, 41):
        A.eliminate_column(c, rhs)
    m = 40 + A.K - A.a
    Q = apply_rotations(np.eye(m), A.rotations)
    assert np.max(np.abs(Q.conj().T @ Q - np.eye(m))) < 1e-12


def test_rotation_count_grows_linearly():
    sys = oscillatory_problem(10.0)
    counts = []
    for n in (100, 200):
        A, rhs = workspace(sys)
        for c in range(1, n + 1):
            A.eliminate_column(c, rhs)
        counts.append(A.rotation_count)
    assert 1.8 <= counts[1] / counts[0] <= 2.2


def test_singular_column_reported():
    # D has a zero first column and no functional fills it
    A = MutableAlmostBandedOperator([], TaylorDerivative())
    with pytest.raises(SingularError):
        A.eliminate_column(1, GrowableVector([1.0]))


# back substitution -------------------------------------------------------------


def test_back_substitute_dense_examples():
    np.testing.assert_allclose(back_substitute_dense([[2.0, 1.0], [0.0, 4.0]], [3.0, 4.0]), [1, 1])
    np.testing.assert_allclose(back_substitute_dense([[5.0]], [10.0]), [2])
    with pytest.raises(SingularError):
        back_substitute_dense([[0.0]], [1.0])


def test_back_substitute_matches_dense_triangular_solve():
    sys = exp_problem()
    u, info = adaptive_qr_solve(sys, full_output=True)
    A = info.workspace
    n = info.n_opt
    R = A.section(n)
    # rhs recovered from the returned coefficients, then re-solved both ways
    b = R @ info.coefficients
    np.testing.assert_allclose(back_substitute(A, b, n), back_substitute_dense(R, b), rtol=0, atol=1e-14)


# adaptive solves ---------------------------------------------------------------


def test_exp_series():
    u, info = adaptive_qr_solve(exp_problem(), full_output=True)
    c = info.coefficients
    assert len(c) >= 18
    np.testing.assert_allclose(c[:18], factorial_coefficients(18), rtol=0, atol=1e-13)


def test_constant_solution():
    u = adaptive_qr_solve(constant_problem(7.0))
    np.testing.assert_array_equal(u.coefficients, [7.0])


def test_oscillatory_pointwise():
    u = adaptive_qr_solve(oscillatory_problem(10.0))
    x = np.linspace(-1, 1, 20)
    np.testing.assert_allclose(u(x), oscillatory_exact(10.0)(x), rtol=0, atol=1e-10)


def test_complex_solution():
    _, info = adaptive_qr_solve(complex_problem(), full_output=True)
    ref = np.array([1j**j / math.factorial(j) for j in range(18)])
    np.testing.assert_allclose(info.coefficients[:18], ref, atol=1e-14)


def test_forced_solution_recovers_polynomial():
    sys, c = forced_problem()
    u = adaptive_qr_solve(sys)
    got = np.pad(u.coefficients, (0, max(0, len(c) - len(u))))
    np.testing.assert_allclose(got[: len(c)], c, atol=1e-12)
    assert np.max(np.abs(got[len(c) :]), initial=0) < 1e-12


@pytest.mark.parametrize("name", list(PROBLEMS))
def test_matches_dense_finite_section(name):
    sys = PROBLEMS[name]()
    _, info = adaptive_qr_solve(sys, full_output=True)
    n = 60
    ref = dense_finite_section_solve(sys.functionals, sys.operator, sys.bc_values, sys.rhs_coefficients(), n)
    got = np.zeros(n, dtype=ref.dtype)
    got[: info.n_opt] = info.coefficients
    assert np.max(np.abs(got - ref)) <= 1e-10 * max(1, np.max(np.abs(ref)))


def test_no_convergence_cap():
    with pytest.raises(NoConvergence) as err:
        adaptive_qr_solve(oscillatory_problem(10.0), max_n=10)
    assert err.value.max_n == 10


@pytest.mark.parametrize("name", list(PROBLEMS))
@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10, 1e-12])
def test_residual_contract(name, tol):
    sys = PROBLEMS[name]()
    u, info = adaptive_qr_solve(sys, tol=tol, full_output=True)
    bc_res, row_res = sys.residual(info.coefficients)
    scale = max(1.0, np.max(np.abs(sys.stacked_rhs())))
    assert np.max(np.abs(bc_res)) <= tol * max(1.0, np.max(np.abs(sys.bc_values)))
    b = sys.operator.bandinds()[1]
    rows = row_res[: info.n_opt + b]
    assert np.max(np.abs(rows)) <= tol * scale
    assert info.tail_norm <= tol * scale


@pytest.mark.parametrize("tol", [1e-4, 1e-6, 1e-8, 1e-10, 1e-12])
def test_halving_tol_is_stable(tol):
    _, a = adaptive_qr_solve(exp_problem(), tol=tol, full_output=True)
    _, b = adaptive_qr_solve(exp_problem(), tol=tol / 2, full_output=True)
    m = min(len(a.coefficients), len(b.coefficients))
    assert np.max(np.abs(a.coefficients[:m] - b.coefficients[:m])) <= tol


@settings(max_examples=25, deadline=None, derandomize=True)
@given(st.floats(2.0, 25.0), st.floats(-3, 3), st.floats(-3, 3))
def test_oscillatory_family_residuals(k, left, right):
    cheb = Chebyshev()
    L = UltrasphericalDerivative(2) + k**2 * Identity(cheb)
    sys = AlmostBandedSystem([Evaluation(cheb, -1.0), Evaluation(cheb, 1.0)], L, None, [left, right])
    tol = 1e-10
    try:
        u, info = adaptive_qr_solve(sys, tol=tol, full_output=True)
    except SingularError:
        return
    bc_res, row_res = sys.residual(info.coefficients)
    scale = max(1.0, abs(left), abs(right))
    assert np.max(np.abs(bc_res)) <= tol * scale
    assert np.max(np.abs(row_res[: info.n_opt + 2])) <= tol * scale
