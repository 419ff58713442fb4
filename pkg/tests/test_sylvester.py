import numpy as np
import pytest

from adaptiveqr import (
    AlmostBandedSystem,
    Chebyshev,
    Identity,
    ResidualImag,
    SingularBoundaryBlock,
    TensorProblem,
    Ultraspherical,
    UltrasphericalDerivative,
    adaptive_qr_solve,
    conversion_operator,
    solve_pde,
)
from adaptiveqr.problems import dirichlet_rows, forcing_to_range, helmholtz_problem, poisson_problem
from adaptiveqr.sylvester import (
    SchurPair,
    bartels_stewart_columns,
    eliminate_boundary_columns,
    generalized_schur,
    normalize_boundary,
    recover_solution,
    semidiscretize,
    tensor_residual,
)
from oracles import basis_oracle, kronecker_solve

CHEB, C2 = Chebyshev(), Ultraspherical(2)


def conversion():
    return conversion_operator(CHEB, C2)


def identity_problem(n_rows=3):
    I = Identity(CHEB)
    return TensorProblem(L=I, N=0 * I, M=I, S=I, Bx=[], By=[], F=np.ones((n_rows, 3)))


# semidiscretize -----------------------------------------------------------------


def test_semidiscretize_identity():
    s = semidiscretize(identity_problem(), 3)
    np.testing.assert_array_equal(s.Mn, np.eye(3))
    assert s.Bn.shape == (0, 3)


def test_semidiscretize_sections_and_boundary_rows():
    p = helmholtz_problem(np.ones((2, 2)))
    s = semidiscretize(p, 4)
    np.testing.assert_array_equal(s.Mn, conversion().matrix(4))
    np.testing.assert_array_equal(s.Sn, UltrasphericalDerivative(2).matrix(4))
    np.testing.assert_array_equal(s.Bn, [[1, -1, 1, -1], [1, 1, 1, 1]])
    assert s.Fn.shape[1] == 4
    with pytest.raises(ValueError):
        semidiscretize(p, 2)


# normalize_boundary ----------------------------------------------------------------


def test_normalize_boundary_examples():
    B = np.array([[1.0, 0, 3], [0, 1, 4]])
    g = np.ones((5, 2))
    B2, g2 = normalize_boundary(B, g)
    np.testing.assert_array_equal(B2, B)
    np.testing.assert_array_equal(g2, g)
    B2, g2 = normalize_boundary(np.array([[2.0, 0, 1], [0, 2, 1]]), g)
    np.testing.assert_allclose(B2, [[1, 0, 0.5], [0, 1, 0.5]])
    np.testing.assert_allclose(g2, g / 2)


def test_normalize_boundary_preserves_constraints():
    rng = np.random.default_rng(2)
    n = 4
    Bn = semidiscretize(helmholtz_problem(np.ones((1, 1))), n).Bn
    for _ in range(20):
        X = rng.standard_normal((6, n))
        gy = X @ Bn.T
        B2, g2 = normalize_boundary(Bn, gy)
        np.testing.assert_allclose(B2[:, :2], np.eye(2))
        np.testing.assert_allclose(X @ B2.T, g2, atol=1e-13)
        # and a matrix violating the old constraints violates the new ones
        Y = X + rng.standard_normal((6, n))
        assert np.max(np.abs(Y @ B2.T - g2)) > 1e-6


def test_normalize_boundary_singular():
    with pytest.raises(SingularBoundaryBlock):
        normalize_boundary(np.array([[1.0, 1.0, 0], [2.0, 2.0, 1]]), np.zeros((1, 2)))


# eliminate_boundary_columns ---------------------------------------------------------------


def test_eliminate_without_boundary_rows():
    p = identity_problem()
    s = semidiscretize(p, 3)
    r = eliminate_boundary_columns(s)
    np.testing.assert_array_equal(r.Mt, s.Mn)
    np.testing.assert_array_equal(r.St, s.Sn)
    np.testing.assert_array_equal(r.Ft, s.Fn)


def test_eliminate_with_zero_data_keeps_forcing():
    p = helmholtz_problem(np.ones((3, 3)))
    s = semidiscretize(p, 6)
    s.Bn, s.gy = normalize_boundary(s.Bn, s.gy)
    r = eliminate_boundary_columns(s)
    assert r.Mt.shape == (4, 4)
    np.testing.assert_array_equal(r.Ft, s.Fn[:, :4])


# generalized_schur -------------------------------------------------------------------------


def check_schur(Mt, St, sp):
    Q, Z, U, T = sp.Q, sp.Z, sp.U, sp.T
    n = Mt.shape[0]
    scale = max(1.0, np.max(np.abs(Mt)), np.max(np.abs(St)))
    assert np.max(np.abs(Q @ U @ Z.conj().T - Mt)) < 1e-11 * scale
    assert np.max(np.abs(Q @ T @ Z.conj().T - St)) < 1e-11 * scale
    assert np.max(np.abs(Q.conj().T @ Q - np.eye(n))) < 1e-12
    assert np.max(np.abs(Z.conj().T @ Z - np.eye(n))) < 1e-12
    assert np.max(np.abs(np.tril(U, -1))) < 1e-12 * scale
    assert np.max(np.abs(np.tril(T, -1))) < 1e-12 * scale


def test_schur_one_by_one():
    sp = generalized_schur(np.array([[2.0]]), np.array([[3.0]]))
    assert abs(abs(sp.Q[0, 0]) - 1) < 1e-15 and abs(abs(sp.Z[0, 0]) - 1) < 1e-15
    check_schur(np.array([[2.0]]), np.array([[3.0]]), sp)
    assert abs(abs(sp.U[0, 0]) - 2) < 1e-14 and abs(abs(sp.T[0, 0]) - 3) < 1e-14


@pytest.mark.parametrize("seed", range(10))
def test_schur_random(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    Mt, St = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    check_schur(Mt, St, generalized_schur(Mt, St))


def test_schur_already_triangular():
    Mt = np.triu(np.arange(1.0, 17.0).reshape(4, 4))
    check_schur(Mt, np.eye(4), generalized_schur(Mt, np.eye(4)))


def test_schur_shape_errors():
    with pytest.raises(ValueError):
        generalized_schur(np.ones((2, 3)), np.ones((2, 3)))


# bartels_stewart_columns / recover_solution -------------------------------------------------------


def test_diagonal_schur_gives_independent_columns():
    L, N = UltrasphericalDerivative(2), conversion()
    U, T = np.diag([1.0, 2.0, 0.5]), np.diag([-4.0, 9.0, 1.0])
    sp = SchurPair(Q=np.eye(3), Z=np.eye(3), U=U, T=T)
    rng = np.random.default_rng(4)
    Ft = rng.standard_normal((5, 3))
    gx = rng.standard_normal((2, 3))
    ys, nopt = bartels_stewart_columns(L, N, sp, Ft, dirichlet_rows(), gx)
    for m in range(3):
        op = U[m, m] * L + T[m, m] * N
        u = adaptive_qr_solve(AlmostBandedSystem(dirichlet_rows(), op, Ft[:, m], list(gx[:, m])))
        k = min(len(u), len(ys[m]))
        np.testing.assert_allclose(ys[m][:k], u.coefficients[:k], atol=1e-13)
        assert np.max(np.abs(ys[m][k:]), initial=0) < 1e-13


def test_single_column_reduces_to_one_solve():
    L, N = UltrasphericalDerivative(2) + 4 * conversion(), conversion()
    sp = SchurPair(Q=np.eye(1), Z=np.eye(1), U=np.eye(1), T=np.zeros((1, 1)))
    ys, nopt = bartels_stewart_columns(L, N, sp, np.ones((3, 1)), dirichlet_rows(), np.zeros((2, 1)))
    u = adaptive_qr_solve(AlmostBandedSystem(dirichlet_rows(), L, np.ones(3), [0.0, 0.0]))
    np.testing.assert_allclose(ys[0][: len(u)], u.coefficients, atol=1e-14)


def test_recover_trivial_cases():
    Y = [np.array([1.0, 2.0]), np.array([3.0])]
    X = recover_solution(Y, np.eye(2), np.zeros((0, 2)), np.zeros((2, 0)), real=True)
    np.testing.assert_array_equal(X, [[1, 3], [2, 0]])
    X = recover_solution(Y, np.eye(2), np.zeros((1, 2)), np.zeros((2, 1)), real=True)
    np.testing.assert_array_equal(X[:, 0], 0)


def test_recover_rejects_imaginary_content():
    with pytest.raises(ResidualImag):
        recover_solution([np.array([1.0 + 1e-3j])], np.eye(1), np.zeros((0, 1)), np.zeros((1, 0)), real=True)


# solve_pde ------------------------------------------------------------------------------------


def test_degenerate_problem_rejected():
    Z = 0 * conversion()
    with pytest.raises(ValueError):
        TensorProblem(L=Z, N=Z, M=conversion(), S=conversion(), Bx=[], By=[], F=np.ones((1, 1)))


def test_poisson_manufactured_solution():
    a = np.array([0.5, 0.0, -0.5])  # 1 - x^2
    e0 = np.array([1.0, 0.0, 0.0])
    F = -2 * (np.outer(e0, a) + np.outer(a, e0))
    sol = solve_pde(poisson_problem(F), 6)
    rng = np.random.default_rng(0)
    x, y = rng.uniform(-0.95, 0.95, (2, 25))
    np.testing.assert_allclose(sol(x, y), (1 - x**2) * (1 - y**2), atol=1e-10)


def manufactured(seed, ny, k2, complex_=False):
    """Random forcing plus boundary data taken from a random smooth function."""
    rng = np.random.default_rng(seed)
    X0 = rng.standard_normal((5, ny)) / (1 + np.arange(5))[:, None]
    Bx = np.array([B.getindex(range(1, 6)) for B in dirichlet_rows()])
    By = np.array([B.getindex(range(1, ny + 1)) for B in dirichlet_rows()])
    gx = (Bx @ X0).T
    gy = X0 @ By.T
    F = rng.standard_normal((4, ny))
    if complex_:
        F = F + 1j * rng.standard_normal((4, ny))
    return helmholtz_problem(F, k2=k2, gx=gx, gy=gy)


@pytest.mark.parametrize("ny", [4, 6])
@pytest.mark.parametrize("k2", [0.0, 30.0, 100.0])
@pytest.mark.parametrize("seed", [0, 1])
def test_kronecker_oracle(ny, k2, seed):
    p = manufactured(seed, ny, k2)
    sol = solve_pde(p, ny)
    ref = kronecker_solve(p, 30, ny)
    X = np.zeros_like(ref)
    m = min(30, sol.X.shape[0])
    X[:m] = sol.X[:m]
    assert np.max(np.abs(sol.X[30:]), initial=0) < 1e-12
    assert np.max(np.abs(X - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_kronecker_oracle_complex():
    p = manufactured(3, 5, 100.0 + 5j, complex_=True)
    sol = solve_pde(p, 5)
    ref = kronecker_solve(p, 30, 5)
    assert np.iscomplexobj(sol.X) and np.max(np.abs(p.F.imag)) > 0.1
    X = np.zeros_like(ref)
    X[: min(30, sol.X.shape[0])] = sol.X[:30]
    assert np.max(np.abs(X - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_constraints_and_triangularity():
    p = manufactured(5, 8, 100.0)
    s = semidiscretize(p, 8)
    Bn = s.Bn.copy()
    s.Bn, s.gy = normalize_boundary(s.Bn, s.gy)
    r = eliminate_boundary_columns(s)
    check_schur(r.Mt, r.St, generalized_schur(r.Mt, r.St))
    sol = solve_pde(p, 8)
    rows = sol.X.shape[0]
    gy = np.zeros((rows, 2))
    gy[: p.gy.shape[0]] = p.gy
    assert np.max(np.abs(sol.X @ Bn.T - gy)) < 1e-10
    bx = np.array([[B.dot(sol.X[:, j]) for j in range(8)] for B in p.Bx])
    assert np.max(np.abs(bx - p.gx[:8].T)) < 1e-12 * max(1, np.max(np.abs(p.gx)))


def test_semidiscrete_residual_is_small():
    p = helmholtz_problem(np.ones((6, 6)))
    sol = solve_pde(p, 12)
    R = tensor_residual(p, sol.X, n_cols=10)
    assert np.max(np.abs(R)) < 1e-10 * np.max(np.abs(p.F))


def test_scaling_the_y_pair_leaves_solution_unchanged():
    base = manufactured(6, 6, 100.0)
    scaled = TensorProblem(L=base.L, N=base.N, M=2 * base.M, S=2 * base.S, Bx=base.Bx, By=base.By,
                           F=2 * base.F, gx=base.gx, gy=base.gy)
    X1, X2 = solve_pde(base, 6).X, solve_pde(scaled, 6).X
    m = min(len(X1), len(X2))
    np.testing.assert_allclose(X1[:m], X2[:m], atol=1e-9)


def test_zero_forcing_gives_zero_solution():
    sol = solve_pde(helmholtz_problem(np.zeros((1, 1))), 10)
    assert np.max(np.abs(sol.X)) < 1e-13


def test_solution_evaluation_helper():
    X = np.array([[1.0, 2.0], [0.0, 3.0]])
    from adaptiveqr.sylvester import BivariateSolution

    sol = BivariateSolution(X, CHEB, CHEB)
    x, y = 0.3, -0.4
    Vx, Vy = basis_oracle(CHEB, [x], 2)[0], basis_oracle(CHEB, [y], 2)[0]
    assert sol(x, y) == pytest.approx(Vx @ X @ Vy)


def test_forcing_conversion_preserves_values():
    rng = np.random.default_rng(9)
    F = rng.standard_normal((4, 3))
    G = forcing_to_range(F, C2, C2)
    x, y = rng.uniform(-1, 1, (2, 10))
    f = np.einsum("pi,ij,pj->p", basis_oracle(CHEB, x, 4), F, basis_oracle(CHEB, y, 3))
    g = np.einsum("pi,ij,pj->p", basis_oracle(C2, x, G.shape[0]), G, basis_oracle(C2, y, G.shape[1]))
    np.testing.assert_allclose(f, g, atol=1e-12)


def test_full_pde_residual_for_corner_compatible_forcing():
    from adaptiveqr.problems import helmholtz_residual

    a = np.array([0.5, 0.0, -0.5])
    F = np.outer(a, a)  # (1 - x^2)(1 - y^2) vanishes on the boundary
    sol = solve_pde(helmholtz_problem(F), 30)
    x, y = np.random.default_rng(0).uniform(-1, 1, (2, 100))
    assert np.max(np.abs(helmholtz_residual(sol, F, 100.0, x, y))) < 1e-6
