"""Two-term tensor equations on a rectangle.

Solves for the coefficient matrix ``X`` (rows: x-modes, columns: y-modes) of

    L X M^T + N X S^T = F,    X By^T = gy,    Bx X = gx^T

by keeping ``x`` infinite and truncating ``y`` to ``n`` modes.  The ``y``
boundary rows are folded into the equation, the two reduced ``y`` matrices
are simultaneously triangularised by a complex QZ decomposition, and the
columns of the rotated unknown are found back to front, each with an
adaptive QR solve in ``x``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import PlusOperator, SavedOperator, ScaledOperator
from .almost_banded import DEFAULT_MAX_N, DEFAULT_TOL, adaptive_qr
from .errors import NoConvergence, ResidualImag, SingularBoundaryBlock, SingularError
from .operators import BandedOperator
from .spaces import basis_values

IMAG_DROP = 1e-10


def _pad_rows(A, n):
    A = np.asarray(A)
    if A.shape[0] >= n:
        return A
    out = np.zeros((n,) + A.shape[1:], dtype=A.dtype)
    out[: A.shape[0]] = A
    return out


def _pad_cols(A, n):
    A = np.asarray(A)
    out = np.zeros((A.shape[0], n), dtype=A.dtype)
    m = min(n, A.shape[1])
    out[:, :m] = A[:, :m]
    return out


def _is_zero(op: BandedOperator, n: int = 8) -> bool:
    return not np.any(op.matrix(n, n + op.bandinds()[1]))


@dataclass
class TensorProblem:
    """``L X M^T + N X S^T = F`` with boundary rows in both directions.

    ``F`` holds coefficients in ``L.rangespace`` (rows) times
    ``M.rangespace`` (columns).  ``gx`` has one column per ``Bx`` functional
    holding the y-coefficients of that boundary datum; ``gy`` has one column
    per ``By`` functional holding x-coefficients.
    """

    L: BandedOperator
    N: BandedOperator
    M: BandedOperator
    S: BandedOperator
    Bx: list
    By: list
    F: np.ndarray
    gx: np.ndarray | None = None
    gy: np.ndarray | None = None

    def __post_init__(self):
        self.Bx, self.By = list(self.Bx), list(self.By)
        self.F = np.atleast_2d(np.asarray(self.F))
        if self.L.domainspace != self.N.domainspace or self.L.rangespace != self.N.rangespace:
            raise ValueError("L and N must share domain and range spaces")
        if self.M.domainspace != self.S.domainspace or self.M.rangespace != self.S.rangespace:
            raise ValueError("M and S must share domain and range spaces")
        if _is_zero(self.L) and _is_zero(self.N):
            raise ValueError("degenerate problem: L and N both vanish")
        if self.gx is None:
            self.gx = np.zeros((1, len(self.Bx)))
        if self.gy is None:
            self.gy = np.zeros((1, len(self.By)))
        self.gx = np.asarray(self.gx).reshape(-1, len(self.Bx)) if self.Bx else np.zeros((1, 0))
        self.gy = np.asarray(self.gy).reshape(-1, len(self.By)) if self.By else np.zeros((1, 0))

    @property
    def is_real(self) -> bool:
        arrays = (self.F, self.gx, self.gy)
        ops = (self.L, self.N, self.M, self.S, *self.Bx, *self.By)
        return not any(np.iscomplexobj(a) for a in arrays) and not any(
            np.issubdtype(o.dtype, np.complexfloating) for o in ops
        )


@dataclass
class SemiDiscreteSystem:
    L: BandedOperator
    N: BandedOperator
    Mn: np.ndarray
    Sn: np.ndarray
    Bn: np.ndarray
    Fn: np.ndarray
    gxn: np.ndarray
    gy: np.ndarray

    @property
    def n(self):
        return self.Mn.shape[0]

    @property
    def Ky(self):
        return self.Bn.shape[0]


@dataclass
class ReducedSystem:
    """The equation for the non-boundary columns ``X2`` of ``X``."""

    Mt: np.ndarray
    St: np.ndarray
    Ft: np.ndarray
    B2: np.ndarray
    gx2: np.ndarray  # Bx X2 = gx2^T
    gy: np.ndarray


@dataclass
class SchurPair:
    """``Mt = Q U Z^H`` and ``St = Q T Z^H`` with ``U``, ``T`` upper triangular."""

    Q: np.ndarray
    Z: np.ndarray
    U: np.ndarray
    T: np.ndarray


@dataclass
class BivariateSolution:
    """``u(x, y) = sum_ij X[i, j] p_i(x) q_j(y)``."""

    X: np.ndarray
    xspace: object
    yspace: object
    n_opt: list = field(default_factory=list)
    t_qz: float = 0.0
    t_solve: float = 0.0

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        Vx = basis_values(self.xspace, x, self.X.shape[0])
        Vy = basis_values(self.yspace, y, self.X.shape[1])
        return np.einsum("...i,ij,...j->...", Vx, self.X, Vy)

    @property
    def columns(self):
        return [self.X[:, j] for j in range(self.X.shape[1])]


def semidiscretize(p: TensorProblem, n: int) -> SemiDiscreteSystem:
    """Truncate the y-direction to ``n`` modes."""
    Ky = len(p.By)
    if n <= Ky:
        raise ValueError(f"need more than {Ky} y-modes, got {n}")
    Bn = np.array([F.getindex(range(1, n + 1)) for F in p.By]).reshape(Ky, n)
    return SemiDiscreteSystem(
        L=p.L,
        N=p.N,
        Mn=p.M.matrix(n),
        Sn=p.S.matrix(n),
        Bn=Bn,
        Fn=_pad_cols(p.F, n),
        gxn=_pad_rows(p.gx, n)[:n],
        gy=p.gy,
    )


def normalize_boundary(Bn, gy):
    """Left-multiply the boundary rows so their leading block is the identity.

    ``gy`` is transformed so that ``X Bn^T = gy`` keeps the same solution set.
    """
    Bn = np.asarray(Bn)
    gy = np.asarray(gy)
    Ky = Bn.shape[0]
    if Ky == 0:
        return Bn, gy
    P = Bn[:, :Ky]
    if np.linalg.matrix_rank(P) < Ky or np.linalg.cond(P) > 1e12:
        raise SingularBoundaryBlock("leading boundary block is singular")
    Bn2 = np.linalg.solve(P, Bn)
    Bn2[:, :Ky] = np.eye(Ky)
    gy2 = np.linalg.solve(P, gy.T).T
    return Bn2, gy2


def eliminate_boundary_columns(s: SemiDiscreteSystem) -> ReducedSystem:
    """Substitute ``X1 = gy - X2 B2^T`` and keep the first ``n - Ky`` equation columns."""
    n, Ky = s.n, s.Ky
    m = n - Ky
    B2 = s.Bn[:, Ky:]
    Mr, Sr = s.Mn[:m], s.Sn[:m]
    Mt = Mr[:, Ky:] - Mr[:, :Ky] @ B2
    St = Sr[:, Ky:] - Sr[:, :Ky] @ B2
    Ft = s.Fn[:, :m]
    if Ky:
        Lg = np.column_stack([s.L.apply(g) for g in s.gy.T])
        Ng = np.column_stack([s.N.apply(g) for g in s.gy.T])
        rows = max(Ft.shape[0], Lg.shape[0], Ng.shape[0])
        Ft = _pad_rows(Ft, rows) - _pad_rows(Lg, rows) @ Mr[:, :Ky].T - _pad_rows(Ng, rows) @ Sr[:, :Ky].T
    return ReducedSystem(Mt=Mt, St=St, Ft=Ft, B2=B2, gx2=s.gxn[Ky:], gy=s.gy)


def generalized_schur(Mt, St) -> SchurPair:
    """Complex QZ decomposition of a square pair."""
    Mt, St = np.atleast_2d(Mt), np.atleast_2d(St)
    if Mt.shape != St.shape or Mt.shape[0] != Mt.shape[1]:
        raise ValueError("generalized Schur needs two square matrices of equal size")
    try:
        U, T, Q, Z = scipy.linalg.qz(Mt, St, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise np.linalg.LinAlgError(f"QZ iteration failed: {exc}") from exc
    return SchurPair(Q=Q, Z=Z, U=U, T=T)


class _ColumnStore:
    """Column-major store whose row count grows as longer columns arrive."""

    def __init__(self, ncols, dtype):
        self.data = np.zeros((64, ncols), dtype=dtype)

    def set(self, j, v):
        if len(v) > self.data.shape[0]:
            grown = np.zeros((max(len(v), 2 * self.data.shape[0]), self.data.shape[1]), dtype=self.data.dtype)
            grown[: self.data.shape[0]] = self.data
            self.data = grown
        self.data[: len(v), j] = v


def bartels_stewart_columns(L, N, schur: SchurPair, Ft, Bx, gx_rot, tol=DEFAULT_TOL,
                            max_n=DEFAULT_MAX_N, Ft_rotated=False):
    """Solve ``L Y U^T + N Y T^T = Ft conj(Q)``, ``Bx Y = gx_rot`` column by column.

    Columns are found from last to first; column ``m`` solves
    ``(U[m,m] L + T[m,m] N) y_m = g_m - sum_{p>m} (U[m,p] L + T[m,p] N) y_p``.
    Returns the list of coefficient vectors and the per-column ``n_opt``.
    """
    U, T = schur.U, schur.T
    m_cols = U.shape[0]
    G = np.asarray(Ft) if Ft_rotated else np.asarray(Ft) @ np.conj(schur.Q)
    Ls, Ns = SavedOperator(L), SavedOperator(N)
    dtype = np.result_type(G.dtype, U.dtype, complex)
    LY, NY = _ColumnStore(m_cols, dtype), _ColumnStore(m_cols, dtype)
    ys = [None] * m_cols
    nopt = [0] * m_cols
    gx_rot = np.asarray(gx_rot).reshape(len(Bx), m_cols)
    for m in range(m_cols - 1, -1, -1):
        rows = max(G.shape[0], LY.data.shape[0])
        rhs = _pad_rows(G[:, m], rows).astype(dtype)
        if m + 1 < m_cols:
            rhs[: LY.data.shape[0]] -= LY.data[:, m + 1 :] @ U[m, m + 1 :] + NY.data[:, m + 1 :] @ T[m, m + 1 :]
        terms = [ScaledOperator(c, op) for c, op in ((U[m, m], Ls), (T[m, m], Ns)) if c != 0]
        if not terms:
            raise SingularError(f"column {m + 1}: U and T both vanish on the diagonal")
        op = terms[0] if len(terms) == 1 else PlusOperator(terms)
        try:
            info = adaptive_qr(Bx, op, gx_rot[:, m], rhs, tol=tol, max_n=max_n, dtype=dtype)
        except NoConvergence as exc:
            raise NoConvergence(exc.max_n, f"column {m + 1}: {exc}") from exc
        except SingularError as exc:
            raise SingularError(f"column {m + 1}: {exc}") from exc
        y = info.coefficients
        ys[m] = y
        nopt[m] = info.n_opt
        LY.set(m, Ls.apply(y))
        NY.set(m, Ns.apply(y))
    return ys, nopt


def recover_solution(Y, Z, B2, gy, real=False) -> np.ndarray:
    """Undo the rotation (``X2 = Y Z^T``) and rebuild ``X1 = gy - X2 B2^T``."""
    rows = max([len(y) for y in Y] + [np.asarray(gy).shape[0]])
    Ymat = np.column_stack([_pad_rows(y, rows) for y in Y]) if Y else np.zeros((rows, 0))
    X2 = Ymat @ Z.T
    X1 = _pad_rows(gy, rows) - X2 @ B2.T
    X = np.hstack([X1, X2])
    if real:
        scale = max(1.0, np.max(np.abs(X.real), initial=0.0))
        imag = np.max(np.abs(X.imag), initial=0.0)
        if imag > IMAG_DROP * scale:
            raise ResidualImag(f"imaginary part {imag:.3e} in the solution of a real problem")
        X = X.real
    return X


def solve_pde(p: TensorProblem, n_y: int, tol: float = DEFAULT_TOL, max_n: int = DEFAULT_MAX_N) -> BivariateSolution:
    """Solve a tensor problem with ``n_y`` modes in y and adaptive resolution in x."""
    s = semidiscretize(p, n_y)
    s.Bn, s.gy = normalize_boundary(s.Bn, s.gy)
    r = eliminate_boundary_columns(s)
    t0 = time.perf_counter()
    schur = generalized_schur(r.Mt, r.St)
    t1 = time.perf_counter()
    gx_rot = r.gx2.T @ np.conj(schur.Z)
    Y, nopt = bartels_stewart_columns(p.L, p.N, schur, r.Ft, p.Bx, gx_rot, tol=tol, max_n=max_n)
    X = recover_solution(Y, schur.Z, r.B2, r.gy, real=p.is_real)
    t2 = time.perf_counter()
    return BivariateSolution(X=X, xspace=p.L.domainspace, yspace=p.M.domainspace, n_opt=nopt,
                             t_qz=t1 - t0, t_solve=t2 - t1)


def tensor_residual(p: TensorProblem, X, n_cols: int | None = None) -> np.ndarray:
    """Coefficients of ``L X M^T + N X S^T - F`` by lazy application.

    ``n_cols`` keeps only the first y-modes of the residual; the semi-discrete
    equation enforces ``n_y - K_y`` of them.
    """
    X = np.asarray(X)
    LX = np.column_stack([p.L.apply(X[:, j]) for j in range(X.shape[1])])
    NX = np.column_stack([p.N.apply(X[:, j]) for j in range(X.shape[1])])
    LXM = np.vstack([p.M.apply(row) for row in LX])
    NXS = np.vstack([p.S.apply(row) for row in NX])
    rows = max(LXM.shape[0], NXS.shape[0], p.F.shape[0])
    cols = max(LXM.shape[1], NXS.shape[1], p.F.shape[1])
    R = np.zeros((rows, cols), dtype=np.result_type(LXM, NXS, p.F))
    R[: LXM.shape[0], : LXM.shape[1]] += LXM
    R[: NXS.shape[0], : NXS.shape[1]] += NXS
    R[: p.F.shape[0], : p.F.shape[1]] -= p.F
    if n_cols is not None:
        R = R[:, :n_cols]
    return R
