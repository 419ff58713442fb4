"""Adaptive QR for almost-banded infinite systems.

An almost-banded system stacks ``K`` functionals (boundary rows) on top of a
banded operator ``B`` with bands ``a:b``::

    [ F_1 ]       [ c_1 ]
    [ ... ]  u =  [ ... ]
    [ F_K ]       [ c_K ]
    [  B  ]       [  f  ]

:class:`MutableAlmostBandedOperator` holds that ``oo x oo`` operator in a form
on which Givens rotations can act.  Every materialised row ``r`` stores its
entries explicitly for columns ``j < M + r`` and represents the rest of the
row as a combination ``sum_i fill[r, i] * F_i[j]`` of the original
functionals.  Rows that were never touched are read straight from ``B``.

:func:`adaptive_qr_solve` eliminates columns left to right, applying the same
rotations to the right-hand side, and stops as soon as the rotated
right-hand side is negligible below the current column.  The tail is then
dropped and the triangular part back-substituted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import conversion_operator
from .errors import NoConvergence, SingularError
from .operators import BandedOperator, Functional
from .spaces import Fun

DEFAULT_TOL = 1e-14
DEFAULT_MAX_N = 100_000


@dataclass
class AlmostBandedSystem:
    """``K`` boundary functionals with values, a banded operator and its forcing."""

    functionals: list
    operator: BandedOperator
    rhs: Fun | np.ndarray | None = None
    bc_values: list = field(default_factory=list)

    def __post_init__(self):
        self.functionals = list(self.functionals)
        self.bc_values = list(self.bc_values)
        if len(self.bc_values) != len(self.functionals):
            raise ValueError("need one boundary value per functional")
        for F in self.functionals:
            if F.domainspace != self.operator.domainspace:
                raise ValueError(f"functional on {F.domainspace!r}, operator on {self.operator.domainspace!r}")

    @property
    def K(self) -> int:
        return len(self.functionals)

    def rhs_coefficients(self) -> np.ndarray:
        """Forcing coefficients in the operator's range space."""
        f = self.rhs
        if f is None:
            return np.zeros(0)
        if isinstance(f, Fun):
            if f.space != self.operator.rangespace:
                f = conversion_operator(f.space, self.operator.rangespace).apply(f)
            return f.coefficients
        return np.asarray(f)

    def stacked_rhs(self) -> np.ndarray:
        f = self.rhs_coefficients()
        bc = np.asarray(self.bc_values)
        dtype = np.result_type(bc.dtype if bc.size else float, f.dtype)
        out = np.trim_zeros(np.concatenate([bc.astype(dtype), f.astype(dtype)]), "b")
        return out

    def residual(self, u):
        """Boundary and operator-row residuals of ``u`` by direct application.

        Returns ``(bc_residual, row_residual)`` as arrays.
        """
        c = u.coefficients if isinstance(u, Fun) else np.asarray(u)
        bc = np.array([F.dot(c) for F in self.functionals]) - np.asarray(self.bc_values)
        Bu = self.operator.apply(c)
        f = self.rhs_coefficients()
        n = max(len(Bu), len(f))
        r = np.zeros(n, dtype=np.result_type(Bu.dtype, f.dtype))
        r[: len(Bu)] += Bu
        r[: len(f)] -= f
        return bc, r


class GrowableVector:
    """A vector that grows by doubling; unwritten entries are zero."""

    def __init__(self, values=(), dtype=float):
        values = np.asarray(values, dtype=dtype)
        self.data = np.zeros(max(16, len(values)), dtype=dtype)
        self.data[: len(values)] = values

    def ensure(self, n: int):
        if n > len(self.data):
            grown = np.zeros(max(n, 2 * len(self.data)), dtype=self.data.dtype)
            grown[: len(self.data)] = self.data
            self.data = grown

    def __len__(self):
        return len(self.data)


@dataclass(frozen=True)
class GivensRotation:
    """Unitary rotation ``[[conj(c), conj(s)], [-s, c]]`` acting on rows ``k1 < k2``."""

    c: complex | float
    s: complex | float
    rows: tuple

    def matrix(self) -> np.ndarray:
        return np.array([[np.conj(self.c), np.conj(self.s)], [-self.s, self.c]])


def givens(x, y):
    """Rotation zeroing ``y`` against pivot ``x``; returns ``(c, s, r)`` with ``r >= 0``."""
    r = math.hypot(abs(x), abs(y))
    if r == 0:
        return 1.0, 0.0, 0.0
    return x / r, y / r, r


class MutableAlmostBandedOperator:
    """Row-operable workspace representing a stacked almost-banded operator.

    Parameters
    ----------
    functionals : list of Functional
        The ``K`` dense boundary rows.
    operator : BandedOperator
        Banded part with bands ``a:b``; stacked row ``K + k`` is its row ``k``.
    dtype : numpy dtype, optional
        Scalar type of the workspace.  Defaults to the promoted type of the
        inputs.
    record : bool
        Keep a list of every applied :class:`GivensRotation`.
    """

    def __init__(self, functionals, operator: BandedOperator, dtype=None, record=False):
        self.F = list(functionals)
        self.B = operator
        self.K = K = len(self.F)
        a, b = operator.bandinds()
        self.a, self.b = a, b
        # explicit window of row r is columns < M + r
        self.M = b - a + max(K, 1)
        self.width = self.M - a + K
        if dtype is None:
            dtype = np.result_type(operator.dtype, *[F.dtype for F in self.F])
        self.dtype = np.dtype(dtype)
        self.data = np.zeros((0, self.width), dtype=self.dtype)
        self.fill = np.zeros((0, K), dtype=self.dtype)
        self.nrows = 0  # materialised stacked rows
        self._fcache = np.zeros((K, 0), dtype=self.dtype)
        self.rotation_count = 0
        self.rotations = [] if record else None
        self._materialize(K)

    # storage --------------------------------------------------------------

    @property
    def n(self) -> int:
        """Number of operator rows held in mutable storage."""
        return max(self.nrows - self.K, 0)

    @property
    def bcdata(self):
        return self.data[: self.K]

    @property
    def bcfilldata(self):
        return self.fill[: self.K]

    @property
    def filldata(self):
        return self.fill[self.K : self.nrows]

    def _reserve(self, rows: int):
        cap = len(self.data)
        if rows <= cap:
            return
        cap = max(rows, 2 * cap, 32)
        data = np.zeros((cap, self.width), dtype=self.dtype)
        fill = np.zeros((cap, self.K), dtype=self.dtype)
        data[: self.nrows] = self.data[: self.nrows]
        fill[: self.nrows] = self.fill[: self.nrows]
        self.data, self.fill = data, fill

    def _functional_columns(self, last_col: int):
        have = self._fcache.shape[1]
        if last_col <= have or self.K == 0:
            return
        new = max(last_col, 2 * have, 64)
        cache = np.zeros((self.K, new), dtype=self.dtype)
        cache[:, :have] = self._fcache
        cols = range(have + 1, new + 1)
        for i, F in enumerate(self.F):
            cache[i, have:] = F.getindex(cols)
        self._fcache = cache

    def _materialize(self, last_row: int):
        """Make stacked rows ``1..last_row`` mutable."""
        if last_row <= self.nrows:
            return
        K, a = self.K, self.a
        if self.nrows < K:
            self._reserve(K)
            self._functional_columns(K + self.M)
            for r in range(1, K + 1):
                lo = 1 - (r + a - K)
                self.data[r - 1, lo:] = self._fcache[r - 1, : r + self.M - 1]
                self.fill[r - 1, r - 1] = 1
            self.nrows = K
        if last_row <= self.nrows:
            return
        # fetch operator rows in doubling chunks
        start = self.nrows - K + 1
        stop = max(last_row - K, 2 * (self.nrows - K), 32) + 1
        self._reserve(K + stop - 1)
        blk = self.B.block(range(start, stop), dtype=self.dtype)
        nb = blk.data.shape[1]
        self.data[K + start - 1 : K + stop - 1, :nb] = blk.data
        self.nrows = K + stop - 1

    # entries --------------------------------------------------------------

    def __getitem__(self, kj):
        k, j = kj
        if k < 1 or j < 1:
            raise IndexError("rows and columns start at 1")
        if k > self.nrows:
            return self.B.entry(k - self.K, j)
        if j < self.M + k:
            idx = j - (k + self.a - self.K)
            return self.data[k - 1, idx] if idx >= 0 else self.dtype.type(0)
        if self.K == 0:
            return self.dtype.type(0)
        self._functional_columns(j)
        return self.fill[k - 1] @ self._fcache[:, j - 1]

    def section(self, n: int, m: int | None = None) -> np.ndarray:
        """Dense ``n x m`` section of the represented operator."""
        m = n if m is None else m
        return np.array([[self[k, j] for j in range(1, m + 1)] for k in range(1, n + 1)])

    # elimination ----------------------------------------------------------

    def eliminate_column(self, c: int, rhs: GrowableVector):
        """Zero column ``c`` below the diagonal; columns ``< c`` must already be done."""
        K, M, a = self.K, self.M, self.a
        last = c + K - a
        self._materialize(last)
        self._functional_columns(c + M + K - a)
        rhs.ensure(last)
        off = K - a
        data, fill, fc, b = self.data, self.fill, self._fcache, rhs.data
        x = data[c - 1, off:]
        for r2 in range(c + 1, last + 1):
            t = r2 - c
            y = data[r2 - 1, off - t :]
            yv = y[0].item()
            if yv == 0:
                continue
            cs, sn, rr = givens(x[0].item(), yv)
            ccs, csn = np.conj(cs), np.conj(sn)
            if K:
                tail = fill[c - 1] @ fc[:, c + M - 1 : c + M - 1 + t]
            else:
                tail = 0
            x_old = x.copy()
            x[:] = ccs * x_old + csn * y[:M]
            y[:M] = cs * y[:M] - sn * x_old
            y[M:] = cs * y[M:] - sn * tail
            x[0] = rr
            y[0] = 0
            if K:
                f1 = fill[c - 1].copy()
                fill[c - 1] = ccs * f1 + csn * fill[r2 - 1]
                fill[r2 - 1] = cs * fill[r2 - 1] - sn * f1
            b1 = b[c - 1]
            b[c - 1] = ccs * b1 + csn * b[r2 - 1]
            b[r2 - 1] = cs * b[r2 - 1] - sn * b1
            self.rotation_count += 1
            if self.rotations is not None:
                self.rotations.append(GivensRotation(cs, sn, (c, r2)))
        if x[0] == 0:
            raise SingularError(f"column {c} vanishes on and below the diagonal")

    def diagonal(self, r: int):
        return self.data[r - 1, self.K - self.a]


def givens_eliminate_column(A: MutableAlmostBandedOperator, rhs: GrowableVector, col: int):
    A.eliminate_column(col, rhs)


def back_substitute(A: MutableAlmostBandedOperator, rhs, n: int) -> np.ndarray:
    """Solve the leading ``n x n`` upper-triangular part against ``rhs[:n]``.

    Entries of the solution beyond ``n`` are zero, so the dense tails of the
    triangular rows collapse to running sums of functional columns.
    """
    rhs = np.asarray(rhs)
    K, M, a = A.K, A.M, A.a
    off = K - a
    A._functional_columns(n)
    dtype = np.result_type(A.dtype, rhs.dtype)
    u = np.zeros(n, dtype=dtype)
    W = np.zeros(K, dtype=dtype)  # sum_{j >= p} F[:, j] u_j
    p = n + 1
    fc = A._fcache
    for r in range(n, 0, -1):
        while p > r + M:
            p -= 1
            if K:
                W += fc[:, p - 1] * u[p - 1]
        hi = min(n, r + M - 1)
        s = A.data[r - 1, off + 1 : off + 1 + hi - r] @ u[r:hi]
        if K:
            s += A.fill[r - 1] @ W
        d = A.data[r - 1, off]
        if d == 0:
            raise SingularError(f"zero diagonal in row {r}")
        u[r - 1] = (rhs[r - 1] - s) / d
    return u


def back_substitute_dense(R, rhs) -> np.ndarray:
    """Plain upper-triangular solve of a dense matrix."""
    R, rhs = np.asarray(R), np.asarray(rhs)
    n = R.shape[0]
    u = np.zeros(n, dtype=np.result_type(R, rhs))
    for r in range(n - 1, -1, -1):
        if R[r, r] == 0:
            raise SingularError(f"zero diagonal in row {r + 1}")
        u[r] = (rhs[r] - R[r, r + 1 :] @ u[r + 1 :]) / R[r, r]
    return u


@dataclass
class QRInfo:
    n_opt: int
    rotations: int
    tail_norm: float
    coefficients: np.ndarray
    workspace: MutableAlmostBandedOperator


def adaptive_qr(functionals, operator, bc_values, rhs_coefficients, tol=DEFAULT_TOL,
                max_n=DEFAULT_MAX_N, dtype=None, record=False) -> QRInfo:
    """Adaptive QR on raw inputs; see :func:`adaptive_qr_solve`."""
    bc = np.asarray(bc_values)
    f = np.asarray(rhs_coefficients)
    if dtype is None:
        dtype = np.result_type(operator.dtype, *[F.dtype for F in functionals],
                               bc.dtype if bc.size else float, f.dtype)
    A = MutableAlmostBandedOperator(functionals, operator, dtype=dtype, record=record)
    stacked = np.concatenate([bc.astype(A.dtype), f.astype(A.dtype)])
    nz = np.nonzero(stacked)[0]
    length = nz[-1] + 1 if len(nz) else 0
    rhs = GrowableVector(stacked[:length], dtype=A.dtype)
    scale = np.max(np.abs(stacked)) if length else 0.0
    threshold = tol * max(1.0, scale)
    reach = A.K - A.a
    for c in range(1, max_n + 1):
        A.eliminate_column(c, rhs)
        if c < A.K:
            continue
        hi = max(length, c + reach)
        rhs.ensure(hi)
        tail = np.max(np.abs(rhs.data[c:hi])) if hi > c else 0.0
        if tail <= threshold:
            break
    else:
        raise NoConvergence(max_n)
    u = back_substitute(A, rhs.data[:c], c)
    return QRInfo(n_opt=c, rotations=A.rotation_count, tail_norm=float(tail), coefficients=u, workspace=A)


def adaptive_qr_solve(sys: AlmostBandedSystem, tol: float = DEFAULT_TOL, max_n: int = DEFAULT_MAX_N,
                      full_output: bool = False):
    """Solve an almost-banded system to tolerance ``tol``.

    Columns are eliminated one at a time.  After column ``n`` the rotated
    right-hand side below row ``n`` is exactly the residual the truncated
    solution would leave, so once its entries fall under
    ``tol * max(1, max|rhs|)`` they are dropped and the first ``n`` rows
    back-substituted.

    Returns a :class:`Fun` in the operator's domain space, plus a
    :class:`QRInfo` when ``full_output`` is set.

    Raises
    ------
    NoConvergence
        The tail stayed above the threshold for ``max_n`` columns.
    SingularError
        A zero pivot or diagonal entry was met.
    """
    info = adaptive_qr(sys.functionals, sys.operator, sys.bc_values, sys.rhs_coefficients(),
                       tol=tol, max_n=max_n)
    u = Fun(sys.operator.domainspace, info.coefficients)
    return (u, info) if full_output else u
