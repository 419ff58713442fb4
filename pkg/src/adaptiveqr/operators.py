"""Lazy functionals and banded operators.

Rows and columns of operators are numbered from 1, so that the Taylor
derivative has entry ``(k, k + 1) == k``.  Row ranges are passed as Python
``range`` objects holding those 1-based indices.

A :class:`Functional` is a ``1 x oo`` row that produces entries for any
column range through :meth:`Functional.getindex`.  A :class:`BandedOperator`
is an ``oo x oo`` operator whose row ``k`` is supported in columns
``k + a .. k + b`` for its band range ``(a, b)``; it fills finite row blocks
through :meth:`BandedOperator.addentries`, which adds rather than overwrites.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BandMismatch, DomainError
from .spaces import (
    CHEBYSHEV,
    TAYLOR,
    ULTRASPHERICAL,
    Chebyshev,
    Fun,
    Space,
    Taylor,
    Ultraspherical,
    basis_values,
)


class BandedBlock:
    """Finite block of rows of a banded operator.

    Entry ``(k, j)`` is stored at ``data[k - rows.start, j - k - a]``, so an
    ``n``-row block with bands ``a:b`` is an ``n x (b - a + 1)`` array.
    Columns below 1 do not exist and always read as zero.
    """

    def __init__(self, rows: range, bands, dtype=float):
        a, b = bands
        if a > b:
            raise ValueError(f"empty band range {a}:{b}")
        self.rows = rows
        self.bands = (int(a), int(b))
        self.data = np.zeros((len(rows), b - a + 1), dtype=dtype)

    @property
    def dtype(self):
        return self.data.dtype

    def _offset(self, k, j):
        if k not in self.rows:
            raise IndexError(f"row {k} not in block rows {self.rows}")
        return j - k - self.bands[0]

    def __getitem__(self, kj):
        k, j = kj
        d = self._offset(k, j)
        if j < 1 or d < 0 or d >= self.data.shape[1]:
            return self.data.dtype.type(0)
        return self.data[k - self.rows.start, d]

    def __setitem__(self, kj, value):
        k, j = kj
        d = self._offset(k, j)
        if j < 1 or d < 0 or d >= self.data.shape[1]:
            raise IndexError(f"entry ({k}, {j}) outside bands {self.bands}")
        self.data[k - self.rows.start, d] = value

    def add_band(self, rows: range, offset: int, values):
        """Add ``values`` along the diagonal ``j = k + offset`` for ``k`` in ``rows``.

        Entries that would land in columns below 1 are discarded.
        """
        a, b = self.bands
        if not a <= offset <= b:
            raise BandMismatch(f"offset {offset} outside bands {self.bands}")
        if len(rows) == 0:
            return
        first = max(rows.start, 1 - offset)
        values = np.broadcast_to(values, (len(rows),))
        skip = first - rows.start
        if skip >= len(rows):
            return
        i0 = rows.start - self.rows.start + skip
        self.data[i0 : i0 + len(rows) - skip, offset - a] += values[skip:]

    def add_block(self, other: "BandedBlock", scale=1):
        """Add the entries of ``other`` (rows and bands contained in ours)."""
        a, b = self.bands
        oa, ob = other.bands
        if oa < a or ob > b:
            raise BandMismatch(f"bands {other.bands} do not fit in {self.bands}")
        i0 = other.rows.start - self.rows.start
        if i0 < 0 or i0 + len(other.rows) > len(self.rows):
            raise IndexError("row range not contained in block")
        target = self.data[i0 : i0 + len(other.rows), oa - a : ob - a + 1]
        if scale == 1:
            target += other.data
        else:
            target += scale * other.data

    def row_entries(self, k):
        """Return ``(first_column, values)`` of the stored band of row ``k``."""
        return k + self.bands[0], self.data[k - self.rows.start]

    def to_dense(self, ncols: int) -> np.ndarray:
        """Dense ``len(rows) x ncols`` array of columns ``1..ncols``."""
        out = np.zeros((len(self.rows), ncols), dtype=self.dtype)
        ks = np.arange(self.rows.start, self.rows.stop)
        idx = np.arange(len(self.rows))
        for d in range(self.data.shape[1]):
            cols = ks + self.bands[0] + d
            ok = (cols >= 1) & (cols <= ncols)
            out[idx[ok], cols[ok] - 1] = self.data[ok, d]
        return out

    def matvec(self, u: np.ndarray) -> np.ndarray:
        """Apply the block rows to a vector whose slot 0 is column 1."""
        a = self.bands[0]
        out = np.zeros(len(self.rows), dtype=np.result_type(self.dtype, u.dtype))
        ks = np.arange(self.rows.start, self.rows.stop)
        for d in range(self.data.shape[1]):
            cols = ks + a + d
            ok = (cols >= 1) & (cols <= len(u))
            out[ok] += self.data[ok, d] * u[cols[ok] - 1]
        return out


def _as_range(cols) -> range:
    if isinstance(cols, range):
        if cols.step != 1 or len(cols) == 0 or cols.start < 1:
            raise IndexError(f"invalid column range {cols}")
        return cols
    if isinstance(cols, int):
        return range(cols, cols + 1)
    raise TypeError("columns must be a range of 1-based indices")


class Functional:
    """A ``1 x oo`` row operator.

    Subclasses implement :meth:`getindex`.
    """

    dtype = np.dtype(float)

    @property
    def domainspace(self) -> Space:
        raise NotImplementedError

    def getindex(self, cols: range) -> np.ndarray:
        """Entries in the given 1-based column range."""
        raise NotImplementedError

    def __getitem__(self, cols):
        if isinstance(cols, int):
            return self.getindex(range(cols, cols + 1))[0]
        return self.getindex(_as_range(cols))

    def dot(self, u) -> complex | float:
        """Apply to a coefficient vector or a :class:`Fun`."""
        if isinstance(u, Fun):
            if u.space != self.domainspace:
                raise ValueError(f"functional on {self.domainspace!r} applied to {u.space!r}")
            u = u.coefficients
        u = np.asarray(u)
        if len(u) == 0:
            return 0.0
        return np.dot(self.getindex(range(1, len(u) + 1)), u)

    def __add__(self, other):
        from .algebra import plus_functionals

        if not isinstance(other, Functional):
            return NotImplemented
        return plus_functionals(self, other)

    def __sub__(self, other):
        if not isinstance(other, Functional):
            return NotImplemented
        return self + (-1) * other

    def __mul__(self, other):
        from .algebra import ScaledFunctional, functional_times_operator

        if isinstance(other, BandedOperator):
            return functional_times_operator(self, other)
        if isinstance(other, Fun):
            return self.dot(other)
        if np.isscalar(other):
            return ScaledFunctional(other, self)
        return NotImplemented

    def __rmul__(self, other):
        from .algebra import ScaledFunctional

        if np.isscalar(other):
            return ScaledFunctional(other, self)
        return NotImplemented

    def __neg__(self):
        return (-1) * self


class BandedOperator:
    """An ``oo x oo`` operator with finite band range ``(a, b)``, ``a <= 0 <= b``.

    Subclasses implement :meth:`bandinds`, :meth:`addentries` and the
    ``domainspace``/``rangespace`` properties.
    """

    dtype = np.dtype(float)

    def bandinds(self) -> tuple[int, int]:
        raise NotImplementedError

    @property
    def domainspace(self) -> Space:
        raise NotImplementedError

    @property
    def rangespace(self) -> Space:
        raise NotImplementedError

    def addentries(self, block: BandedBlock, rows: range) -> BandedBlock:
        """Add this operator's entries for ``rows`` into ``block``."""
        raise NotImplementedError

    def _check_block(self, block: BandedBlock, rows: range):
        a, b = self.bandinds()
        ba, bb = block.bands
        if ba > a or bb < b:
            raise BandMismatch(f"block bands {block.bands} cannot hold {(a, b)}")
        if len(rows) and (rows.start < block.rows.start or rows.stop > block.rows.stop):
            raise IndexError(f"rows {rows} not inside block rows {block.rows}")

    def block(self, rows: range, dtype=None) -> BandedBlock:
        """A fresh block holding exactly this operator's rows."""
        blk = BandedBlock(rows, self.bandinds(), dtype=dtype or self.dtype)
        self.addentries(blk, rows)
        return blk

    def entry(self, k: int, j: int):
        """Scalar entry ``(k, j)`` assembled from a one-row block."""
        return self.block(range(k, k + 1))[k, j]

    def __getitem__(self, kj):
        return self.entry(*kj)

    def matrix(self, n: int, m: int | None = None) -> np.ndarray:
        """Dense finite section: rows ``1..n``, columns ``1..m``."""
        m = n if m is None else m
        if n == 0:
            return np.zeros((0, m), dtype=self.dtype)
        return self.block(range(1, n + 1)).to_dense(m)

    def apply(self, u):
        """Apply to a coefficient vector or a :class:`Fun`; returns the same kind."""
        fun = isinstance(u, Fun)
        if fun:
            if u.space != self.domainspace:
                raise ValueError(f"operator on {self.domainspace!r} applied to {u.space!r}")
            c = u.coefficients
        else:
            c = np.asarray(u)
        a, _ = self.bandinds()
        n = len(c) - a
        if len(c) == 0:
            out = np.zeros(0, dtype=np.result_type(self.dtype, float))
        else:
            out = self.block(range(1, n + 1), dtype=np.result_type(self.dtype, c.dtype)).matvec(c)
        return Fun(self.rangespace, out, tol=0) if fun else out

    def __add__(self, other):
        from .algebra import plus

        if not isinstance(other, BandedOperator):
            return NotImplemented
        return plus(self, other)

    def __sub__(self, other):
        if not isinstance(other, BandedOperator):
            return NotImplemented
        return self + (-1) * other

    def __mul__(self, other):
        from .algebra import ScaledOperator, times

        if isinstance(other, BandedOperator):
            return times(self, other)
        if isinstance(other, Fun) or isinstance(other, np.ndarray):
            return self.apply(other)
        if np.isscalar(other):
            return ScaledOperator(other, self)
        return NotImplemented

    __matmul__ = __mul__

    def __rmul__(self, other):
        from .algebra import ScaledOperator

        if np.isscalar(other):
            return ScaledOperator(other, self)
        return NotImplemented

    def __neg__(self):
        return (-1) * self


# Taylor family


class TaylorEvaluation(Functional):
    """Point evaluation ``[1, z, z**2, ...]`` of a Taylor series."""

    def __init__(self, z):
        self.z = z
        self.dtype = np.result_type(np.asarray(z).dtype, float)

    @property
    def domainspace(self):
        return Taylor()

    def getindex(self, cols):
        cols = _as_range(cols)
        return np.asarray(self.z, dtype=self.dtype) ** (np.arange(cols.start, cols.stop) - 1)

    def __repr__(self):
        return f"TaylorEvaluation({self.z})"


class TaylorDerivative(BandedOperator):
    """d/dz on Taylor coefficients: entry ``(k, k + 1) = k``."""

    def bandinds(self):
        return (0, 1)

    @property
    def domainspace(self):
        return Taylor()

    @property
    def rangespace(self):
        return Taylor()

    def addentries(self, block, rows):
        self._check_block(block, rows)
        block.add_band(rows, 1, np.arange(rows.start, rows.stop, dtype=float))
        return block

    def __repr__(self):
        return "TaylorDerivative()"


class TaylorMultiplication(BandedOperator):
    """Multiplication by the polynomial ``sum a[i] z**i`` (lower Toeplitz)."""

    def __init__(self, a):
        a = np.asarray(a)
        if a.ndim != 1 or len(a) == 0:
            raise ValueError("multiplication needs a nonempty coefficient vector")
        self.a = a
        self.dtype = np.result_type(a.dtype, float)

    def bandinds(self):
        return (1 - len(self.a), 0)

    @property
    def domainspace(self):
        return Taylor()

    @property
    def rangespace(self):
        return Taylor()

    def addentries(self, block, rows):
        self._check_block(block, rows)
        for i, ai in enumerate(self.a):
            if ai != 0:
                block.add_band(rows, -i, ai)
        return block

    def __repr__(self):
        return f"TaylorMultiplication({self.a.tolist()})"


# Chebyshev / ultraspherical family


class Identity(BandedOperator):
    """Identity on a space."""

    def __init__(self, space: Space | None = None):
        self.space = space or Chebyshev()

    def bandinds(self):
        return (0, 0)

    @property
    def domainspace(self):
        return self.space

    @property
    def rangespace(self):
        return self.space

    def addentries(self, block, rows):
        self._check_block(block, rows)
        block.add_band(rows, 0, 1.0)
        return block

    def __repr__(self):
        return f"Identity({self.space!r})"


class ConversionStep(BandedOperator):
    """One rung of the ladder: Chebyshev -> C^(1) or C^(lam) -> C^(lam+1)."""

    def __init__(self, level: int):
        if level < 0:
            raise ValueError("ladder level must be >= 0")
        self.level = level

    def bandinds(self):
        return (0, 2)

    @property
    def domainspace(self):
        return Chebyshev() if self.level == 0 else Ultraspherical(self.level)

    @property
    def rangespace(self):
        return Ultraspherical(self.level + 1)

    def addentries(self, block, rows):
        self._check_block(block, rows)
        i = np.arange(rows.start, rows.stop, dtype=float) - 1  # 0-based degree
        lam = self.level
        if lam == 0:
            diag = np.where(i == 0, 1.0, 0.5)
            block.add_band(rows, 0, diag)
            block.add_band(rows, 2, -0.5)
        else:
            block.add_band(rows, 0, lam / (i + lam))
            block.add_band(rows, 2, -lam / (i + 2 + lam))
        return block

    def __repr__(self):
        return f"ConversionStep({self.domainspace!r} -> {self.rangespace!r})"


class UltrasphericalDerivative(BandedOperator):
    """``order``-th derivative mapping Chebyshev to C^(order) coefficients.

    Entry ``(k, k + order) = 2**(order-1) (order-1)! (k + order - 1)``.
    """

    def __init__(self, order: int = 1):
        if order < 1:
            raise ValueError("derivative order must be >= 1")
        self.order = int(order)

    def bandinds(self):
        return (0, self.order)

    @property
    def domainspace(self):
        return Chebyshev()

    @property
    def rangespace(self):
        return Ultraspherical(self.order)

    def addentries(self, block, rows):
        self._check_block(block, rows)
        lam = self.order
        scale = 2.0 ** (lam - 1) * math.factorial(lam - 1)
        k = np.arange(rows.start, rows.stop, dtype=float)
        block.add_band(rows, lam, scale * (k + lam - 1))
        return block

    def __repr__(self):
        return f"UltrasphericalDerivative({self.order})"


class Evaluation(Functional):
    """Point evaluation in Chebyshev or ultraspherical coefficients."""

    def __init__(self, space: Space, x):
        if space.kind == TAYLOR:
            raise TypeError("use TaylorEvaluation for Taylor series")
        if not space.contains(x):
            raise DomainError(f"{x} outside {space.domain}")
        self.space = space
        self.x = float(np.real(x))
        self._cache = np.zeros(0)

    @property
    def domainspace(self):
        return self.space

    def getindex(self, cols):
        cols = _as_range(cols)
        if len(self._cache) < cols.stop - 1:
            self._cache = basis_values(self.space, self.x, max(cols.stop - 1, 2 * len(self._cache)))
        return self._cache[cols.start - 1 : cols.stop - 1].copy()

    def __repr__(self):
        return f"Evaluation({self.space!r}, {self.x})"


def taylor_evaluation(z) -> TaylorEvaluation:
    return TaylorEvaluation(z)


def taylor_derivative() -> TaylorDerivative:
    return TaylorDerivative()


def taylor_multiplication(a) -> TaylorMultiplication:
    return TaylorMultiplication(a)


def ultraspherical_derivative(order: int) -> UltrasphericalDerivative:
    return UltrasphericalDerivative(order)


def evaluation_functional(space: Space, x) -> Functional:
    if space.kind == TAYLOR:
        return TaylorEvaluation(x)
    if space.kind in (CHEBYSHEV, ULTRASPHERICAL):
        return Evaluation(space, x)
    raise TypeError(f"unsupported space {space!r}")
