"""Operator and functional algebra.

Sums and products of banded operators build a lazy tree.  ``+`` promotes
range spaces up the conversion ladder, ``*`` inserts a conversion between
incompatible factors.  :class:`SavedOperator` caches rows of an expensive
tree and :class:`InterlaceOperator` alternates the rows and columns of
several operators.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConversion
from .operators import BandedBlock, BandedOperator, ConversionStep, Functional, Identity, _as_range
from .spaces import TAYLOR, Space


def conversion_operator(frm: Space, to: Space) -> BandedOperator:
    """Banded operator taking coefficients in ``frm`` to coefficients in ``to``.

    The ladder runs Chebyshev -> C^(1) -> C^(2) -> ...; Taylor converts only
    to itself.
    """
    if frm == to:
        return Identity(frm)
    if frm.kind == TAYLOR or to.kind == TAYLOR or to.level < frm.level:
        raise NoConversion(f"no banded conversion from {frm!r} to {to!r}")
    steps = [ConversionStep(lam) for lam in range(to.level - 1, frm.level - 1, -1)]
    if len(steps) == 1:
        return steps[0]
    return TimesOperator(steps)


def _highest(spaces):
    spaces = list(spaces)
    if len(set(spaces)) == 1:
        return spaces[0]
    if any(s.kind == TAYLOR for s in spaces):
        raise NoConversion(f"cannot reconcile spaces {spaces}")
    return max(spaces, key=lambda s: s.level)


def _result_dtype(*items):
    return np.result_type(*[it.dtype for it in items])


def block_product(P: BandedBlock, Q: BandedBlock) -> BandedBlock:
    """Rows ``P.rows`` of the product of two banded row blocks.

    ``Q`` must hold every row of the second factor touched by ``P``.
    """
    pa, pb = P.bands
    qa, qb = Q.bands
    out = BandedBlock(P.rows, (pa + qa, pb + qb), dtype=np.result_type(P.dtype, Q.dtype))
    wq = qb - qa + 1
    ks = np.arange(P.rows.start, P.rows.stop)
    for dp in range(pb - pa + 1):
        ls = ks + pa + dp
        ok = (ls >= Q.rows.start) & (ls < Q.rows.stop)
        if not ok.any():
            continue
        out.data[ok, dp : dp + wq] += P.data[ok, dp, None] * Q.data[ls[ok] - Q.rows.start]
    return out


class ScaledOperator(BandedOperator):
    """``c * A`` for a scalar ``c``."""

    def __init__(self, c, op: BandedOperator):
        self.c = c
        self.op = op
        self.dtype = np.result_type(np.asarray(c).dtype, op.dtype)

    def bandinds(self):
        return self.op.bandinds()

    @property
    def domainspace(self):
        return self.op.domainspace

    @property
    def rangespace(self):
        return self.op.rangespace

    def addentries(self, block, rows):
        self._check_block(block, rows)
        if len(rows) and self.c != 0:
            block.add_block(self.op.block(rows, dtype=block.dtype), scale=self.c)
        return block

    def __repr__(self):
        return f"{self.c} * {self.op!r}"


class PlusOperator(BandedOperator):
    """Sum of banded operators sharing domain and range spaces."""

    def __init__(self, summands):
        summands = list(summands)
        if not summands:
            raise ValueError("PlusOperator needs at least one summand")
        doms = {s.domainspace for s in summands}
        rans = {s.rangespace for s in summands}
        if len(doms) != 1 or len(rans) != 1:
            raise NoConversion("summands must share domain and range spaces")
        self.summands = summands
        self.dtype = _result_dtype(*summands)

    def bandinds(self):
        bands = [s.bandinds() for s in self.summands]
        return min(a for a, _ in bands), max(b for _, b in bands)

    @property
    def domainspace(self):
        return self.summands[0].domainspace

    @property
    def rangespace(self):
        return self.summands[0].rangespace

    def addentries(self, block, rows):
        self._check_block(block, rows)
        for s in self.summands:
            s.addentries(block, rows)
        return block

    def __repr__(self):
        return " + ".join(repr(s) for s in self.summands)


class TimesOperator(BandedOperator):
    """Product ``A1 * A2 * ... * Am`` of space-compatible banded operators."""

    def __init__(self, factors):
        flat = []
        for f in factors:
            flat.extend(f.factors if isinstance(f, TimesOperator) else [f])
        if not flat:
            raise ValueError("TimesOperator needs at least one factor")
        for left, right in zip(flat, flat[1:]):
            if left.domainspace != right.rangespace:
                raise NoConversion(f"{left!r} cannot act on the range of {right!r}")
        self.factors = flat
        self.dtype = _result_dtype(*flat)

    def bandinds(self):
        bands = [f.bandinds() for f in self.factors]
        return sum(a for a, _ in bands), sum(b for _, b in bands)

    @property
    def domainspace(self):
        return self.factors[-1].domainspace

    @property
    def rangespace(self):
        return self.factors[0].rangespace

    def addentries(self, block, rows):
        self._check_block(block, rows)
        if len(rows) == 0:
            return block
        P = self.factors[0].block(rows, dtype=block.dtype)
        for f in self.factors[1:]:
            pa, pb = P.bands
            needed = range(max(1, rows.start + pa), max(1, rows.stop + pb))
            P = block_product(P, f.block(needed, dtype=block.dtype))
        block.add_block(P)
        return block

    def __repr__(self):
        return " * ".join(f"({f!r})" if isinstance(f, PlusOperator) else repr(f) for f in self.factors)


class SavedOperator(BandedOperator):
    """Wraps an operator and caches its rows as they are computed.

    Not safe for concurrent growth; share only between growth phases.
    """

    def __init__(self, op: BandedOperator):
        self.op = op
        self.dtype = op.dtype
        self._cache = BandedBlock(range(1, 1), op.bandinds(), dtype=op.dtype)
        self.inner_calls = 0
        self.rows_computed = 0

    def bandinds(self):
        return self.op.bandinds()

    @property
    def domainspace(self):
        return self.op.domainspace

    @property
    def rangespace(self):
        return self.op.rangespace

    def _grow(self, last_row: int):
        have = len(self._cache.rows)
        if last_row <= have:
            return
        target = max(last_row, 2 * have, 16)
        fresh = self.op.block(range(have + 1, target + 1), dtype=self.dtype)
        self.inner_calls += 1
        self.rows_computed += len(fresh.rows)
        grown = BandedBlock(range(1, target + 1), self._cache.bands, dtype=self.dtype)
        grown.data[:have] = self._cache.data
        grown.data[have:] = fresh.data
        self._cache = grown

    def addentries(self, block, rows):
        self._check_block(block, rows)
        if len(rows) == 0:
            return block
        self._grow(rows.stop - 1)
        a, b = self._cache.bands
        i0 = rows.start - block.rows.start
        ba = block.bands[0]
        block.data[i0 : i0 + len(rows), a - ba : b - ba + 1] += self._cache.data[rows.start - 1 : rows.stop - 1]
        return block

    def __repr__(self):
        return f"SavedOperator({self.op!r})"


class InterlaceOperator(BandedOperator):
    """Round-robin interlacing of ``p`` banded operators.

    Row ``r`` is row ``ceil(r/p)`` of part ``(r-1) % p``, acting on the
    column stream ``c`` with ``(c-1) % p`` equal to the same part.
    """

    def __init__(self, parts):
        parts = list(parts)
        if len(parts) < 2:
            raise ValueError("interlace needs at least two parts")
        if not all(isinstance(p, BandedOperator) for p in parts):
            raise TypeError("InterlaceOperator parts must be banded operators")
        self.parts = parts
        self.dtype = _result_dtype(*parts)

    def bandinds(self):
        p = len(self.parts)
        bands = [q.bandinds() for q in self.parts]
        return p * min(a for a, _ in bands), p * max(b for _, b in bands)

    @property
    def domainspace(self):
        return tuple(q.domainspace for q in self.parts)

    @property
    def rangespace(self):
        return tuple(q.rangespace for q in self.parts)

    def addentries(self, block, rows):
        self._check_block(block, rows)
        p = len(self.parts)
        ba = block.bands[0]
        for q, part in enumerate(self.parts):
            rs = np.array([r for r in rows if (r - 1) % p == q], dtype=int)
            if len(rs) == 0:
                continue
            i_lo, i_hi = (rs[0] - 1) // p + 1, (rs[-1] - 1) // p + 1
            pb = part.block(range(i_lo, i_hi + 1), dtype=block.dtype)
            pa = pb.bands[0]
            for d in range(pb.data.shape[1]):
                block.data[rs - block.rows.start, p * (pa + d) - ba] += pb.data[:, d]
        return block

    def __repr__(self):
        return f"InterlaceOperator({self.parts!r})"


class ScaledFunctional(Functional):
    def __init__(self, c, F: Functional):
        self.c = c
        self.F = F
        self.dtype = np.result_type(np.asarray(c).dtype, F.dtype)

    @property
    def domainspace(self):
        return self.F.domainspace

    def getindex(self, cols):
        return self.c * self.F.getindex(cols)

    def __repr__(self):
        return f"{self.c} * {self.F!r}"


class PlusFunctional(Functional):
    """Sum of functionals on the same domain space."""

    def __init__(self, summands):
        summands = list(summands)
        if not summands:
            raise ValueError("PlusFunctional needs at least one summand")
        if len({s.domainspace for s in summands}) != 1:
            raise ValueError("functionals must share a domain space")
        self.summands = summands
        self.dtype = _result_dtype(*summands)

    @property
    def domainspace(self):
        return self.summands[0].domainspace

    def getindex(self, cols):
        cols = _as_range(cols)
        out = np.zeros(len(cols), dtype=self.dtype)
        for s in self.summands:
            out += s.getindex(cols)
        return out

    def __repr__(self):
        return " + ".join(repr(s) for s in self.summands)


class TimesFunctional(Functional):
    """A functional applied after a banded operator: ``F * A``."""

    def __init__(self, F: Functional, op: BandedOperator):
        if F.domainspace != op.rangespace:
            raise ValueError(f"functional on {F.domainspace!r} cannot follow range {op.rangespace!r}")
        self.F = F
        self.op = op
        self.dtype = _result_dtype(F, op)

    @property
    def domainspace(self):
        return self.op.domainspace

    def getindex(self, cols):
        cols = _as_range(cols)
        a, b = self.op.bandinds()
        # rows k with a nonzero in cols satisfy cols.start - b <= k <= cols.stop - 1 - a
        ks = range(max(1, cols.start - b), cols.stop - a)
        fk = self.F.getindex(ks)
        blk = self.op.block(ks, dtype=self.dtype)
        out = np.zeros(len(cols), dtype=self.dtype)
        kk = np.arange(ks.start, ks.stop)
        for d in range(blk.data.shape[1]):
            js = kk + a + d
            ok = (js >= cols.start) & (js < cols.stop)
            np.add.at(out, js[ok] - cols.start, fk[ok] * blk.data[ok, d])
        return out

    def __repr__(self):
        return f"{self.F!r} * {self.op!r}"


class InterlaceFunctional(Functional):
    """Functional acting on an interlaced vector: ``sum_q F_q(u_q)``."""

    def __init__(self, parts):
        parts = list(parts)
        if len(parts) < 2:
            raise ValueError("interlace needs at least two parts")
        self.parts = parts
        self.dtype = _result_dtype(*parts)

    @property
    def domainspace(self):
        return tuple(F.domainspace for F in self.parts)

    def getindex(self, cols):
        cols = _as_range(cols)
        p = len(self.parts)
        cs = np.arange(cols.start, cols.stop)
        out = np.zeros(len(cols), dtype=self.dtype)
        for q, F in enumerate(self.parts):
            mine = (cs - 1) % p == q
            if not mine.any():
                continue
            js = (cs[mine] - 1) // p + 1
            out[mine] = F.getindex(range(js[0], js[-1] + 1))
        return out


def plus(A: BandedOperator, B: BandedOperator) -> PlusOperator:
    """``A + B`` with range spaces promoted to the highest one on the ladder."""
    summands = []
    for op in (A, B):
        summands.extend(op.summands if isinstance(op, PlusOperator) else [op])
    if len({s.domainspace for s in summands}) != 1:
        raise NoConversion("summands act on different domain spaces")
    target = _highest(s.rangespace for s in summands)
    promoted = [
        s if s.rangespace == target else TimesOperator([conversion_operator(s.rangespace, target), s])
        for s in summands
    ]
    return PlusOperator(promoted)


def times(A: BandedOperator, B: BandedOperator) -> TimesOperator:
    """``A * B``; inserts a conversion when ``B``'s range is below ``A``'s domain."""
    if A.domainspace == B.rangespace:
        return TimesOperator([A, B])
    return TimesOperator([A, conversion_operator(B.rangespace, A.domainspace), B])


def plus_functionals(F: Functional, G: Functional) -> PlusFunctional:
    summands = []
    for f in (F, G):
        summands.extend(f.summands if isinstance(f, PlusFunctional) else [f])
    return PlusFunctional(summands)


def functional_times_operator(F: Functional, A: BandedOperator) -> TimesFunctional:
    return TimesFunctional(F, A)


def saved(A: BandedOperator) -> SavedOperator:
    return SavedOperator(A)


def interlace(parts):
    """Interlace banded operators, or functionals, round-robin."""
    parts = list(parts)
    if len(parts) < 2:
        raise ValueError("interlace needs at least two parts")
    if all(isinstance(p, Functional) for p in parts):
        return InterlaceFunctional(parts)
    return InterlaceOperator(parts)
