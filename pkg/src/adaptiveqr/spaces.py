"""Function spaces and coefficient-vector functions.

A function is stored as a finite vector of expansion coefficients in one of
three bases: Taylor monomials ``z**k`` on the closed unit disk, Chebyshev
polynomials ``T_k`` on ``[-1, 1]``, or ultraspherical polynomials ``C_k^(lam)``
on ``[-1, 1]``.  Vector slot ``j`` (0-based in Python) multiplies basis
element ``j``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

TAYLOR = "taylor"
CHEBYSHEV = "chebyshev"
ULTRASPHERICAL = "ultraspherical"

#: slack allowed when checking that a point lies in the domain
DOMAIN_SLACK = 1e-14

#: relative truncation tolerance used when constructing a Fun
CHOP_TOL = 1e-14


@dataclass(frozen=True)
class Space:
    """A basis tag.  Two spaces are equal iff kind and order match."""

    kind: str
    order: int = 0

    def __post_init__(self):
        if self.kind not in (TAYLOR, CHEBYSHEV, ULTRASPHERICAL):
            raise ValueError(f"unknown space kind {self.kind!r}")
        if self.kind == ULTRASPHERICAL and self.order < 1:
            raise ValueError("ultraspherical order must be >= 1")
        if self.kind != ULTRASPHERICAL and self.order != 0:
            raise ValueError(f"{self.kind} space takes no order")

    @property
    def domain(self):
        return "unit disk" if self.kind == TAYLOR else (-1.0, 1.0)

    @property
    def level(self):
        """Position on the Chebyshev -> ultraspherical ladder, None for Taylor."""
        if self.kind == TAYLOR:
            return None
        return self.order

    def contains(self, x) -> bool:
        x = np.asarray(x)
        if self.kind == TAYLOR:
            return bool(np.all(np.abs(x) <= 1 + DOMAIN_SLACK))
        if np.iscomplexobj(x) and np.any(x.imag != 0):
            return False
        return bool(np.all(np.abs(x.real) <= 1 + DOMAIN_SLACK))

    def __repr__(self):
        if self.kind == ULTRASPHERICAL:
            return f"Ultraspherical({self.order})"
        return "Taylor()" if self.kind == TAYLOR else "Chebyshev()"


def Taylor() -> Space:
    return Space(TAYLOR)


def Chebyshev() -> Space:
    return Space(CHEBYSHEV)


def Ultraspherical(order: int) -> Space:
    return Space(ULTRASPHERICAL, int(order))


def _recurrence(space: Space):
    """Return ``(p1, alpha, beta)`` so that p_{k+1} = alpha(k) x p_k - beta(k) p_{k-1}.

    ``p1`` is the multiplier of ``x`` in the degree-one basis element.
    """
    if space.kind == CHEBYSHEV:
        return 1.0, (lambda k: 2.0), (lambda k: 1.0)
    lam = space.order
    return (
        2.0 * lam,
        lambda k: 2.0 * (k + lam) / (k + 1),
        lambda k: (k + 2.0 * lam - 1) / (k + 1),
    )


def basis_values(space: Space, x, n: int) -> np.ndarray:
    """Values of the first ``n`` basis elements at ``x``.

    The result has shape ``np.shape(x) + (n,)``.  No domain check is made,
    so this also serves functionals placed on the boundary.
    """
    x = np.asarray(x)
    dtype = np.result_type(x.dtype, float)
    out = np.zeros(x.shape + (n,), dtype=dtype)
    if n == 0:
        return out
    if space.kind == TAYLOR:
        out[..., 0] = 1
        for k in range(1, n):
            out[..., k] = out[..., k - 1] * x
        return out
    p1, alpha, beta = _recurrence(space)
    out[..., 0] = 1
    if n > 1:
        out[..., 1] = p1 * x
    for k in range(1, n - 1):
        out[..., k + 1] = alpha(k) * x * out[..., k] - beta(k) * out[..., k - 1]
    return out


def _clenshaw(space: Space, c: np.ndarray, x):
    p1, alpha, beta = _recurrence(space)
    n = len(c)
    if n == 0:
        return np.zeros_like(x, dtype=np.result_type(x, float))
    if n == 1:
        return c[0] + 0 * x
    b1 = np.zeros_like(x, dtype=np.result_type(x, c, float))
    b2 = np.zeros_like(b1)
    for k in range(n - 1, 0, -1):
        b1, b2 = c[k] + alpha(k) * x * b1 - beta(k + 1) * b2, b1
    # b1 = b_1, b2 = b_2
    return c[0] + p1 * x * b1 - beta(1) * b2


def evaluate(f: "Fun", x):
    """Evaluate ``f`` at ``x`` (scalar or array).

    Horner's rule for Taylor series, Clenshaw's recurrence otherwise.
    """
    x = np.asarray(x)
    if not f.space.contains(x):
        raise DomainError(f"point outside domain {f.space.domain} of {f.space!r}")
    c = f.coefficients
    if f.space.kind == TAYLOR:
        out = np.zeros_like(x, dtype=np.result_type(x, c, float))
        for ck in c[::-1]:
            out = out * x + ck
        val = out
    else:
        if np.iscomplexobj(x):
            x = x.real
        val = _clenshaw(f.space, c, x)
    return val[()] if np.ndim(val) == 0 else val


def chop(coefficients, tol: float = CHOP_TOL) -> np.ndarray:
    """Drop trailing coefficients with magnitude <= tol * max magnitude."""
    c = np.asarray(coefficients)
    if c.size == 0:
        return c
    scale = np.max(np.abs(c))
    if scale == 0:
        return c[:0]
    keep = np.nonzero(np.abs(c) > tol * scale)[0]
    return c[: keep[-1] + 1]


class Fun:
    """An immutable function: a space plus a finite coefficient vector.

    Trailing coefficients below ``tol`` relative to the largest magnitude are
    dropped on construction; ``tol=0`` only strips exact zeros.
    """

    __slots__ = ("_space", "_coefficients")

    def __init__(self, space: Space, coefficients=(), tol: float = CHOP_TOL):
        c = np.array(coefficients, dtype=np.result_type(np.asarray(coefficients), float))
        if c.ndim != 1:
            raise ValueError("coefficients must be a vector")
        c = chop(c, tol).copy()
        c.flags.writeable = False
        self._space = space
        self._coefficients = c

    @property
    def space(self) -> Space:
        return self._space

    @property
    def coefficients(self) -> np.ndarray:
        return self._coefficients

    def __len__(self):
        return len(self._coefficients)

    def __call__(self, x):
        return evaluate(self, x)

    def _binary(self, other, sign):
        if not isinstance(other, Fun):
            return NotImplemented
        if other.space != self.space:
            raise ValueError(f"cannot combine {self.space!r} and {other.space!r}")
        n = max(len(self), len(other))
        a = np.zeros(n, dtype=np.result_type(self.coefficients, other.coefficients))
        a[: len(self)] += self.coefficients
        a[: len(other)] += sign * other.coefficients
        return Fun(self.space, a, tol=0)

    def __add__(self, other):
        return self._binary(other, 1)

    def __sub__(self, other):
        return self._binary(other, -1)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return Fun(self.space, c * self.coefficients, tol=0)

    __rmul__ = __mul__

    def __neg__(self):
        return Fun(self.space, -self.coefficients, tol=0)

    def __repr__(self):
        return f"Fun({self.space!r}, {np.array2string(self.coefficients, threshold=8)})"
