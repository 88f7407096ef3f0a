"""Tagged forward-mode dual numbers.

A :class:`Dual` holds ``re + du * e_tag`` with ``e_tag**2 = 0``.  Components
may be floats, numpy arrays (vectorised evaluation) or other duals with a
*smaller* tag, so nesting gives higher derivatives.  Every call to
:func:`directional` allocates a fresh, strictly larger tag, which keeps
nested derivatives from confusing their perturbations.

Scalar functions in this module (``sqrt``, ``exp``, ``arctanh`` ...) accept
floats, arrays and duals alike; model code written with them can be
evaluated on any of the three.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

_tags = itertools.count(1)


class Dual:
    __slots__ = ("tag", "re", "du")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, tag, re, du):
        self.tag = tag
        self.re = re
        self.du = du

    def __repr__(self):
        return f"Dual(tag={self.tag}, re={self.re!r}, du={self.du!r})"

    # Arithmetic.  ``other`` is "lower" when it is not a dual of this tag or
    # a larger one; it is then a constant with respect to ``self.tag``.
    def _lift(self, other):
        if isinstance(other, Dual):
            if other.tag == self.tag:
                return other.re, other.du, self.tag
            if other.tag > self.tag:
                return None
        return other, 0.0, self.tag

    def __add__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__radd__(self)
        ore, odu, tag = lifted
        return Dual(tag, self.re + ore, self.du + odu)

    __radd__ = __add__

    def __sub__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__rsub__(self)
        ore, odu, tag = lifted
        return Dual(tag, self.re - ore, self.du - odu)

    def __rsub__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__sub__(self)
        ore, odu, tag = lifted
        return Dual(tag, ore - self.re, odu - self.du)

    def __mul__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__rmul__(self)
        ore, odu, tag = lifted
        if isinstance(odu, float) and odu == 0.0:
            return Dual(tag, self.re * ore, self.du * ore)
        return Dual(tag, self.re * ore, self.du * ore + self.re * odu)

    __rmul__ = __mul__

    def __truediv__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__rtruediv__(self)
        ore, odu, tag = lifted
        if isinstance(odu, float) and odu == 0.0:
            return Dual(tag, self.re / ore, self.du / ore)
        q = self.re / ore
        return Dual(tag, q, (self.du - q * odu) / ore)

    def __rtruediv__(self, other):
        lifted = self._lift(other)
        if lifted is None:
            return other.__truediv__(self)
        ore, odu, tag = lifted
        q = ore / self.re
        return Dual(tag, q, (odu - q * self.du) / self.re)

    def __neg__(self):
        return Dual(self.tag, -self.re, -self.du)

    def __pos__(self):
        return self

    def __pow__(self, k):
        if isinstance(k, Dual):
            return exp(k * log(self))
        if k == 2:
            return self * self
        if k == 1:
            return self
        if k == 0:
            return Dual(self.tag, self.re ** 0, 0.0)
        p = self.re ** (k - 1)
        return Dual(self.tag, p * self.re, k * p * self.du)

    def __rpow__(self, base):
        return exp(self * math.log(base))

    # Comparisons act on the primal value.
    def __lt__(self, other):
        return primal(self) < primal(other)

    def __le__(self, other):
        return primal(self) <= primal(other)

    def __gt__(self, other):
        return primal(self) > primal(other)

    def __ge__(self, other):
        return primal(self) >= primal(other)

    def __float__(self):
        return float(primal(self))


def primal(x):
    """Strip every dual layer and return the underlying float/array."""
    while isinstance(x, Dual):
        x = x.re
    return x


def _unary(x, f, df):
    """Apply ``f`` with derivative ``df`` through any number of dual layers."""
    if isinstance(x, Dual):
        return Dual(x.tag, _unary(x.re, f, df), df(x.re) * x.du)
    return f(x)


def sqrt(x):
    if isinstance(x, Dual):
        s = sqrt(x.re)
        return Dual(x.tag, s, x.du / (2.0 * s))
    return np.sqrt(x)


def exp(x):
    if isinstance(x, Dual):
        e = exp(x.re)
        return Dual(x.tag, e, e * x.du)
    return np.exp(x)


def log(x):
    return _unary(x, np.log, lambda u: 1.0 / u)


def sinh(x):
    return _unary(x, np.sinh, cosh)


def cosh(x):
    return _unary(x, np.cosh, sinh)


def tanh(x):
    return _unary(x, np.tanh, lambda u: 1.0 / cosh(u) ** 2)


def arctanh(x):
    return _unary(x, np.arctanh, lambda u: 1.0 / (1.0 - u * u))


def coth(x):
    return _unary(x, lambda u: 1.0 / np.tanh(u), lambda u: -1.0 / sinh(u) ** 2)


def norm(v):
    """Euclidean norm with a zero tangent at the origin.

    ``|x|`` is not differentiable at 0; the family metrics only ever use it
    in products with ``x`` itself, for which the zero subgradient yields the
    correct derivative.
    """
    sq = 0.0
    for c in v:
        sq = sq + c * c
    return _safe_sqrt(sq)


def _safe_sqrt(x):
    if isinstance(x, Dual):
        s = _safe_sqrt(x.re)
        ps = primal(s)
        if np.ndim(ps) == 0:
            if ps == 0.0:
                return Dual(x.tag, s, 0.0 * x.du)
            return Dual(x.tag, s, x.du / (2.0 * s))
        return Dual(x.tag, s, x.du / (2.0 * _where_zero(s, ps)))
    return np.sqrt(x)


def _where_zero(s, ps):
    # replace exact zeros by +inf so the tangent becomes 0 there
    if isinstance(s, Dual):
        return Dual(s.tag, _where_zero(s.re, ps), s.du)
    return np.where(ps == 0.0, np.inf, s)


def dot(u, v):
    total = 0.0
    for a, b in zip(u, v):
        total = total + a * b
    return total


def quad_form(a, y):
    """``y^T a y`` for a nested-sequence matrix ``a``."""
    n = len(y)
    total = 0.0
    for i in range(n):
        row = 0.0
        for j in range(n):
            row = row + a[i][j] * y[j]
        total = total + y[i] * row
    return total


def matvec(a, y):
    n = len(y)
    out = []
    for i in range(n):
        row = 0.0
        for j in range(n):
            row = row + a[i][j] * y[j]
        out.append(row)
    return out


# ---------------------------------------------------------------------------
# derivatives


def _tangent(value, tag):
    if isinstance(value, Dual) and value.tag == tag:
        return value.du
    return 0.0 * primal(value) if np.ndim(primal(value)) else 0.0


def _value(value, tag):
    if isinstance(value, Dual) and value.tag == tag:
        return value.re
    return value


def _strip(result, tag, part):
    if isinstance(result, (list, tuple)):
        return [_strip(r, tag, part) for r in result]
    if isinstance(result, np.ndarray) and result.dtype == object:
        return [_strip(r, tag, part) for r in result]
    return part(result, tag)


def directional(f, x, v):
    """``d/ds f(x + s v)`` at ``s = 0``.

    ``x`` and ``v`` are sequences of generic scalars.  ``f`` may return a
    scalar or a (nested) list of scalars; the result has the same shape.
    """
    tag = next(_tags)
    seeded = [Dual(tag, xi, vi) for xi, vi in zip(x, v)]
    return _strip(f(seeded), tag, _tangent)


def value_and_directional(f, x, v):
    tag = next(_tags)
    seeded = [Dual(tag, xi, vi) for xi, vi in zip(x, v)]
    out = f(seeded)
    return _strip(out, tag, _value), _strip(out, tag, _tangent)


def _basis(n, i, like=0.0):
    e = [0.0 * like for _ in range(n)] if np.ndim(like) else [0.0] * n
    e[i] = e[i] + 1.0
    return e


def gradient(f, x):
    """Gradient of a scalar function by ``n`` forward passes."""
    n = len(x)
    like = primal(x[0])
    return [directional(f, x, _basis(n, i, like)) for i in range(n)]


def jacobian(f, x):
    """``J[i][k] = d f_i / d x_k`` for a vector-valued ``f``."""
    n = len(x)
    like = primal(x[0])
    cols = [directional(f, x, _basis(n, k, like)) for k in range(n)]
    m = len(cols[0])
    return [[cols[k][i] for k in range(n)] for i in range(m)]


def hessian(f, x):
    """Symmetric Hessian of a scalar function via nested duals."""
    n = len(x)
    like = primal(x[0])
    h = [[None] * n for _ in range(n)]
    for i in range(n):
        ei = _basis(n, i, like)
        for j in range(i, n):
            ej = _basis(n, j, like)
            hij = directional(lambda z: directional(f, z, ej), x, ei)
            h[i][j] = hij
            h[j][i] = hij
    return h


def derivative(f, t):
    """Scalar derivative ``f'(t)``."""
    return directional(lambda z: f(z[0]), [t], [1.0])


# ---------------------------------------------------------------------------
# linear algebra on generic scalars (no pivoting; used for SPD matrices)


def lu_solve(a, b):
    """Solve ``a x = b`` by Gaussian elimination without pivoting.

    ``a`` is n x n, ``b`` is a length-n sequence or n x m nested list.
    Entries may be floats, arrays or duals; suitable for the symmetric
    positive-definite matrices that occur here.
    """
    n = len(a)
    m = [list(row) for row in a]
    vector = not isinstance(b[0], (list, tuple))
    rhs = [[bi] for bi in b] if vector else [list(row) for row in b]
    for k in range(n):
        piv = m[k][k]
        for i in range(k + 1, n):
            f = m[i][k] / piv
            for j in range(k + 1, n):
                m[i][j] = m[i][j] - f * m[k][j]
            rhs[i] = [ri - f * rk for ri, rk in zip(rhs[i], rhs[k])]
    out = [None] * n
    for i in reversed(range(n)):
        acc = rhs[i]
        for j in range(i + 1, n):
            acc = [ai - m[i][j] * oj for ai, oj in zip(acc, out[j])]
        out[i] = [ai / m[i][i] for ai in acc]
    return [o[0] for o in out] if vector else out


def det(a):
    n = len(a)
    m = [list(row) for row in a]
    d = 1.0
    for k in range(n):
        piv = m[k][k]
        d = d * piv
        for i in range(k + 1, n):
            f = m[i][k] / piv
            for j in range(k + 1, n):
                m[i][j] = m[i][j] - f * m[k][j]
    return d


def inverse(a):
    n = len(a)
    like = primal(a[0][0])
    eye = [_basis(n, i, like) for i in range(n)]
    cols = lu_solve(a, eye)
    return cols
