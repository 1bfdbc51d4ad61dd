"""Truncated multivariate Taylor arithmetic.

A ``Jet`` carries the Taylor coefficients (not derivatives) of a function of
``nvar`` auxiliary variables up to total degree ``order``, batched over
arbitrary trailing array axes.  Expressions written with the helpers in this
module (``exp``, ``log``, ``where`` ...) accept either plain arrays or jets.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def _compositions(deg, nvar):
    if nvar == 1:
        return [(deg,)]
    out = []
    for first in range(deg, -1, -1):
        for rest in _compositions(deg - first, nvar - 1):
            out.append((first,) + rest)
    return out


@lru_cache(maxsize=None)
def monomials(nvar, order):
    """Exponent tuples of total degree <= order, graded by degree."""
    out = []
    for deg in range(order + 1):
        out.extend(_compositions(deg, nvar))
    return tuple(out)


@lru_cache(maxsize=None)
def _tables(nvar, order):
    mons = monomials(nvar, order)
    index = {m: i for i, m in enumerate(mons)}
    trip = []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            s = tuple(x + y for x, y in zip(a, b))
            if sum(s) <= order:
                trip.append((index[s], i, j))
    trip.sort()
    k = np.array([t[0] for t in trip])
    left = np.array([t[1] for t in trip])
    right = np.array([t[2] for t in trip])
    starts = np.searchsorted(k, np.arange(len(mons)))
    degree = np.array([sum(m) for m in mons])
    return index, left, right, starts, degree


class Jet:
    """Truncated Taylor polynomial with coefficient array ``c`` of shape (M, *batch)."""

    __array_priority__ = 1000

    def __init__(self, c, nvar, order):
        self.c = np.asarray(c, dtype=float)
        self.nvar = nvar
        self.order = order

    @classmethod
    def constant(cls, value, nvar=1, order=1):
        value = np.asarray(value, dtype=float)
        c = np.zeros((len(monomials(nvar, order)),) + value.shape)
        c[0] = value
        return cls(c, nvar, order)

    @classmethod
    def variable(cls, value, k=0, nvar=1, order=1, seed=1.0):
        """``value + seed * e_k``: the k-th auxiliary variable scaled by ``seed``."""
        value = np.asarray(value, dtype=float)
        seed = np.asarray(seed, dtype=float)
        shape = np.broadcast_shapes(value.shape, seed.shape)
        c = np.zeros((len(monomials(nvar, order)),) + shape)
        c[0] = value
        if order >= 1:
            unit = tuple(1 if i == k else 0 for i in range(nvar))
            c[_tables(nvar, order)[0][unit]] = seed
        return cls(c, nvar, order)

    @property
    def value(self):
        return self.c[0]

    @property
    def shape(self):
        return self.c.shape[1:]

    def coeff(self, alpha):
        return self.c[_tables(self.nvar, self.order)[0][tuple(alpha)]]

    def _like(self, c):
        return Jet(c, self.nvar, self.order)

    def _check(self, other):
        if other.nvar != self.nvar or other.order != self.order:
            raise ValueError("jets with different variables or orders")

    def _shift(self, other):
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.empty((self.c.shape[0],) + shape)
        c[...] = self.c.reshape(self.c.shape[:1] + (1,) * (len(shape) - len(self.shape)) + self.shape)
        c[0] = c[0] + other
        return self._like(c)

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return self._like(_bsum(self.c, other.c))
        return self._shift(other)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            _, left, right, starts, _ = _tables(self.nvar, self.order)
            a, b = _align(self.c, other.c)
            prod = a[left] * b[right]
            return self._like(np.add.reduceat(prod, starts, axis=0))
        other = np.asarray(other, dtype=float)
        return self._like(self.c * other[None, ...])

    __rmul__ = __mul__

    def reciprocal(self):
        c0 = self.c[0]
        inv = 1.0 / c0
        return self._compose([(-1.0) ** k * inv ** (k + 1) for k in range(self.order + 1)])

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            return _ipow(self, int(p))
        p = float(p)
        if p.is_integer() and p >= 0:
            return _ipow(self, int(p))
        c0 = self.c[0]
        coefs = []
        binom = 1.0
        for k in range(self.order + 1):
            coefs.append(binom * c0 ** (p - k))
            binom *= (p - k) / (k + 1)
        return self._compose(coefs)

    def exp(self):
        e = np.exp(self.c[0])
        return self._compose([e / math.factorial(k) for k in range(self.order + 1)])

    def log(self):
        c0 = self.c[0]
        coefs = [np.log(c0)]
        for k in range(1, self.order + 1):
            coefs.append((-1.0) ** (k + 1) / k / c0 ** k)
        return self._compose(coefs)

    def sqrt(self):
        return self ** 0.5

    def _compose(self, coefs):
        """Evaluate sum_k coefs[k] * (self - c0)^k by Horner's rule."""
        delta = self._like(self.c.copy())
        delta.c[0] = 0.0
        acc = Jet.constant(coefs[-1], self.nvar, self.order)
        for k in range(len(coefs) - 2, -1, -1):
            acc = acc * delta + coefs[k]
        return acc

    def __repr__(self):
        return f"Jet(nvar={self.nvar}, order={self.order}, shape={self.shape})"


def _align(a, b):
    na, nb = a.ndim, b.ndim
    if na < nb:
        a = a.reshape(a.shape[:1] + (1,) * (nb - na) + a.shape[1:])
    elif nb < na:
        b = b.reshape(b.shape[:1] + (1,) * (na - nb) + b.shape[1:])
    return a, b


def _bsum(a, b):
    a, b = _align(a, b)
    return a + b


def _ipow(x, p):
    if p == 0:
        return Jet.constant(np.ones(x.shape), x.nvar, x.order)
    result = None
    base = x
    while p:
        if p & 1:
            result = base if result is None else result * base
        p >>= 1
        if p:
            base = base * base
    return result


def is_jet(x):
    return isinstance(x, Jet)


def value(x):
    return x.c[0] if isinstance(x, Jet) else np.asarray(x)


def exp(x):
    return x.exp() if isinstance(x, Jet) else np.exp(x)


def log(x):
    return x.log() if isinstance(x, Jet) else np.log(x)


def sqrt(x):
    return x.sqrt() if isinstance(x, Jet) else np.sqrt(x)


def power(x, p):
    if isinstance(x, Jet):
        return x ** p
    if isinstance(p, (int, np.integer)) and p >= 0:
        return x ** int(p)
    return np.power(x, float(p))


def where(cond, a, b):
    """Select between jets or arrays using a condition on the batch axes."""
    if not (isinstance(a, Jet) or isinstance(b, Jet)):
        return np.where(cond, a, b)
    ref = a if isinstance(a, Jet) else b
    if not isinstance(a, Jet):
        a = Jet.constant(a, ref.nvar, ref.order)
    if not isinstance(b, Jet):
        b = Jet.constant(b, ref.nvar, ref.order)
    ca, cb = _align(a.c, b.c)
    cond = np.asarray(cond)
    return Jet(np.where(cond[None, ...], ca, cb), ref.nvar, ref.order)


def total(terms):
    """Sum a sequence of jets or arrays."""
    it = iter(terms)
    acc = next(it)
    for t in it:
        acc = acc + t
    return acc


def taylor_line(base, direction, order):
    """Jets ``base_k + tau * direction_k`` for each component (univariate in tau)."""
    return [Jet.variable(b, 0, 1, order, seed=d) for b, d in zip(base, direction)]


def derivative_factor(alpha):
    return math.prod(math.factorial(a) for a in alpha)
