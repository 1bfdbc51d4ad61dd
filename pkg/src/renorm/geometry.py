"""Singular sets: points, affine subspaces and configuration-space diagonals.

Coordinates of a configuration of ``n`` points in ``R^d`` are flattened as
``x[i*d + c]``.  Internally functions receive *components*: either an array
of shape ``(N, *batch)`` or a list of ``N`` jets/arrays.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import lsq_linear

from . import jets as J
from .errors import UnsupportedSetError


def as_components(x):
    """Split trailing-axis points ``(..., N)`` into a component array ``(N, ...)``."""
    return np.moveaxis(np.asarray(x, dtype=float), -1, 0)


def _lincomb(matrix, comps, offset=None):
    """Rows of ``matrix @ (comps - offset)`` for arrays or lists of jets."""
    matrix = np.asarray(matrix, dtype=float)
    if offset is None:
        offset = np.zeros(matrix.shape[1])
    if isinstance(comps, np.ndarray):
        shifted = comps - offset.reshape((-1,) + (1,) * (comps.ndim - 1))
        return np.tensordot(matrix, shifted, axes=(1, 0))
    rows = []
    for row in matrix:
        terms = [w * (comps[k] - offset[k]) for k, w in enumerate(row) if w != 0.0]
        rows.append(J.total(terms) if terms else 0.0 * J.value(comps[0]))
    return rows


def _sumsq(vals):
    return J.total(v * v for v in vals)


class SingularSet:
    """Closed set X in R^N with distance and, when available, a transverse split."""

    has_split = False

    @property
    def dim(self):
        raise NotImplementedError

    def sq_distance_components(self, comps):
        raise NotImplementedError

    def distance_components(self, comps):
        return J.sqrt(self.sq_distance_components(comps))

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points in R^{self.dim}, got trailing axis {x.shape[-1]}")
        return np.sqrt(self.sq_distance_components(as_components(x)))

    def transverse_split(self, x):
        raise UnsupportedSetError(f"{type(self).__name__} has no transverse split")

    def split_components(self, comps):
        raise UnsupportedSetError(f"{type(self).__name__} has no transverse split")

    def box_distance(self, lo, hi):
        """Lower bound on the distance from the box [lo, hi] to the set."""
        return 0.0

    def probe_point(self, r):
        """A point at distance exactly ``r`` from the set."""
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


class LinearSet(SingularSet):
    """Affine subspace ``anchor + span(tangent)`` with orthonormal frames."""

    has_split = True

    def __init__(self, anchor, tangent, normal):
        self.anchor = np.asarray(anchor, dtype=float)
        n = self.anchor.size
        self.tangent = np.asarray(tangent, dtype=float).reshape(-1, n)
        self.normal = np.asarray(normal, dtype=float).reshape(-1, n)
        if self.normal.shape[0] == 0:
            raise ValueError("set must have positive codimension")

    @property
    def dim(self):
        return self.anchor.size

    @property
    def codim(self):
        return self.normal.shape[0]

    @property
    def tangent_dim(self):
        return self.tangent.shape[0]

    def normal_coordinates(self, comps):
        return _lincomb(self.normal, comps, self.anchor)

    def tangent_coordinates(self, comps):
        return _lincomb(self.tangent, comps, self.anchor)

    def sq_distance_components(self, comps):
        return _sumsq(self.normal_coordinates(comps))

    def split_components(self, comps):
        """Return (base, normal) components with ``comps = base + normal``."""
        proj = self.normal.T @ self.normal
        h = _lincomb(proj, comps, self.anchor)
        if isinstance(comps, np.ndarray):
            return comps - h, h
        return [c - hk for c, hk in zip(comps, h)], h

    def transverse_split(self, x):
        base, h = self.split_components(as_components(x))
        return np.moveaxis(base, 0, -1), np.moveaxis(h, 0, -1)

    def embed(self, t, h):
        """Point ``anchor + T^T t + N^T h`` from tangent and normal coordinates."""
        t = np.asarray(t, dtype=float)
        h = np.asarray(h, dtype=float)
        out = self.anchor + h @ self.normal
        if self.tangent_dim:
            out = out + t @ self.tangent
        return out

    def box_distance(self, lo, hi):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        res = lsq_linear(self.normal, self.normal @ self.anchor, bounds=(lo, np.maximum(hi, np.nextafter(lo, np.inf))), method="bvls")
        return float(max(0.0, np.linalg.norm(self.normal @ res.x - self.normal @ self.anchor) - 1e-12))

    def box_max_distance(self, lo, hi):
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        return float(self.distance(corners).max())

    def tangent_range(self, lo, hi):
        """Bounds of the tangent coordinates over the box [lo, hi]."""
        t = self.tangent
        shifted_lo = np.asarray(lo) - self.anchor
        shifted_hi = np.asarray(hi) - self.anchor
        a = t * shifted_lo
        b = t * shifted_hi
        return np.minimum(a, b).sum(axis=1), np.maximum(a, b).sum(axis=1)

    def probe_point(self, r):
        return self.anchor + r * self.normal[0]


class Point(LinearSet):
    def __init__(self, coordinates):
        coordinates = np.atleast_1d(np.asarray(coordinates, dtype=float))
        n = coordinates.size
        super().__init__(coordinates, np.zeros((0, n)), np.eye(n))

    def to_json(self):
        return {"variant": "point", "coordinates": self.anchor.tolist()}

    def __repr__(self):
        return f"Point({self.anchor.tolist()})"


class AffineSubspace(LinearSet):
    def __init__(self, basepoint, tangent):
        basepoint = np.asarray(basepoint, dtype=float)
        n = basepoint.size
        tangent = np.asarray(tangent, dtype=float).reshape(-1, n)
        if tangent.shape[0]:
            q, _ = np.linalg.qr(tangent.T)
            tangent = q.T
            normal = null_space(tangent).T
        else:
            normal = np.eye(n)
        super().__init__(basepoint, tangent, normal)

    def to_json(self):
        return {"variant": "affine", "basepoint": self.anchor.tolist(), "tangent": self.tangent.tolist()}

    def __repr__(self):
        return f"AffineSubspace(dim={self.tangent_dim}, ambient={self.dim})"


class SmallDiagonal(LinearSet):
    """All ``n`` points of ``R^d`` coincide."""

    def __init__(self, d, n):
        if n < 2 or d < 1:
            raise ValueError("small diagonal needs n >= 2 and d >= 1")
        self.d, self.n = d, n
        tangent = np.zeros((d, d * n))
        for c in range(d):
            tangent[c, c::d] = 1.0 / np.sqrt(n)
        normal = null_space(tangent).T
        super().__init__(np.zeros(d * n), tangent, normal)

    def to_json(self):
        return {"variant": "small_diagonal", "d": self.d, "n": self.n}

    def __repr__(self):
        return f"SmallDiagonal(d={self.d}, n={self.n})"


def _pair_sq(comps, d, i, j):
    return _sumsq(comps[i * d + c] - comps[j * d + c] for c in range(d))


def _interval_gap(lo1, hi1, lo2, hi2):
    return max(0.0, lo1 - hi2, lo2 - hi1)


class PairwiseDiagonal(SingularSet):
    """Points ``i`` and ``j`` (1-based) coincide."""

    def __init__(self, d, n, i, j):
        if not (1 <= i <= n and 1 <= j <= n and i != j):
            raise ValueError("pair indices must be distinct and in 1..n")
        self.d, self.n, self.i, self.j = d, n, min(i, j), max(i, j)

    @property
    def dim(self):
        return self.d * self.n

    @property
    def codim(self):
        return self.d

    def sq_distance_components(self, comps):
        return 0.5 * _pair_sq(comps, self.d, self.i - 1, self.j - 1)

    def box_distance(self, lo, hi):
        d, a, b = self.d, self.i - 1, self.j - 1
        gaps = [_interval_gap(lo[a * d + c], hi[a * d + c], lo[b * d + c], hi[b * d + c]) for c in range(d)]
        return float(np.sqrt(sum(g * g for g in gaps) / 2.0))

    def probe_point(self, r):
        x = np.zeros(self.dim)
        x[(self.i - 1) * self.d] = r / np.sqrt(2.0)
        x[(self.j - 1) * self.d] = -r / np.sqrt(2.0)
        return x

    def to_json(self):
        return {"variant": "pairwise_diagonal", "d": self.d, "n": self.n, "i": self.i, "j": self.j}

    def __repr__(self):
        return f"PairwiseDiagonal(d={self.d}, n={self.n}, i={self.i}, j={self.j})"


class SetUnion(SingularSet):
    """Finite union of sets in a common ambient space."""

    def __init__(self, members):
        self.members = list(members)
        if not self.members:
            raise ValueError("empty union")
        dims = {m.dim for m in self.members}
        if len(dims) != 1:
            raise ValueError("union members live in different ambient spaces")

    @property
    def dim(self):
        return self.members[0].dim

    @property
    def codim(self):
        return min(m.codim for m in self.members)

    def sq_distance_components(self, comps):
        vals = [m.sq_distance_components(comps) for m in self.members]
        acc = vals[0]
        for v in vals[1:]:
            acc = J.where(J.value(v) < J.value(acc), v, acc)
        return acc

    def box_distance(self, lo, hi):
        return min(m.box_distance(lo, hi) for m in self.members)

    def probe_point(self, r):
        # move away from the first member until the union distance is r
        p = self.members[0].probe_point(r)
        if abs(self.distance(p) - r) > 1e-12 * max(r, 1.0):
            raise UnsupportedSetError("no probe direction for this union")
        return p

    def to_json(self):
        return {"variant": "union", "members": [m.to_json() for m in self.members]}


class BigDiagonal(SetUnion):
    """Some pair of the ``n`` points coincides."""

    def __init__(self, d, n):
        self.d, self.n = d, n
        super().__init__(PairwiseDiagonal(d, n, i, j) for i, j in itertools.combinations(range(1, n + 1), 2))

    def probe_point(self, r):
        # regular spacing along the first axis: nearest pair sits at distance r
        x = np.zeros(self.dim)
        for k in range(self.n):
            x[k * self.d] = k * r * np.sqrt(2.0)
        return x

    def to_json(self):
        return {"variant": "big_diagonal", "d": self.d, "n": self.n}

    def __repr__(self):
        return f"BigDiagonal(d={self.d}, n={self.n})"


def set_from_json(desc):
    kind = desc.get("variant")
    if kind == "point":
        return Point(desc["coordinates"])
    if kind == "affine":
        return AffineSubspace(desc["basepoint"], desc.get("tangent", []))
    if kind == "small_diagonal":
        return SmallDiagonal(int(desc["d"]), int(desc["n"]))
    if kind == "pairwise_diagonal":
        return PairwiseDiagonal(int(desc["d"]), int(desc["n"]), int(desc["i"]), int(desc["j"]))
    if kind == "big_diagonal":
        return BigDiagonal(int(desc["d"]), int(desc["n"]))
    if kind == "union":
        return SetUnion(set_from_json(m) for m in desc["members"])
    raise ValueError(f"unknown set variant {kind!r}")
