"""Compactly supported smooth test functions with exact derivatives."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import jets as J
from .errors import InsufficientOrder, UnsupportedSetError
from .geometry import as_components

DEFAULT_MAX_ORDER = 12
# exp(-1/w) underflows below this threshold; treating it as zero keeps jets finite
_W_MIN = 1.0 / 700.0


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or np.any(hi < lo):
            raise ValueError("box needs lo <= hi of equal shapes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def volume(self):
        return float(np.prod(self.hi - self.lo))

    def enlarged(self, r):
        return Box(self.lo - r, self.hi + r)

    def union(self, other):
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other):
        lo = np.maximum(self.lo, other.lo)
        hi = np.maximum(lo, np.minimum(self.hi, other.hi))
        return Box(lo, hi)

    def contains(self, x):
        x = np.asarray(x)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def tensor(self, other):
        return Box(np.concatenate([self.lo, other.lo]), np.concatenate([self.hi, other.hi]))

    def to_json(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


def bump_profile(s):
    """exp(-1/(1-s)) for s < 1 and zero otherwise; ``s`` may be a jet."""
    w = 1.0 - s
    ok = J.value(w) > _W_MIN
    safe = J.where(ok, w, 1.0)
    return J.where(ok, J.exp(-1.0 / safe), 0.0)


class TestFunction:
    """Smooth function on R^N with compact support inside ``support``.

    ``expr`` maps a list/array of components to values and must accept jets.
    """

    __test__ = False  # keep pytest from collecting this class

    def __init__(self, dim, expr, support, max_order=DEFAULT_MAX_ORDER, descriptor=None):
        self.dim = int(dim)
        self.expr = expr
        self.support = support
        self.max_order = int(max_order)
        self.descriptor = descriptor
        if support.dim != self.dim:
            raise ValueError("support box dimension does not match")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points in R^{self.dim}")
        return np.asarray(self.expr(as_components(x)), dtype=float) * np.ones(x.shape[:-1])

    def components(self, comps):
        return self.expr(comps)

    def _require(self, order):
        if order > self.max_order:
            raise InsufficientOrder(f"order {order} exceeds available {self.max_order}")

    def eval_derivative(self, alpha, x):
        """Partial derivative ``d^alpha`` at points ``x`` of shape (..., N)."""
        alpha = tuple(int(a) for a in alpha)
        if len(alpha) != self.dim:
            raise ValueError("multi-index length must equal the dimension")
        order = sum(alpha)
        self._require(order)
        comps = as_components(x)
        if order == 0:
            return self(x)
        active = [k for k, a in enumerate(alpha) if a]
        jv = [c for c in comps]
        for slot, k in enumerate(active):
            jv[k] = J.Jet.variable(comps[k], slot, len(active), order)
        sub = tuple(alpha[k] for k in active)
        out = _as_jet(self.expr(jv), len(active), order, comps.shape[1:])
        return out.coeff(sub) * J.derivative_factor(sub)

    def derivatives(self, x, m):
        """All partials of order <= m at ``x``: dict alpha -> values."""
        self._require(m)
        comps = as_components(x)
        jv = [J.Jet.variable(comps[k], k, self.dim, m) for k in range(self.dim)]
        out = _as_jet(self.expr(jv), self.dim, m, comps.shape[1:])
        return {a: out.coeff(a) * J.derivative_factor(a) for a in J.monomials(self.dim, m)}

    def directional_taylor(self, base, direction, order):
        """Coefficients c_k of phi(base + tau*direction) = sum_k c_k tau^k, shape (order+1, ...)."""
        self._require(order)
        base = as_components(base)
        direction = as_components(direction)
        line = J.taylor_line(base, direction, order)
        out = _as_jet(self.expr(line), 1, order, np.broadcast_shapes(base.shape[1:], direction.shape[1:]))
        return out.c

    # algebra ---------------------------------------------------------------
    def tensor(self, other):
        n = self.dim
        f, g = self.expr, other.expr
        return TestFunction(
            n + other.dim,
            lambda c: f(c[:n]) * g(c[n:]),
            self.support.tensor(other.support),
            min(self.max_order, other.max_order),
            {"type": "tensor", "factors": [self.descriptor, other.descriptor]},
        )

    def __mul__(self, other):
        if isinstance(other, TestFunction):
            _same_dim(self, other)
            f, g = self.expr, other.expr
            return TestFunction(
                self.dim,
                lambda c: f(c) * g(c),
                self.support.intersect(other.support),
                min(self.max_order, other.max_order),
                {"type": "product", "factors": [self.descriptor, other.descriptor]},
            )
        return self.scaled(float(other))

    __rmul__ = __mul__

    def scaled(self, factor):
        f = self.expr
        return TestFunction(self.dim, lambda c: factor * f(c), self.support, self.max_order,
                            {"type": "scaled", "factor": factor, "of": self.descriptor})

    def __add__(self, other):
        _same_dim(self, other)
        f, g = self.expr, other.expr
        return TestFunction(
            self.dim,
            lambda c: f(c) + g(c),
            self.support.union(other.support),
            min(self.max_order, other.max_order),
            {"type": "sum", "terms": [self.descriptor, other.descriptor]},
        )

    def with_support(self, box):
        """Same function declared on a larger bounding box."""
        return TestFunction(self.dim, self.expr, box, self.max_order,
                            {"type": "rebox", "of": self.descriptor, "box": box.to_json()})

    def to_json(self):
        if self.descriptor is None:
            raise ValueError("test function has no serializable descriptor")
        return self.descriptor


def _same_dim(a, b):
    if a.dim != b.dim:
        raise ValueError("test functions live in different dimensions")


def _as_jet(val, nvar, order, shape):
    if isinstance(val, J.Jet):
        return val
    return J.Jet.constant(np.broadcast_to(np.asarray(val, dtype=float), shape), nvar, order)


def standard_bump(center, radius, max_order=DEFAULT_MAX_ORDER):
    """exp(-1/(1-|u|^2)) with u = (x - center)/radius, supported in the ball."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    radius = float(radius)
    if radius <= 0:
        raise ValueError("radius must be positive")

    def expr(comps):
        s = J.total(((comps[k] - center[k]) / radius) ** 2 for k in range(center.size))
        return bump_profile(s)

    return TestFunction(center.size, expr, Box(center - radius, center + radius), max_order,
                        {"type": "bump", "center": center.tolist(), "radius": radius})


def tensor_product(*factors):
    out = factors[0]
    for f in factors[1:]:
        out = out.tensor(f)
    return out


def polynomial(dim, coefficients, support_fn):
    """Polynomial sum c_alpha x^alpha times a test function (keeps compact support)."""
    coefficients = {tuple(a): float(c) for a, c in coefficients.items()}
    inner = support_fn.expr

    def expr(comps):
        terms = []
        for alpha, c in coefficients.items():
            mono = c
            for k, a in enumerate(alpha):
                if a:
                    mono = mono * comps[k] ** a
            terms.append(mono * inner(comps))
        return J.total(terms)

    return TestFunction(dim, expr, support_fn.support, support_fn.max_order,
                        {"type": "polynomial", "coefficients": [[list(a), c] for a, c in coefficients.items()],
                         "of": support_fn.descriptor})


def with_vanishing_jets(phi, singular_set, m):
    """Multiply by |h|^(2k), 2k >= m+1, so all derivatives of order <= m vanish on the set."""
    if not singular_set.has_split:
        raise UnsupportedSetError("vanishing-jet construction needs a transverse split")
    k = math.ceil((m + 1) / 2)
    inner = phi.expr

    def expr(comps):
        return singular_set.sq_distance_components(comps) ** k * inner(comps)

    return TestFunction(phi.dim, expr, phi.support, phi.max_order,
                        {"type": "vanishing_jets", "of": phi.descriptor, "set": singular_set.to_json(), "m": m})


def lattice(box, level):
    """Points of 2^-level Z^N inside ``box`` as an array (P, N)."""
    h = 2.0 ** (-level)
    axes = []
    for lo, hi in zip(box.lo, box.hi):
        ks = np.arange(math.ceil(lo / h - 1e-9), math.floor(hi / h + 1e-9) + 1)
        if ks.size == 0:
            return np.zeros((0, box.dim))
        axes.append(ks * h)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1)


def seminorm_value(phi, m, region, grid_density=6, chunk=20000):
    """max_{|alpha|<=m} sup_K |d^alpha phi| sampled on the dyadic lattice of level ``grid_density``."""
    pts = lattice(region, grid_density)
    best = 0.0
    for start in range(0, len(pts), chunk):
        block = pts[start:start + chunk]
        ders = phi.derivatives(block, m)
        for vals in ders.values():
            if np.size(vals):
                best = max(best, float(np.max(np.abs(vals))))
    return best


@dataclass(frozen=True)
class Seminorm:
    order: int
    region: Box
    grid_density: int = 6

    def __call__(self, phi):
        return seminorm_value(phi, self.order, self.region, self.grid_density)


def from_json(desc):
    kind = desc.get("type")
    max_order = int(desc.get("max_order", DEFAULT_MAX_ORDER))
    if kind == "bump":
        return standard_bump(desc["center"], desc["radius"], max_order)
    if kind == "tensor":
        return tensor_product(*(from_json(f) for f in desc["factors"]))
    if kind == "product":
        fs = [from_json(f) for f in desc["factors"]]
        out = fs[0]
        for f in fs[1:]:
            out = out * f
        return out
    if kind == "sum":
        ts = [from_json(t) for t in desc["terms"]]
        out = ts[0]
        for t in ts[1:]:
            out = out + t
        return out
    if kind == "scaled":
        return from_json(desc["of"]).scaled(float(desc["factor"]))
    if kind == "polynomial":
        inner = from_json(desc["of"])
        return polynomial(inner.dim, {tuple(a): c for a, c in desc["coefficients"]}, inner)
    if kind == "vanishing_jets":
        from .geometry import set_from_json
        return with_vanishing_jets(from_json(desc["of"]), set_from_json(desc["set"]), int(desc["m"]))
    if kind == "rebox":
        b = desc["box"]
        return from_json(desc["of"]).with_support(Box(b["lo"], b["hi"]))
    raise ValueError(f"unknown test function type {kind!r}")


def grid_points(box, per_axis):
    """Tensor grid (P, N) with ``per_axis`` points per axis, used for sampling checks."""
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lo, box.hi)]
    return np.array(list(itertools.product(*axes)))
