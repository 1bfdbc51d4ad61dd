"""Singular kernels off a closed set, their products and Feynman amplitudes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import jets as J
from .geometry import (BigDiagonal, Point, SetUnion, as_components, set_from_json)

LOG_MARGIN = 0.1


class SingularKernel:
    """Function on R^N smooth off ``set``; ``expr`` acts on components and accepts jets.

    ``growth`` is the pointwise exponent s in |t(x)| <= C(1 + d(x, X)^-s);
    ``log_flag`` records extra logarithmic factors.
    """

    def __init__(self, dim, singular_set, expr, growth, log_flag=False, descriptor=None):
        self.dim = int(dim)
        self.set = singular_set
        self.expr = expr
        self.growth = float(growth)
        self.log_flag = bool(log_flag)
        self.descriptor = descriptor
        if singular_set is not None and singular_set.dim != self.dim:
            raise ValueError("kernel and set live in different dimensions")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise ValueError(f"expected points in R^{self.dim}")
        return np.asarray(self.expr(as_components(x)), dtype=float) * np.ones(x.shape[:-1])

    def components(self, comps):
        return self.expr(comps)

    @property
    def effective_growth(self):
        """Growth used in convergence bounds: p plus a margin when logs are present."""
        return self.growth + (LOG_MARGIN if self.log_flag else 0.0)

    def __mul__(self, other):
        return multiply(self, other)

    def to_json(self):
        if self.descriptor is None:
            raise ValueError("kernel has no serializable descriptor")
        return self.descriptor


def power_log_kernel(singular_set, p, q=0, half_line=False, coefficient=1.0):
    """coefficient * d(x, X)^-p * (log d(x, X))^q, optionally restricted to x > X in R^1."""
    p, q, coefficient = float(p), int(q), float(coefficient)
    if q < 0:
        raise ValueError("log power must be nonnegative")
    if half_line and not (isinstance(singular_set, Point) and singular_set.dim == 1):
        raise ValueError("half-line kernels need a point in R^1")
    anchor = singular_set.anchor[0] if half_line else 0.0

    def expr(comps):
        d = singular_set.distance_components(comps)
        val = coefficient * J.power(d, -p) if p else coefficient + 0.0 * d
        if q:
            val = val * J.log(d) ** q
        if half_line:
            val = J.where(J.value(comps[0]) > anchor, val, 0.0)
        return val

    desc = {"type": "power_log", "p": p, "q": q, "half_line": half_line, "coefficient": coefficient,
            "set": singular_set.to_json()}
    return SingularKernel(singular_set.dim, singular_set, expr, max(p, 0.0), q > 0, desc)


def constant_kernel(singular_set, value=1.0):
    value = float(value)

    def expr(comps):
        return value + 0.0 * J.value(comps[0])

    return SingularKernel(singular_set.dim, singular_set, expr, 0.0, False,
                          {"type": "constant", "value": value, "set": singular_set.to_json()})


def _merge_sets(a, b):
    if a is b or (a.to_json() == b.to_json()):
        return a
    members = []
    for s in (a, b):
        members.extend(s.members if isinstance(s, SetUnion) else [s])
    return SetUnion(members)


def multiply(f, g):
    """Pointwise product; the set is the union and growth exponents add."""
    if f.dim != g.dim:
        raise ValueError("kernels live in different dimensions")
    fe, ge = f.expr, g.expr
    desc = None
    if f.descriptor is not None and g.descriptor is not None:
        desc = {"type": "product", "factors": [f.descriptor, g.descriptor]}
    return SingularKernel(f.dim, _merge_sets(f.set, g.set), lambda c: fe(c) * ge(c),
                          f.growth + g.growth, f.log_flag or g.log_flag, desc)


def pair_factor(comps, d, i, j, power, log_power=0):
    """|x_i - x_j|^-power * (log|x_i - x_j|)^log_power for 0-based i, j."""
    sq = J.total((comps[i * d + c] - comps[j * d + c]) ** 2 for c in range(d))
    val = J.power(sq, -0.5 * power) if power else 1.0 + 0.0 * J.value(sq)
    if log_power:
        val = val * (0.5 * J.log(sq)) ** log_power
    return val


@dataclass(frozen=True)
class FeynmanGraph:
    """Multigraph on vertices 1..n with propagator |x|^-p (log|x|)^q per edge."""

    d: int
    n: int
    edges: tuple  # ((i, j, multiplicity), ...) with 1-based i < j
    p: float = 1.0
    q: int = 0

    def __post_init__(self):
        canon = {}
        for e in self.edges:
            i, j, k = int(e[0]), int(e[1]), int(e[2]) if len(e) > 2 else 1
            if not (1 <= i <= self.n and 1 <= j <= self.n and i != j) or k < 0:
                raise ValueError(f"bad edge {e}")
            key = (min(i, j), max(i, j))
            canon[key] = canon.get(key, 0) + k
        object.__setattr__(self, "edges", tuple(sorted((i, j, k) for (i, j), k in canon.items() if k)))

    def multiplicity(self, i, j):
        a, b = min(i, j), max(i, j)
        for e in self.edges:
            if e[0] == a and e[1] == b:
                return e[2]
        return 0

    @property
    def total_multiplicity(self):
        return sum(e[2] for e in self.edges)

    def growth(self, vertices=None):
        vs = set(range(1, self.n + 1) if vertices is None else vertices)
        return self.p * sum(k for i, j, k in self.edges if i in vs and j in vs)

    def relabeled(self, perm):
        """Graph with vertex v renamed perm[v-1] (perm is a 1-based permutation)."""
        return FeynmanGraph(self.d, self.n, tuple((perm[i - 1], perm[j - 1], k) for i, j, k in self.edges),
                            self.p, self.q)

    def to_json(self):
        return {"d": self.d, "n": self.n, "edges": [list(e) for e in self.edges], "p": self.p, "q": self.q}

    @classmethod
    def from_json(cls, desc):
        return cls(int(desc["d"]), int(desc["n"]), tuple(tuple(e) for e in desc.get("edges", [])),
                   float(desc.get("p", 1.0)), int(desc.get("q", 0)))


def amplitude_components(graph, comps, vertices=None):
    """Product of propagators over edges inside ``vertices`` (1-based; default all)."""
    vs = set(range(1, graph.n + 1) if vertices is None else vertices)
    val = None
    for i, j, k in graph.edges:
        if i in vs and j in vs:
            f = pair_factor(comps, graph.d, i - 1, j - 1, graph.p * k, graph.q * k)
            val = f if val is None else val * f
    return 1.0 + 0.0 * J.value(comps[0]) if val is None else val


def graph_amplitude(graph, singular_set=None):
    """Kernel prod_{i<j} G^{n_ij}(x_i, x_j) on (R^d)^n, singular on the big diagonal."""
    singular_set = singular_set or BigDiagonal(graph.d, graph.n)
    return SingularKernel(graph.d * graph.n, singular_set, lambda c: amplitude_components(graph, c),
                          graph.growth(), graph.q > 0, {"type": "graph", "graph": graph.to_json()})


def massless_propagator(d):
    """(p, q) of the flat massless Green function in dimension d."""
    if d == 2:
        return 0.0, 1
    if d >= 3:
        return float(d - 2), 0
    raise ValueError("massless propagator preset needs d >= 2")


def kernel_from_json(desc, singular_set=None):
    kind = desc.get("type")
    if "set" in desc:
        singular_set = set_from_json(desc["set"])
    if kind == "power_log":
        return power_log_kernel(singular_set, desc.get("p", 0.0), desc.get("q", 0),
                                desc.get("half_line", False), desc.get("coefficient", 1.0))
    if kind == "constant":
        return constant_kernel(singular_set, desc.get("value", 1.0))
    if kind == "product":
        fs = [kernel_from_json(f, singular_set) for f in desc["factors"]]
        out = fs[0]
        for f in fs[1:]:
            out = multiply(out, f)
        return out
    if kind == "graph":
        return graph_amplitude(FeynmanGraph.from_json(desc["graph"]), singular_set)
    raise ValueError(f"unknown kernel type {kind!r}")


def vertex_pairs(n):
    return list(itertools.combinations(range(1, n + 1), 2))
