"""Configuration-space renormalization of Feynman amplitudes.

Level-n maps are built recursively: off the small diagonal d_n the amplitude
is glued from cells C_IJ with a tempered partition of unity, each cell
carrying the product of lower-level renormalizations R_I (x) R_J and the
smooth cross propagators; the result is then extended across d_n with the
dyadic engine of :mod:`renorm.extend`.

Expanding the recursive cell sums gives one term per labelled binary tree.
Each tree is integrated in its Jacobi coordinates (block centers and one
relative coordinate per internal node), in which every Taylor base point of a
lower level simply zeroes a group of coordinates.
"""
from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .cutoff import smoothstep, theta
from .errors import DivergentConfiguration
from .extend import RenormalizedDistribution, default_order, growth_excess, required_order
from .geometry import SmallDiagonal
from .kernel import FeynmanGraph, graph_amplitude
from .quad import ZERO, QuadConfig, adaptive, integrate
from .scheme import RenormScheme
from .testfn import TestFunction

DESK_MAX_N = 4


# cells and partition of unity ---------------------------------------------------

@dataclass(frozen=True)
class CoverCell:
    I: tuple
    J: tuple

    def __post_init__(self):
        if not self.I or not self.J or set(self.I) & set(self.J):
            raise ValueError("cells need two disjoint nonempty blocks")

    @property
    def cross_pairs(self):
        return [(min(i, j), max(i, j)) for i in self.I for j in self.J]

    def contains(self, x, d=1):
        """Whether configurations x (..., n*d) avoid all I x J collisions."""
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for i, j in self.cross_pairs:
            diff = x[..., (i - 1) * d:i * d] - x[..., (j - 1) * d:j * d]
            ok &= np.any(diff != 0.0, axis=-1)
        return ok

    def label(self):
        return "{" + ",".join(map(str, self.I)) + "}|{" + ",".join(map(str, self.J)) + "}"

    def to_json(self):
        return {"I": list(self.I), "J": list(self.J)}


def block_cells(block):
    """Unordered bipartitions of ``block``: smaller side first, ties put the first vertex first."""
    block = tuple(sorted(block))
    out = []
    rest = block[1:]
    for r in range(len(rest) + 1):
        for combo in itertools.combinations(rest, r):
            side = (block[0],) + combo
            other = tuple(v for v in block if v not in side)
            if not other:
                continue
            a, b = (side, other) if len(side) <= len(other) else (other, side)
            out.append(CoverCell(a, b))
    out.sort(key=lambda c: (len(c.I), c.I))
    return out


def cover_cells(n):
    """All 2^(n-1) - 1 cells C_IJ of {1..n}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return block_cells(range(1, n + 1))


def _rise(q, a, b):
    """Smooth step in the squared ratio: 0 for ratio <= a, 1 for ratio >= b."""
    return 1.0 - smoothstep(q, a * a, b * b)


def block_partition(comps, block, d, a=0.25, b=0.5):
    """Partition of unity over the cells of ``block`` (1-based vertices); accepts jets."""
    cells = block_cells(block)
    sq = {}
    for i, j in itertools.combinations(sorted(block), 2):
        sq[(i, j)] = J.total((comps[(i - 1) * d + c] - comps[(j - 1) * d + c]) ** 2 for c in range(d))
    d2 = J.total(v ** 4 for v in sq.values()) ** 0.25  # squared smooth diameter (l^8 norm)
    weights = []
    for cell in cells:
        w = None
        for pair in cell.cross_pairs:
            f = _rise(sq[pair] / d2, a, b)
            w = f if w is None else w * f
        weights.append(w)
    total = J.total(weights)
    tv = J.value(total)
    safe = J.where(tv > 0, total, 1.0)
    return cells, [J.where(tv > 0, w / safe, 0.0) for w in weights]


def tempered_partition(n, d, x, a=0.25, b=0.5):
    """Weights chi_IJ at configurations x (..., n*d) off the small diagonal."""
    if not 0 < a < b <= 0.5:
        raise ValueError("need 0 < a < b <= 1/2")
    if n > DESK_MAX_N:
        raise ValueError(f"partition positivity is guaranteed for n <= {DESK_MAX_N}")
    x = np.asarray(x, dtype=float)
    comps = np.moveaxis(x, -1, 0)
    cells, ws = block_partition(list(comps), range(1, n + 1), d, a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        total = sum(ws)
    if np.any(np.asarray(total) == 0):
        raise RuntimeError("partition of unity degenerated (configuration on the small diagonal?)")
    return {c: np.asarray(w, dtype=float) for c, w in zip(cells, ws)}


# tower of per-level configurations -----------------------------------------------

@dataclass(frozen=True)
class LevelInfo:
    level: int
    growth: float
    excess: float
    order: int
    base_scale: float
    subtract: bool


@dataclass
class RenormMapTower:
    """Per-level scheme choices (orders, base scales) shared by all graphs."""

    orders: dict = field(default_factory=dict)
    base_scales: dict = field(default_factory=dict)
    quad: QuadConfig = field(default_factory=lambda: QuadConfig(rel_tol=1e-7, abs_tol=1e-12,
                                                                 max_subdivisions=60000, strategy="adaptive"))
    j_max: int = 30
    j_min: int = 6
    a: float = 0.25
    b: float = 0.5
    n_max: int = DESK_MAX_N

    def __post_init__(self):
        self._memo = {}
        self._lock = threading.Lock()

    def order(self, level):
        return self.orders.get(level)

    def base_scale(self, level):
        if isinstance(self.base_scales, (int, float)):
            return float(self.base_scales)
        return float(self.base_scales.get(level, 1.0))

    def with_orders(self, orders):
        return RenormMapTower(dict(orders), self.base_scales, self.quad, self.j_max, self.j_min,
                              self.a, self.b, self.n_max)

    def info(self, graph, block):
        """Scheme data of the induced subgraph on ``block`` (memoized by canonical form)."""
        key = (canonical_key(graph, block), graph.p, graph.q, graph.d)
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        level = len(block)
        growth = graph.growth(block)
        codim = (level - 1) * graph.d
        has_log = graph.q > 0 and growth > 0
        exc = growth_excess(growth, codim, has_log)
        subtract = growth > 0 and exc >= 0
        m = self.order(level)
        m = default_order(growth, codim) if m is None else int(m)
        if subtract and m + 1 <= exc:
            raise DivergentConfiguration(
                f"level {level}: order {m} too low for growth {growth:g} (need m >= {required_order(exc)})",
                required_order(exc))
        info = LevelInfo(level, growth, exc, m, self.base_scale(level), subtract)
        with self._lock:
            self._memo.setdefault(key, info)
        return info


def canonical_key(graph, block):
    """Smallest multiplicity sub-matrix over relabelings of ``block``."""
    block = sorted(block)
    best = None
    for perm in itertools.permutations(block):
        mat = tuple(graph.multiplicity(perm[i], perm[j]) if i != j else 0
                    for i in range(len(perm)) for j in range(len(perm)))
        if best is None or mat < best:
            best = mat
    return (len(block), best)


# trees, transforms and charts ----------------------------------------------------

@dataclass(frozen=True)
class Tree:
    block: tuple  # 1-based vertices
    left: "Tree | None" = None
    right: "Tree | None" = None

    @property
    def is_leaf(self):
        return self.left is None

    def internal_nodes(self):
        if self.is_leaf:
            return []
        return [self] + self.left.internal_nodes() + self.right.internal_nodes()


def trees(block):
    block = tuple(sorted(block))
    if len(block) == 1:
        return [Tree(block)]
    out = []
    for cell in block_cells(block):
        for tl in trees(cell.I):
            for tr in trees(cell.J):
                out.append(Tree(block, tl, tr))
    return out


def _collapse(comps, block):
    idx = [v - 1 for v in block]
    mean = J.total(comps[i] for i in idx) / len(idx)
    out = list(comps)
    for i in idx:
        out[i] = mean
    return out


def _rho(comps, block):
    idx = [v - 1 for v in block]
    mean = J.total(comps[i] for i in idx) / len(idx)
    return J.sqrt(J.total((comps[i] - mean) ** 2 for i in idx))


def _project(F, comps, block, m):
    """Order-m Taylor polynomial of F along the small diagonal of ``block``."""
    base = _collapse(comps, block)
    if m == 0:
        return F(base)
    if any(isinstance(c, J.Jet) for c in comps):
        raise NotImplementedError("nested Taylor subtractions of order >= 1 are not supported")
    line = [J.Jet.variable(b, 0, 1, m, seed=c - b) for b, c in zip(base, comps)]
    val = F(line)
    return val.c.sum(axis=0) if isinstance(val, J.Jet) else val


def _cross(graph, comps, cell):
    val = None
    for i, j in cell.cross_pairs:
        k = graph.multiplicity(i, j)
        if k:
            sq = (comps[i - 1] - comps[j - 1]) ** 2
            f = J.power(sq, -0.5 * graph.p * k)
            if graph.q:
                f = f * (0.5 * J.log(sq)) ** (graph.q * k)
            val = f if val is None else val * f
    return val


class _Engine:
    """Tree transforms for one graph and tower (d = 1)."""

    def __init__(self, tower, graph):
        self.tower = tower
        self.graph = graph

    def weighted(self, node, H):
        """comps -> chi_cell * crossG_cell * H for the cell split at ``node``."""
        cell = CoverCell(node.left.block, node.right.block)
        graph, a, b = self.graph, self.tower.a, self.tower.b

        def out(comps):
            cells, ws = block_partition(comps, node.block, 1, a, b)
            w = ws[cells.index(cell)]
            cross = _cross(graph, comps, cell)
            val = H(comps)
            if cross is None:
                return w * val
            cross = J.where(J.value(w) > 0, cross, 0.0)
            return w * cross * val

        return out

    def transform(self, node, F):
        """Renormalized lower-level map of ``node.block`` (restricted to this tree) applied to F."""
        if node.is_leaf:
            return F
        info = self.tower.info(self.graph, node.block)
        lam, m = info.base_scale, info.order
        if info.subtract:
            def sub(comps, F=F):
                return F(comps) - theta(_rho(comps, node.block) / lam) * _project(F, comps, node.block, m)
        else:
            sub = F
        if len(node.block) == 2:
            i, j = node.block
            k = self.graph.multiplicity(i, j)

            def pair(comps):
                val = sub(comps)
                if not k:
                    return val
                sq = (comps[i - 1] - comps[j - 1]) ** 2
                g = J.power(sq, -0.5 * self.graph.p * k)
                if self.graph.q:
                    g = g * (0.5 * J.log(sq)) ** (self.graph.q * k)
                return g * val

            return pair
        return self.transform(node.left, self.transform(node.right, self.weighted(node, sub)))

    def top(self, root, g):
        """Unextended level-n integrand of one tree: children transforms of chi crossG g."""
        return self.transform(root.left, self.transform(root.right, self.weighted(root, g)))


def _chart(forest, n):
    """Jacobi matrix A (y = A x) for a forest covering vertices 1..n, with node rows."""
    rows, nodes = [], []
    for t in forest:
        c = np.zeros(n)
        c[[v - 1 for v in t.block]] = 1.0 / len(t.block)
        rows.append(c)
        nodes.append(None)
        for node in t.internal_nodes():
            r = np.zeros(n)
            r[[v - 1 for v in node.left.block]] += 1.0 / len(node.left.block)
            r[[v - 1 for v in node.right.block]] -= 1.0 / len(node.right.block)
            rows.append(r)
            nodes.append(node)
    return np.array(rows), nodes


def _relative_breaks(lo, hi, r_min):
    pts = {lo, hi}
    if lo < 0 < hi:
        pts.add(0.0)
    big = max(abs(lo), abs(hi))
    r = big
    while r >= r_min:
        for s in (r, -r):
            if lo < s < hi:
                pts.add(s)
        r /= 2
    return np.array(sorted(pts))


_S_R = math.sqrt(1.5)  # node coordinate = sqrt(3/2) R cos(phi)
_S_U = math.sqrt(2.0)  # pair coordinate = sqrt(2) R sin(phi), so that R is the block's rho


def _image(M, lo, hi):
    """Interval image of the box [lo, hi] under the linear map M."""
    pos, neg = np.clip(M, 0, None), np.clip(M, None, 0)
    return lo @ pos.T + hi @ neg.T, hi @ pos.T + lo @ neg.T


def _trig_range(a, b):
    """Ranges of cos and sin over the intervals [a, b]."""
    ca, cb, sa, sb = np.cos(a), np.cos(b), np.sin(a), np.sin(b)
    lo_c, hi_c = np.minimum(ca, cb), np.maximum(ca, cb)
    lo_s, hi_s = np.minimum(sa, sb), np.maximum(sa, sb)
    for k in range(-4, 5):
        t = k * math.pi / 2
        inside = (a < t) & (t < b)
        c, s = round(math.cos(t)), round(math.sin(t))
        lo_c, hi_c = np.where(inside, np.minimum(lo_c, c), lo_c), np.where(inside, np.maximum(hi_c, c), hi_c)
        lo_s, hi_s = np.where(inside, np.minimum(lo_s, s), lo_s), np.where(inside, np.maximum(hi_s, s), hi_s)
    return lo_c, hi_c, lo_s, hi_s


class _Chart:
    """Jacobi coordinates, with polar coordinates in the relative plane of subtracting 3-blocks."""

    def __init__(self, A, polar):
        self.A = A
        self.inv = np.linalg.inv(A)
        self.det = abs(np.linalg.det(self.inv))
        self.polar = polar  # (radius index, angle index) pairs
        self.angles = np.zeros(A.shape[0], dtype=bool)
        for _, ku in polar:
            self.angles[ku] = True

    def linear(self, y):
        lin = y.copy()
        jac = np.full(y.shape[0], self.det)
        for kr, ku in self.polar:
            r, phi = y[:, kr], y[:, ku]
            lin[:, kr] = _S_R * r * np.cos(phi)
            lin[:, ku] = _S_U * r * np.sin(phi)
            jac = jac * (math.sqrt(3.0) * r)
        return lin, jac

    def linear_interval(self, y_lo, y_hi):
        lo, hi = y_lo.copy(), y_hi.copy()
        for kr, ku in self.polar:
            r0, r1 = y_lo[:, kr], y_hi[:, kr]
            cl, ch, sl, sh = _trig_range(y_lo[:, ku], y_hi[:, ku])
            lo[:, kr] = _S_R * np.minimum(r0 * cl, r1 * cl)
            hi[:, kr] = _S_R * np.maximum(r0 * ch, r1 * ch)
            lo[:, ku] = _S_U * np.minimum(r0 * sl, r1 * sl)
            hi[:, ku] = _S_U * np.maximum(r0 * sh, r1 * sh)
        return lo, hi


def _refine_boxes(y_lo, y_hi, chart, zeroed, box, h, max_boxes=400000):
    """Drop chart boxes that cannot meet ``box`` and split the rest to width <= h.

    Coordinates flagged in ``zeroed`` may be set to 0 by a Taylor base point,
    so their intervals are widened to contain 0 before the test.
    """
    keep_lo, keep_hi = [], []
    while len(y_lo):
        t_lo, t_hi = chart.linear_interval(y_lo, y_hi)
        t_lo = np.where(zeroed, np.minimum(t_lo, 0.0), t_lo)
        t_hi = np.where(zeroed, np.maximum(t_hi, 0.0), t_hi)
        x_lo, x_hi = _image(chart.inv, t_lo, t_hi)
        hit = np.all((x_hi > box.lo) & (x_lo < box.hi), axis=1)
        y_lo, y_hi = y_lo[hit], y_hi[hit]
        width = np.where(chart.angles, 0.0, y_hi - y_lo)
        axis = np.argmax(width, axis=1)
        rows = np.arange(len(axis))
        big = width[rows, axis] > h
        if len(keep_lo) and sum(map(len, keep_lo)) + 2 * big.sum() > max_boxes:
            big[:] = False
        keep_lo.append(y_lo[~big])
        keep_hi.append(y_hi[~big])
        y_lo, y_hi, axis = y_lo[big], y_hi[big], axis[big]
        rows = np.arange(len(axis))
        mid = 0.5 * (y_lo[rows, axis] + y_hi[rows, axis])
        left_hi = y_hi.copy()
        left_hi[rows, axis] = mid
        right_lo = y_lo.copy()
        right_lo[rows, axis] = mid
        y_lo = np.concatenate([y_lo, right_lo])
        y_hi = np.concatenate([left_hi, y_hi])
    return np.concatenate(keep_lo), np.concatenate(keep_hi)


class ConfigurationTarget:
    """Level-n amplitude off d_n, glued from cells, as an integration target for the extension engine."""

    def __init__(self, tower, graph, subtract_top=True):
        if graph.d != 1:
            raise ValueError("configuration engine for n >= 3 supports d = 1 only")
        self.tower = tower
        self.graph = graph
        self.engine = _Engine(tower, graph)
        self.n = graph.n
        self.dim = graph.n
        self.growth = graph.growth()
        lower = [tower.info(graph, blk) for r in range(2, graph.n)
                 for blk in itertools.combinations(range(1, graph.n + 1), r)]
        self.log_flag = graph.q > 0 or any(i.subtract for i in lower)
        self.trees = trees(range(1, graph.n + 1))
        # initial chart boxes, as a fraction of the smallest support side
        self.initial_width = 0.25 if graph.n <= 3 else 0.5

    def _forest_integral(self, forests, integrand_of, box, shell, quad, caps_of, top=True):
        los, his, tags, charts = [], [], [], []
        n = self.n
        side = float(np.min(box.hi - box.lo))
        h0 = side * self.initial_width
        info = lambda node: self.tower.info(self.graph, node.block)  # noqa: E731
        near = top and shell is not None and shell[0] < side / 4
        for tag, forest in enumerate(forests):
            root = forest[0]
            # near d_n keep the root coordinate, whose cap carries the shell; elsewhere the
            # child-block centers keep support boundaries aligned with the chart
            chart_forest = forest if (near or not top) else [root.left, root.right]
            A, nodes = _chart(chart_forest, n)
            polar = []
            for k, node in enumerate(nodes):
                if node is None or len(node.block) != 3:
                    continue
                if (top and node is root) or not info(node).subtract:
                    continue
                pair = node.left if len(node.left.block) == 2 else node.right
                polar.append((k, nodes.index(pair)))
            chart = _Chart(A, polar)
            charts.append((chart, integrand_of(forest)))
            # coordinates zeroed by some Taylor base point, with their reach
            reach = np.zeros(n)
            zeroed = np.zeros(n, dtype=bool)
            for k, (row, node) in enumerate(zip(A, nodes)):
                if node is None:
                    continue
                tree = next(t for t in chart_forest if node in t.internal_nodes())
                lams = [info(anc).base_scale for anc in _ancestors(tree, node)
                        if not (top and anc is root) and info(anc).subtract]
                if lams:
                    zeroed[k] = True
                    reach[k] = float(np.linalg.norm(row)) * max(lams)
            lo_y, hi_y = _image(A, box.lo, box.hi)
            lo_y = np.where(zeroed, np.minimum(lo_y, -reach), lo_y)
            hi_y = np.where(zeroed, np.maximum(hi_y, reach), hi_y)
            for k, (row, node) in enumerate(zip(A, nodes)):
                cap = None if node is None else caps_of(forest, node, row)
                if cap is not None:
                    lo_y[k], hi_y[k] = max(lo_y[k], -cap), min(hi_y[k], cap)
            if np.any(hi_y <= lo_y):
                continue
            breaks = []
            for k, node in enumerate(nodes):
                lo, hi = lo_y[k], hi_y[k]
                partner = next((ku for kr, ku in polar if kr == k), None)
                if node is None:
                    breaks.append(np.array([lo, hi]))
                elif chart.angles[k]:
                    breaks.append(np.linspace(-math.pi, math.pi, 9))
                elif partner is not None:
                    big = math.sqrt(max(lo * lo, hi * hi) / _S_R ** 2
                                    + max(lo_y[partner] ** 2, hi_y[partner] ** 2) / _S_U ** 2)
                    r_min = shell[0] / 16 if shell is not None else big / 64
                    breaks.append(np.array([0.0] + [big * 2.0 ** -i for i in range(60, -1, -1)
                                                    if big * 2.0 ** -i >= r_min]))
                else:
                    r_min = shell[0] / 16 if shell is not None else max(abs(lo), abs(hi)) / 64
                    breaks.append(_relative_breaks(lo, hi, r_min))
            grids = np.meshgrid(*[np.arange(len(b) - 1) for b in breaks], indexing="ij")
            idx = [g.ravel() for g in grids]
            y_lo = np.stack([b[i] for b, i in zip(breaks, idx)], axis=1)
            y_hi = np.stack([b[i + 1] for b, i in zip(breaks, idx)], axis=1)
            y_lo, y_hi = _refine_boxes(y_lo, y_hi, chart, zeroed, box, h0)
            los.extend(y_lo)
            his.extend(y_hi)
            tags.extend([tag] * len(y_lo))
        if not los:
            return ZERO
        tags = np.array(tags)

        def f(y, t):
            out = np.zeros(y.shape[0])
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                for tag in np.unique(t):
                    sel = t == tag
                    chart, F = charts[tag]
                    lin, jac = chart.linear(y[sel])
                    x = lin @ chart.inv.T
                    out[sel] = np.asarray(F(list(x.T)), dtype=float) * jac
            # deep in a shell two vertices can coincide in floating point (a null set)
            return np.where(np.isfinite(out), out, 0.0)

        budget = max(quad.max_subdivisions, 3 * len(los))
        return adaptive(f, np.array(los), np.array(his), tags, quad.rel_tol, quad.abs_tol, budget)

    def integrate_region(self, g, box, shell, singular_set, quad):
        eng = self.engine

        def integrand_of(forest):
            return eng.top(forest[0], g)

        def caps_of(forest, node, row):
            if shell is None:
                return None
            r_hi = shell[1]
            norm = float(np.linalg.norm(row))
            if node is forest[0]:
                return norm * r_hi
            ext = max((self.tower.info(self.graph, anc.block).base_scale for anc in _ancestors(forest[0], node)
                       if anc is not forest[0] and self.tower.info(self.graph, anc.block).subtract), default=0.0)
            return norm * max(r_hi, ext)

        return self._forest_integral([[t] for t in self.trees], integrand_of, box, shell, quad, caps_of)

    def factorized_pairing(self, phi, I, J_, quad):
        """<(R_I (x) R_J)(crossG_IJ phi)> without partition or d_n extension (block charts)."""
        eng = self.engine
        cell = CoverCell(tuple(sorted(I)), tuple(sorted(J_)))
        graph = self.graph

        def base(comps):
            cross = _cross(graph, comps, cell)
            val = phi.expr(comps)
            if cross is None:
                return val
            return J.where(J.value(val) != 0, cross, 0.0) * val

        def integrand_of(forest):
            return eng.transform(forest[0], eng.transform(forest[1], base))

        forests = [[ti, tj] for ti in trees(cell.I) for tj in trees(cell.J)]
        return self._forest_integral(forests, integrand_of, phi.support, None, quad, lambda *a: None, top=False)


def _ancestors(root, node):
    """Internal nodes on the path from root to node, inclusive."""
    if root is node:
        return [root]
    if root.is_leaf:
        return []
    for child in (root.left, root.right):
        path = _ancestors(child, node)
        if path:
            return [root] + path
    return []


# public API -----------------------------------------------------------------------

def _check_desk(graph, tower):
    if graph.n < 2:
        raise ValueError("graphs need at least two vertices")
    if graph.d not in (1, 2) or graph.n > tower.n_max or graph.d * graph.n > 8:
        raise ValueError("outside desk scale: need d in {1, 2}, n <= 4, d*n <= 8")
    if graph.n >= 3 and graph.d != 1:
        raise ValueError("n >= 3 is supported for d = 1 only")


def renormalize_graph(tower, graph):
    """Renormalized amplitude of ``graph`` as a :class:`RenormalizedDistribution`."""
    _check_desk(graph, tower)
    n, d = graph.n, graph.d
    diag = SmallDiagonal(d, n)
    info = tower.info(graph, tuple(range(1, n + 1)))
    if n == 2:
        kernel = graph_amplitude(graph, diag)
        scheme = RenormScheme(diag, info.order, base_scale=info.base_scale)
        return RenormalizedDistribution(kernel, scheme, tower.quad, tower.j_max, tower.j_min)
    target = ConfigurationTarget(tower, graph)
    scheme = RenormScheme(diag, info.order, base_scale=info.base_scale)
    rd = RenormalizedDistribution(target, scheme, tower.quad, tower.j_max, tower.j_min)
    rd.check_order()
    return rd


@dataclass
class AxiomReport:
    linearity: float
    restriction: float
    factorization: float
    details: list = field(default_factory=list)
    pairings: list = field(default_factory=list)

    def to_json(self):
        return {"linearity": self.linearity, "restriction": self.restriction,
                "factorization": self.factorization, "details": self.details, "pairings": self.pairings}


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def split_pairing(tower, graph, phi, I, J_):
    """Independent right-hand side of the factorization axiom for a split-support test function."""
    for i in I:
        for j in J_:
            lo_i, hi_i = phi.support.lo[i - 1], phi.support.hi[i - 1]
            lo_j, hi_j = phi.support.lo[j - 1], phi.support.hi[j - 1]
            if not (hi_i < lo_j or hi_j < lo_i):
                raise ValueError(f"supports of vertices {i} and {j} overlap; split does not apply")
    if graph.n == 2:
        kernel = graph_amplitude(graph)
        return integrate(lambda x: kernel.expr(x.T) * phi.expr(x.T), phi.support, tower.quad)
    quad = tower.quad.with_(max_subdivisions=4 * tower.quad.max_subdivisions)
    return ConfigurationTarget(tower, graph).factorized_pairing(phi, I, J_, quad)


def _companion(phi):
    """A second test function on the same support, for the linearity check."""
    def expr(comps):
        return phi.expr(comps) * (1.0 + 0.5 * comps[0] - 0.3 * comps[len(comps) - 1])

    return TestFunction(phi.dim, expr, phi.support, phi.max_order)


def verify_axioms(tower, graph, suite):
    """Residuals of linearity, restriction and factorization on a suite.

    ``suite`` is a list of ``(phi, split)`` with ``split`` either None or a pair
    of 1-based vertex tuples whose coordinate supports are separated.
    """
    rd = renormalize_graph(tower, graph)
    details = []
    phis = [p for p, _ in suite]
    values = [rd.pair(p).value for p in phis]
    lin = 0.0
    if phis:
        # a same-support partner keeps both sides on comparable quadrature grids
        f, g = phis[0], _companion(phis[0])
        alpha, beta = 0.7, -1.3
        vf, vg = values[0], rd.pair(g).value
        lhs = rd.pair(f.scaled(alpha) + g.scaled(beta)).value
        rhs = alpha * vf + beta * vg
        lin = abs(lhs - rhs) / max(abs(alpha * vf) + abs(beta * vg), 1e-300)
        details.append({"axiom": "linearity", "lhs": lhs, "rhs": rhs})
    res = 0.0
    if phis:
        wider = phis[0].with_support(phis[0].support.enlarged(0.25))
        v2 = rd.pair(wider).value
        res = _rel(v2, values[0])
        details.append({"axiom": "restriction", "lhs": v2, "rhs": values[0]})
    fac = 0.0
    for (phi, split), val in zip(suite, values):
        if not split:
            continue
        rhs = split_pairing(tower, graph, phi, tuple(split[0]), tuple(split[1])).value
        r = _rel(val, rhs)
        fac = max(fac, r)
        details.append({"axiom": "factorization", "split": [list(split[0]), list(split[1])], "lhs": val, "rhs": rhs})
    return AxiomReport(lin, res, fac, details, values)


__all__ = [
    "AxiomReport",
    "ConfigurationTarget",
    "CoverCell",
    "FeynmanGraph",
    "RenormMapTower",
    "block_partition",
    "canonical_key",
    "cover_cells",
    "renormalize_graph",
    "split_pairing",
    "tempered_partition",
    "trees",
    "verify_axioms",
]
