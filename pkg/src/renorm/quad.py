"""Numerical integration: vectorized global-adaptive cubature and scrambled QMC.

One dimension uses the 7/15-point Gauss-Kronrod pair; higher dimensions use
the embedded degree 7/5 Genz-Malik rule with splits along the axis of largest
fourth difference.  All boxes selected for refinement in a sweep are
evaluated in a single integrand call.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.stats import qmc

from .errors import QuadratureFailure

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_subdivisions: int = 40000
    qmc_min_dim: int = 4
    qmc_budget: int = 2 ** 14
    qmc_replicates: int = 8
    seed: int = 0
    strategy: str = "auto"

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions <= 0 or self.qmc_budget <= 0 or self.qmc_replicates < 2:
            raise ValueError("budgets must be positive (at least two QMC replicates)")
        if self.strategy not in ("auto", "adaptive", "qmc"):
            raise ValueError(f"unknown strategy {self.strategy!r}")

    def with_(self, **kw):
        return replace(self, **kw)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, desc):
        return cls(**{k: v for k, v in (desc or {}).items() if k in cls.__dataclass_fields__})

    def uses_qmc(self, dim):
        if self.strategy == "auto":
            return dim >= self.qmc_min_dim
        return self.strategy == "qmc"


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    converged: bool
    evaluations: int = 0
    regions: int = 0

    def __add__(self, other):
        return QuadResult(self.value + other.value, self.error + other.error,
                          self.converged and other.converged,
                          self.evaluations + other.evaluations, self.regions + other.regions)

    def scaled(self, c):
        return QuadResult(c * self.value, abs(c) * self.error, self.converged, self.evaluations, self.regions)


ZERO = QuadResult(0.0, 0.0, True)


# rules on [-1, 1]^N ------------------------------------------------------

_XGK = [0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.0]
_WGK = [0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714]
_WG = [0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
       0.381830050505118944950369775488975, 0.417959183673469387755102040816327]


class _Rule:
    def __init__(self, nodes, hi, lo, axis_groups=None):
        self.nodes = np.asarray(nodes, dtype=float)
        self.w_hi = np.asarray(hi, dtype=float)
        self.w_lo = np.asarray(lo, dtype=float)
        self.axis_groups = axis_groups
        self.detectors = None


def _gk15():
    nodes, whi, wlo = [], [], []
    for k, (x, w) in enumerate(zip(_XGK, _WGK)):
        wg = _WG[k // 2] if k % 2 == 1 else 0.0
        if x == 0.0:
            nodes.append(0.0), whi.append(w), wlo.append(wg)
        else:
            for s in (-1.0, 1.0):
                nodes.append(s * x), whi.append(w), wlo.append(wg)
    # weights normalized to interval length 2 -> divide by 2 for unit volume
    return _Rule(np.array(nodes)[:, None], np.array(whi) / 2, np.array(wlo) / 2)


def _genz_malik(n):
    l2, l3, l4, l5 = math.sqrt(9 / 70), math.sqrt(9 / 10), math.sqrt(9 / 10), math.sqrt(9 / 19)
    w = [(12824 - 9120 * n + 400 * n * n) / 19683, 980 / 6561, (1820 - 400 * n) / 19683,
         200 / 19683, 6859 / 19683 / 2 ** n]
    v = [(729 - 950 * n + 50 * n * n) / 729, 245 / 486, (265 - 100 * n) / 1458, 25 / 729, 0.0]
    nodes, hi, lo = [np.zeros(n)], [w[0]], [v[0]]
    groups = []
    for i in range(n):
        g = []
        for lam, k in ((l2, 1), (l3, 2)):
            for s in (1.0, -1.0):
                p = np.zeros(n)
                p[i] = s * lam
                g.append(len(nodes))
                nodes.append(p), hi.append(w[k]), lo.append(v[k])
        groups.append(g)
    for i, j in itertools.combinations(range(n), 2):
        for si in (1.0, -1.0):
            for sj in (1.0, -1.0):
                p = np.zeros(n)
                p[i], p[j] = si * l4, sj * l4
                nodes.append(p), hi.append(w[3]), lo.append(v[3])
    for signs in itertools.product((1.0, -1.0), repeat=n):
        nodes.append(l5 * np.array(signs)), hi.append(w[4]), lo.append(v[4])
    rule = _Rule(np.array(nodes), hi, lo, groups)
    # zero-weight nodes near the vertices catch supports missed by every rule node
    det = np.array(list(itertools.product((0.98, -0.98), repeat=n)))
    rule.detectors = slice(len(nodes), len(nodes) + len(det))
    rule.nodes = np.vstack([rule.nodes, det])
    rule.w_hi = np.concatenate([rule.w_hi, np.zeros(len(det))])
    rule.w_lo = np.concatenate([rule.w_lo, np.zeros(len(det))])
    return rule


_RULES = {}


def _rule(n):
    if n not in _RULES:
        _RULES[n] = _gk15() if n == 1 else _genz_malik(n)
    return _RULES[n]


# adaptive driver ----------------------------------------------------------

def _evaluate(f, rule, lo, hi, tags, chunk):
    half = 0.5 * (hi - lo)
    center = lo + half
    npts = rule.nodes.shape[0]
    nb, n = lo.shape
    vals = np.empty((nb, npts))
    per = max(1, chunk // npts)
    for s in range(0, nb, per):
        c = center[s:s + per, None, :] + half[s:s + per, None, :] * rule.nodes[None]
        x = c.reshape(-1, n)
        if tags is None:
            v = f(x)
        else:
            v = f(x, np.repeat(tags[s:s + per], npts))
        vals[s:s + per] = np.asarray(v, dtype=float).reshape(-1, npts)
    if not np.all(np.isfinite(vals)):
        raise QuadratureFailure("integrand returned non-finite values")
    vol = np.prod(hi - lo, axis=1)
    est = vol * (vals @ rule.w_hi)
    err = np.abs(est - vol * (vals @ rule.w_lo))
    if rule.detectors is not None:
        det = np.abs(vals[:, rule.detectors]).max(axis=1)
        seen = np.abs(vals[:, :rule.detectors.start]).max(axis=1)
        blind = (seen < 0.01 * det) & (det > 0)
        err = np.where(blind, vol * det, err)
    if n == 1:
        axis = np.zeros(nb, dtype=int)
    else:
        f0 = vals[:, :1]
        diffs = []
        for g in rule.axis_groups:
            a = vals[:, g[0]] + vals[:, g[1]] - 2 * f0[:, 0]
            b = vals[:, g[2]] + vals[:, g[3]] - 2 * f0[:, 0]
            diffs.append(np.abs(a - b / 7.0))
        diffs = np.stack(diffs, axis=1)
        width = hi - lo
        near = diffs >= diffs.max(axis=1, keepdims=True) * (1 - 1e-6)
        axis = np.argmax(np.where(near, width, -1.0), axis=1)
    return est, err, axis


def adaptive(f, lo, hi, tags=None, rel_tol=1e-10, abs_tol=1e-13, max_boxes=40000, chunk=200000):
    """Global adaptive cubature over a list of initial boxes.

    ``f(x)`` (or ``f(x, tags)`` when ``tags`` is given) receives points of shape
    (P, N) and returns P values.  Returns a :class:`QuadResult`.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float)).copy()
    hi = np.atleast_2d(np.asarray(hi, dtype=float)).copy()
    keep = np.all(hi > lo, axis=1)
    lo, hi = lo[keep], hi[keep]
    if tags is not None:
        tags = np.asarray(tags)[keep]
    if lo.shape[0] == 0:
        return ZERO
    n = lo.shape[1]
    rule = _rule(n)
    npts = rule.nodes.shape[0]
    est, err, axis = _evaluate(f, rule, lo, hi, tags, chunk)
    evals = est.size * npts
    converged = False
    while True:
        total = math.fsum(est)
        e_tot = float(err.sum())
        tol = max(abs_tol, rel_tol * abs(total))
        if e_tot <= tol or e_tot <= 50 * _EPS * float(np.abs(est).sum()):
            converged = True
            break
        nb = est.size
        if nb >= max_boxes:
            break
        order = np.argsort(-err, kind="stable")
        cum = np.cumsum(err[order])
        need = int(np.searchsorted(cum, e_tot - 0.5 * tol)) + 1
        k = max(1, min(need, max(8, nb // 4), max_boxes - nb))
        pick = order[:k]
        rest = np.ones(nb, dtype=bool)
        rest[pick] = False
        plo, phi, pax = lo[pick], hi[pick], axis[pick]
        mid = 0.5 * (plo[np.arange(k), pax] + phi[np.arange(k), pax])
        lo_a, hi_a = plo.copy(), phi.copy()
        hi_a[np.arange(k), pax] = mid
        lo_b, hi_b = plo.copy(), phi.copy()
        lo_b[np.arange(k), pax] = mid
        clo = np.concatenate([lo_a, lo_b])
        chi = np.concatenate([hi_a, hi_b])
        ctags = None if tags is None else np.concatenate([tags[pick], tags[pick]])
        cest, cerr, cax = _evaluate(f, rule, clo, chi, ctags, chunk)
        evals += cest.size * npts
        lo = np.concatenate([lo[rest], clo])
        hi = np.concatenate([hi[rest], chi])
        est = np.concatenate([est[rest], cest])
        err = np.concatenate([err[rest], cerr])
        axis = np.concatenate([axis[rest], cax])
        if tags is not None:
            tags = np.concatenate([tags[rest], ctags])
    return QuadResult(math.fsum(est), float(err.sum()), converged, evals, est.size)


def qmc_integrate(f, lo, hi, budget=2 ** 14, replicates=8, seed=0, tol=0.0):
    """Randomized scrambled-Sobol estimate; error is the replicate standard error."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    m = max(1, int(math.ceil(math.log2(budget))))
    rng = np.random.default_rng(seed)
    vol = float(np.prod(hi - lo))
    means = []
    for _ in range(replicates):
        u = qmc.Sobol(n, scramble=True, seed=rng).random_base2(m)
        vals = np.asarray(f(lo + (hi - lo) * u), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise QuadratureFailure("integrand returned non-finite values")
        means.append(vol * math.fsum(vals) / vals.size)
    value = math.fsum(means) / replicates
    error = float(np.std(means, ddof=1) / math.sqrt(replicates))
    return QuadResult(value, error, error <= max(tol, 0.0), replicates * 2 ** m, 1)


def _tensor_boxes(breaks):
    """Boxes of the tensor grid given sorted breakpoints per axis."""
    cells = [list(zip(b[:-1], b[1:])) for b in breaks]
    lo, hi = [], []
    for combo in itertools.product(*cells):
        lo.append([c[0] for c in combo])
        hi.append([c[1] for c in combo])
    return np.array(lo, dtype=float), np.array(hi, dtype=float)


def breakpoints(lo, hi, extra=()):
    pts = sorted({float(lo), float(hi), *(float(p) for p in extra if lo < p < hi)})
    return np.array(pts)


def integrate(f, region, cfg=None, splits=None):
    """Integrate ``f`` (points (P, N) -> values) over a box.

    ``region`` is a :class:`~renorm.testfn.Box` or a ``(lo, hi)`` pair;
    ``splits`` optionally lists interior breakpoints per axis.
    """
    cfg = cfg or QuadConfig()
    lo, hi = (region.lo, region.hi) if hasattr(region, "lo") else region
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if np.any(hi <= lo):
        return ZERO
    if cfg.uses_qmc(lo.size):
        return qmc_integrate(f, lo, hi, cfg.qmc_budget, cfg.qmc_replicates, cfg.seed,
                             max(cfg.abs_tol, 0.0))
    splits = splits or [()] * lo.size
    blo, bhi = _tensor_boxes([breakpoints(a, b, s) for a, b, s in zip(lo, hi, splits)])
    return adaptive(f, blo, bhi, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_boxes=cfg.max_subdivisions)


def geometric_breaks(r_lo, r_hi, ratio=2.0):
    pts = [r_lo]
    while pts[-1] * ratio < r_hi * (1 - 1e-12):
        pts.append(pts[-1] * ratio)
    pts.append(r_hi)
    return np.array(pts)


def sphere_map(angles, n2):
    """Unit vectors and angular Jacobian for hyperspherical angles (P, n2-1)."""
    p = angles.shape[0]
    omega = np.ones((p, n2))
    jac = np.ones(p)
    sin_prod = np.ones(p)
    for k in range(n2 - 1):
        a = angles[:, k]
        omega[:, k] = sin_prod * np.cos(a)
        if k < n2 - 2:
            jac = jac * np.sin(a) ** (n2 - 2 - k)
        sin_prod = sin_prod * np.sin(a)
    omega[:, n2 - 1] = sin_prod
    return omega, jac


def integrate_shell(f, linear_set, r_lo, r_hi, t_lo=None, t_hi=None, cfg=None):
    """Integrate ``f`` over the shell r_lo <= d(x, X) <= r_hi of a linear set.

    Coordinates: tangent t in [t_lo, t_hi], radius rho and hyperspherical
    angles on the normal sphere.  Codimension one sums both normal signs.
    """
    cfg = cfg or QuadConfig()
    n1, n2 = linear_set.tangent_dim, linear_set.codim
    if r_hi <= r_lo:
        return ZERO
    t_lo = np.zeros(0) if t_lo is None else np.atleast_1d(np.asarray(t_lo, dtype=float))
    t_hi = np.zeros(0) if t_hi is None else np.atleast_1d(np.asarray(t_hi, dtype=float))
    if t_lo.size != n1 or np.any(t_hi <= t_lo):
        if t_lo.size != n1:
            raise ValueError("tangent box does not match the set's dimension")
        return ZERO
    frame = np.vstack([linear_set.tangent, linear_set.normal]) if n1 else linear_set.normal
    anchor = linear_set.anchor

    def mapped(y):
        rho = y[:, n1]
        if n2 == 1:
            out = 0.0
            for s in (1.0, -1.0):
                coords = np.concatenate([y[:, :n1], (s * rho)[:, None]], axis=1)
                out = out + f(anchor + coords @ frame)
            return out
        omega, jac = sphere_map(y[:, n1 + 1:], n2)
        coords = np.concatenate([y[:, :n1], rho[:, None] * omega], axis=1)
        return f(anchor + coords @ frame) * jac * rho ** (n2 - 1)

    ang_hi = [math.pi] * (n2 - 2) + [2 * math.pi] if n2 >= 2 else []
    lo = np.concatenate([t_lo, [r_lo], np.zeros(len(ang_hi))])
    hi = np.concatenate([t_hi, [r_hi], ang_hi])
    if cfg.uses_qmc(lo.size):
        return qmc_integrate(mapped, lo, hi, cfg.qmc_budget, cfg.qmc_replicates, cfg.seed, cfg.abs_tol)
    breaks = [breakpoints(a, b) for a, b in zip(t_lo, t_hi)]
    breaks.append(geometric_breaks(r_lo, r_hi))
    for a in ang_hi:
        breaks.append(np.linspace(0.0, a, 5 if a > 4 else 3))
    blo, bhi = _tensor_boxes(breaks)
    return adaptive(mapped, blo, bhi, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_boxes=cfg.max_subdivisions)
