"""Extension of distributions across a singular set by dyadic Taylor subtraction.

The renormalized pairing of a kernel t with a test function phi is

    <t, (1 - chi_base) phi> + sum_j <t, psi_j (phi - P_m phi)>

where psi_j are the dyadic annulus weights.  Terms decay geometrically once
m + 1 exceeds the growth excess, and the series tail is extrapolated.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import jets as J
from .cutoff import annulus_of_distance, scaling_window_radial
from .errors import DivergentConfiguration, NotLocallyFinite
from .kernel import SingularKernel, multiply
from .quad import ZERO, QuadConfig, integrate, integrate_shell
from .scheme import RenormScheme
from .testfn import Box, grid_points, seminorm_value, standard_bump


def thread_count():
    try:
        return max(1, int(os.environ.get("RENORM_THREADS", "1")))
    except ValueError:
        return 1


def growth_excess(growth, codim, log_flag=False):
    """Growth beyond what the codimension absorbs, with a margin for logs."""
    return growth + (0.1 if log_flag else 0.0) - codim


def default_order(growth, codim):
    return max(0, math.ceil(growth - codim - 1e-12))


def required_order(excess):
    return max(0, math.floor(excess + 1e-12))


@dataclass
class PairResult:
    value: float
    error: float
    terms: list = field(default_factory=list)
    term_errors: list = field(default_factory=list)
    outer: float = 0.0
    tail: float = 0.0
    order: int = 0
    ratio: float = float("nan")
    converged: bool = True

    def to_json(self):
        return {"value": self.value, "err": self.error, "terms": list(self.terms), "tail": self.tail,
                "outer": self.outer, "order": self.order, "ratio": self.ratio, "converged": self.converged}


class KernelTarget:
    """Adapter giving a kernel the region-integration interface used by the engine."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.dim = kernel.dim
        self.growth = kernel.growth
        self.log_flag = kernel.log_flag

    def integrate_region(self, g, box, shell, singular_set, quad):
        k = self.kernel.expr
        if shell is not None and singular_set.has_split:
            t_lo, t_hi = singular_set.tangent_range(box.lo, box.hi)
            return integrate_shell(lambda x: k(x.T) * g(x.T), singular_set, shell[0], shell[1], t_lo, t_hi, quad)
        return integrate(lambda x: k(x.T) * g(x.T), box, quad)


class RenormalizedDistribution:
    """Extension of ``target`` across ``scheme.set``.

    ``target`` is a :class:`SingularKernel` or an object providing
    ``dim``, ``growth``, ``log_flag`` and ``integrate_region``.
    ``subtract`` is ``"auto"`` (subtract only for non-integrable targets),
    ``True`` or ``False``.
    """

    def __init__(self, target, scheme=None, quad=None, j_max=40, j_min=6, tail=True, subtract="auto"):
        self.kernel = target if isinstance(target, SingularKernel) else None
        self.target = KernelTarget(target) if isinstance(target, SingularKernel) else target
        if scheme is None:
            if self.kernel is None:
                raise ValueError("a scheme is required for non-kernel targets")
            s = target.set
            scheme = RenormScheme(s, default_order(target.growth, s.codim))
        self.scheme = scheme
        self.quad = quad or QuadConfig(rel_tol=1e-10)
        self.j_max = int(j_max)
        self.j_min = int(j_min)
        self.tail = bool(tail)
        self.subtract = subtract
        if self.target.dim != scheme.set.dim:
            raise ValueError("target and scheme live in different dimensions")

    @property
    def dim(self):
        return self.target.dim

    @property
    def excess(self):
        return growth_excess(self.target.growth, self.scheme.set.codim, self.target.log_flag)

    @property
    def subtracts(self):
        if self.subtract == "auto":
            return self.excess >= 0
        return bool(self.subtract)

    def check_order(self):
        exc = self.excess
        if exc >= 0 and not self.subtracts:
            raise DivergentConfiguration("non-integrable target without subtraction", required_order(exc))
        if self.subtracts and self.scheme.order + 1 <= exc:
            raise DivergentConfiguration(
                f"order {self.scheme.order} too low: need m + 1 > {exc:g}", required_order(exc))

    def ratio_bound(self):
        exc = self.excess
        if self.subtracts:
            return 2.0 ** (-(self.scheme.order + 1 - exc))
        return 2.0 ** exc

    def _g_term(self, phi, j):
        sch = self.scheme
        fam = sch.cutoff
        subtract = self.subtracts

        def g(comps):
            dist = sch.set.distance_components(comps)
            w = annulus_of_distance(fam, j, dist, sch.base_scale)
            val = phi.expr(comps)
            if subtract:
                val = val - sch.project_components(phi, comps)
            return w * val

        return g

    def _g_outer(self, phi):
        sch = self.scheme

        def g(comps):
            dist = sch.set.distance_components(comps)
            return (1.0 - sch.cutoff.chi_of_distance(sch.base_scale, dist)) * phi.expr(comps)

        return g

    def _integrate(self, g, box, shell, quad=None):
        return self.target.integrate_region(g, box, shell, self.scheme.set, quad or self.quad)

    def pair(self, phi):
        """Renormalized pairing as a :class:`PairResult`."""
        if phi.dim != self.dim:
            raise ValueError("test function dimension does not match")
        self.check_order()
        if self.subtracts:
            phi._require(self.scheme.order)
        sch = self.scheme
        s = sch.set
        box = phi.support
        lam0 = sch.base_scale
        plateau = sch.cutoff.plateau
        d_lo = s.box_distance(box.lo, box.hi)
        r_max = s.box_max_distance(box.lo, box.hi) if hasattr(s, "box_max_distance") else math.inf

        if r_max > lam0 * plateau:
            shell = (max(lam0 * plateau, d_lo), r_max) if s.has_split else None
            outer = self._integrate(self._g_outer(phi), box, shell)
        else:
            outer = ZERO

        terms, errs = [], []
        converged = outer.converged
        threads = thread_count()
        tail = tail_err = 0.0
        ratio = float("nan")
        r_bound = self.ratio_bound()
        previous = None
        j = 0
        done = False
        while not done and j <= self.j_max:
            batch = list(range(j, min(j + threads, self.j_max + 1)))
            active = [k for k in batch if lam0 * 2.0 ** (-k) > d_lo]
            # terms far below the running scale only need absolute accuracy
            scale = abs(outer.value) + math.fsum(abs(t) for t in terms)
            cfg = self.quad.with_(abs_tol=max(self.quad.abs_tol, self.quad.rel_tol * scale / 8))

            def run(k, cfg=cfg):
                r_hi = lam0 * 2.0 ** (-k)
                shell = (max(r_hi * plateau / 2.0, d_lo), r_hi)
                return self._integrate(self._g_term(phi, k), box.enlarged(r_hi), shell, cfg)

            if threads > 1 and len(active) > 1:
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    results = list(pool.map(run, active))
            else:
                results = [run(k) for k in active]
            for res in results:
                terms.append(res.value)
                errs.append(res.error)
                converged = converged and res.converged
            if len(active) < len(batch):
                tail = tail_err = 0.0
                done = True  # the remaining annuli miss the support
                break
            j = batch[-1] + 1
            if not self.tail or len(terms) < 2:
                continue
            tail, ratio = self._tail(terms, r_bound)
            total = outer.value + math.fsum(terms) + tail
            tail_err = abs(total - previous) if previous is not None else abs(tail)
            previous = total
            target = max(self.quad.abs_tol, self.quad.rel_tol * abs(total))
            if len(terms) >= self.j_min and tail_err <= target:
                done = True
        if not done and terms:
            if not self.tail:
                tail_err = abs(terms[-1]) * r_bound / (1 - r_bound) if r_bound < 1 else math.inf
            target = max(self.quad.abs_tol, 1e-6 * abs(outer.value + math.fsum(terms) + tail))
            converged = converged and tail_err <= target
        value = outer.value + math.fsum(terms) + tail
        error = outer.error + math.fsum(errs) + tail_err
        return PairResult(value, error, terms, errs, outer.value, tail, sch.order if self.subtracts else 0,
                          ratio, converged)

    @staticmethod
    def _tail(terms, r_bound):
        """Geometric extrapolation of the remaining terms from the last observed ratio."""
        last, prev = terms[-1], terms[-2]
        if last == 0.0:
            return 0.0, 0.0
        ratio = last / prev if prev != 0 else r_bound
        r = ratio if 0 < ratio < 1 else min(r_bound, 0.99)
        return last * r / (1 - r), ratio

    def value(self, phi):
        return self.pair(phi).value


def direct_pairing(kernel, phi, quad=None):
    """Plain quadrature of kernel * phi over the support box (phi must avoid the set)."""
    quad = quad or QuadConfig(rel_tol=1e-10)
    k, f = kernel.expr, phi.expr
    s = kernel.set
    if s.has_split:
        d_lo = s.box_distance(phi.support.lo, phi.support.hi)
        if d_lo > 0:
            t_lo, t_hi = s.tangent_range(phi.support.lo, phi.support.hi)
            return integrate_shell(lambda x: k(x.T) * f(x.T), s, d_lo, s.box_max_distance(phi.support.lo, phi.support.hi),
                                   t_lo, t_hi, quad)
    return integrate(lambda x: k(x.T) * f(x.T), phi.support, quad)


# growth fits ---------------------------------------------------------------

@dataclass(frozen=True)
class ProbeConfig:
    k_min: int = 2
    k_max: int = 8
    seminorm_order: int | None = None
    grid_level: int = 5

    @classmethod
    def from_json(cls, desc):
        return cls(**{k: v for k, v in (desc or {}).items() if k in cls.__dataclass_fields__})


@dataclass
class GrowthFit:
    C: float
    s: float
    m: int
    residual: float
    slope: float = 0.0
    flagged: bool = False

    def to_json(self):
        return {"C": self.C, "s": self.s, "m": self.m, "residual": self.residual, "slope": self.slope,
                "flagged": self.flagged}


def fit_growth(kernel, singular_set=None, probe=None, quad=None):
    """Fit log|<t, phi_k>| + log||phi_k||_m against -log r_k for shrinking probes."""
    singular_set = singular_set or kernel.set
    probe = probe or ProbeConfig()
    quad = quad or QuadConfig(rel_tol=1e-9, max_subdivisions=20000)
    m = kernel.dim if probe.seminorm_order is None else int(probe.seminorm_order)
    xs, ys = [], []
    for k in range(probe.k_min, probe.k_max + 1):
        r = 2.0 ** (-k)
        phi = standard_bump(singular_set.probe_point(r), r / 4, max_order=max(m, 1))
        val = integrate(lambda x: kernel.expr(x.T) * phi.expr(x.T), phi.support, quad).value
        if val == 0.0:
            continue
        norm = seminorm_value(phi, m, phi.support, probe.grid_level + k)
        xs.append(-math.log(r))
        ys.append(math.log(abs(val)) + math.log(norm))
    if len(xs) < 2:
        return GrowthFit(0.0, 0.0, m, 0.0, 0.0, True)
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = float(np.max(np.abs(np.asarray(ys) - (slope * np.asarray(xs) + intercept))))
    return GrowthFit(float(math.exp(intercept)), float(max(0.0, slope)), m, resid, float(slope), False)


@dataclass(frozen=True)
class ScalingConfig:
    k_min: int = 4
    k_max: int = 32
    fit_from: int | None = None


def scaling_profile(kernel, singular_set=None, cfg=None, quad=None):
    """Pairings <t o Phi^lambda, psi> for lambda = 2^-k with a fixed corona test function."""
    s = singular_set or kernel.set
    if not s.has_split:
        raise ValueError("scaling degree needs a linear scaling structure")
    cfg = cfg or ScalingConfig()
    quad = quad or QuadConfig(rel_tol=1e-11, abs_tol=1e-300)
    n1 = s.tangent_dim
    ks = np.arange(cfg.k_min, cfg.k_max + 1)
    vals = []
    for k in ks:
        lam = 2.0 ** (-float(k))

        def f(x):
            comps = x.T
            t = s.tangent_coordinates(comps) if n1 else []
            h = s.normal_coordinates(comps)
            rho = np.sqrt(sum(hk * hk for hk in h))
            weight = scaling_window_radial(rho)
            for tk in t:
                weight = weight * np.where(np.abs(tk) < 1, np.exp(-1.0 / np.maximum(1 - tk * tk, 1e-300)), 0.0)
            scaled = s.anchor[:, None] + (x.T - s.anchor[:, None] - np.asarray(s.normal.T @ np.asarray(h))) \
                + lam * np.asarray(s.normal.T @ np.asarray(h))
            return kernel.expr(scaled) * weight

        t_lo = -np.ones(n1)
        vals.append(integrate_shell(f, s, 0.5, 2.0, t_lo, -t_lo, quad).value)
    return ks, np.array(vals)


def scaling_degree(kernel, singular_set=None, cfg=None, quad=None):
    """Fitted slope of log|pairing| against log lambda over the tail of the dyadic range."""
    cfg = cfg or ScalingConfig()
    ks, vals = scaling_profile(kernel, singular_set, cfg, quad)
    if np.all(vals == 0):
        return 0.0
    start = cfg.fit_from if cfg.fit_from is not None else (cfg.k_min + cfg.k_max) // 2
    sel = (ks >= start) & (vals != 0)
    loglam = -ks[sel] * math.log(2.0)
    slope, _ = np.polyfit(loglam, np.log(np.abs(vals[sel])), 1)
    return float(slope)


def moderate_from_scaling(degree, codim):
    return max(0.0, -(float(degree) + float(codim)))


# positive measures ----------------------------------------------------------

@dataclass
class MeasureExtension:
    value: float
    partial_sums: list
    increments: list
    converged: bool

    def to_json(self):
        return {"value": self.value, "partial_sums": self.partial_sums, "increments": self.increments,
                "converged": self.converged}


def extend_positive_measure(kernel, singular_set=None, phi=None, quad=None, mass_bound=None, n_max=200,
                            stall_ratio=0.95, stall_window=6):
    """Monotone limit of <mu, (1 - chi_{2^-n}) phi> for a nonnegative kernel and phi >= 0."""
    s = singular_set or kernel.set
    quad = quad or QuadConfig(rel_tol=1e-11)
    samples = grid_points(phi.support, 9 if phi.dim <= 3 else 5)
    if np.any(phi(samples) < -1e-14):
        raise ValueError("positive extension needs phi >= 0")
    scheme = RenormScheme(s, 0)
    rd = RenormalizedDistribution(kernel, scheme, quad, subtract=False)
    box = phi.support
    fam = scheme.cutoff
    d_lo = s.box_distance(box.lo, box.hi)
    outer = rd._integrate(rd._g_outer(phi), box, (max(fam.plateau, d_lo), s.box_max_distance(box.lo, box.hi)))
    sums = [outer.value]
    incs = []
    for n in range(n_max):
        if 2.0 ** (-n) <= d_lo:
            return MeasureExtension(sums[-1], sums, incs, True)
        r_hi = 2.0 ** (-n)

        def g(comps, n=n):
            dist = s.distance_components(comps)
            return annulus_of_distance(fam, n, dist) * phi.expr(comps)

        inc = rd._integrate(g, box.enlarged(r_hi), (max(r_hi * fam.plateau / 2, d_lo), r_hi)).value
        if inc < -1e-12 * max(1.0, abs(sums[-1])):
            raise ValueError("negative increment: kernel or phi is not nonnegative")
        incs.append(inc)
        sums.append(sums[-1] + inc)
        if mass_bound is not None and sums[-1] > mass_bound:
            raise NotLocallyFinite(f"partial sums exceed mass bound {mass_bound}", sums)
        tol = max(quad.abs_tol, 1e-12 * abs(sums[-1]))
        if inc <= tol:
            return MeasureExtension(sums[-1], sums, incs, True)
        if len(incs) >= 2 * stall_window:
            recent = np.asarray(incs[-stall_window:])
            if np.all(recent[1:] >= stall_ratio * recent[:-1]):
                raise NotLocallyFinite("increments do not decay: mass near the set is infinite", sums)
        if len(incs) >= 8 and incs[-2] > 0 and incs[-3] > 0:
            r, r_prev = incs[-1] / incs[-2], incs[-2] / incs[-3]
            if 0 < r < stall_ratio and abs(r - r_prev) < 1e-3:
                extra = incs[-1] * r / (1 - r)
                if extra * max(abs(r - r_prev), 1e-6) / (1 - r) <= 1e-9 * abs(sums[-1]):
                    return MeasureExtension(sums[-1] + extra, sums, incs, True)
    raise NotLocallyFinite("partial sums did not settle", sums)


# products ---------------------------------------------------------------------

def renormalized_product(f, rd, order=None):
    """Extension of the pointwise product f * t, raising the order if growth requires it."""
    if isinstance(rd, RenormalizedDistribution):
        if rd.kernel is None:
            raise ValueError("products need a kernel-backed distribution")
        base, scheme, quad = rd.kernel, rd.scheme, rd.quad
    else:
        base, scheme, quad = rd, None, None
    prod = multiply(f, base)
    s = scheme.set if scheme is not None else base.set
    need = default_order(prod.growth, s.codim)
    exc = growth_excess(prod.growth, s.codim, prod.log_flag)
    need = max(need, required_order(exc)) if exc >= 0 else need
    if order is not None:
        need = max(int(order), required_order(exc) if exc >= 0 else 0)
    if scheme is None:
        scheme = RenormScheme(s, need)
    elif scheme.order < need or order is not None:
        scheme = scheme.with_order(max(need, scheme.order) if order is None else need)
    kwargs = {} if quad is None else {"quad": quad}
    if isinstance(rd, RenormalizedDistribution):
        kwargs.update(j_max=rd.j_max, j_min=rd.j_min, tail=rd.tail, subtract=rd.subtract)
    return RenormalizedDistribution(prod, scheme, **kwargs)


__all__ = [
    "Box",
    "GrowthFit",
    "MeasureExtension",
    "PairResult",
    "ProbeConfig",
    "RenormalizedDistribution",
    "ScalingConfig",
    "default_order",
    "direct_pairing",
    "extend_positive_measure",
    "fit_growth",
    "moderate_from_scaling",
    "renormalized_product",
    "scaling_degree",
    "scaling_profile",
]
