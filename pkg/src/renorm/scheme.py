"""Taylor-type renormalization schemes: projection P_m, remainder I_m, counterterms."""
from __future__ import annotations

import numpy as np

from . import jets as J
from .cutoff import CutoffFamily
from .errors import UnsupportedSetError
from .geometry import as_components
from .quad import QuadConfig, integrate_shell


class RenormScheme:
    """Order-m fiberwise Taylor scheme along a linear set, anchored at ``base_scale``."""

    def __init__(self, singular_set, order, cutoff=None, base_scale=1.0):
        if not singular_set.has_split:
            raise UnsupportedSetError(f"{singular_set!r} has no transverse split")
        if order < 0:
            raise ValueError("order must be nonnegative")
        if not 0 < base_scale <= 1:
            raise ValueError("base_scale must lie in (0, 1]")
        self.set = singular_set
        self.order = int(order)
        self.cutoff = cutoff or CutoffFamily(singular_set)
        self.base_scale = float(base_scale)

    def with_order(self, order):
        return RenormScheme(self.set, order, self.cutoff, self.base_scale)

    def with_base_scale(self, base_scale):
        return RenormScheme(self.set, self.order, self.cutoff, base_scale)

    def project_components(self, phi, comps):
        """P_m phi on components; accepts univariate jets for the components."""
        m = self.order
        phi._require(m)
        base, h = self.set.split_components(comps)
        if not isinstance(comps, np.ndarray) and any(isinstance(c, J.Jet) for c in comps):
            if m == 0:
                return phi.expr(base)
            return _project_jets(phi, base, h, m)
        base = np.asarray(base, dtype=float)
        h = np.asarray(h, dtype=float)
        line = J.taylor_line(base, h, m)
        out = phi.expr(line)
        if not isinstance(out, J.Jet):
            return np.broadcast_to(np.asarray(out, dtype=float), base.shape[1:])
        return out.c.sum(axis=0)

    def remainder_components(self, phi, comps):
        return phi.expr(comps) - self.project_components(phi, comps)

    def to_json(self):
        return {"set": self.set.to_json(), "order": self.order, "base_scale": self.base_scale,
                "profile": "smoothstep"}

    @classmethod
    def from_json(cls, desc):
        from .geometry import set_from_json
        return cls(set_from_json(desc["set"]), int(desc.get("order", 0)), None,
                   float(desc.get("base_scale", 1.0)))

    def __repr__(self):
        return f"RenormScheme({self.set!r}, m={self.order}, base_scale={self.base_scale})"


def _lift(x, order):
    """Embed a univariate jet (or array) in tau as a bivariate jet in (sigma, tau)."""
    if not isinstance(x, J.Jet):
        return J.Jet.constant(x, 2, order)
    out = J.Jet.constant(np.zeros(x.shape), 2, order)
    for k in range(x.order + 1):
        out.c[J._tables(2, order)[0][(0, k)]] = x.c[k]
    return out


def _project_jets(phi, base, h, m):
    """P_m phi along jets x(tau): expand phi(b + sigma h) in both sigma and tau."""
    k = max(c.order for c in list(base) + list(h) if isinstance(c, J.Jet))
    order = m + k
    sigma = J.Jet.variable(0.0, 0, 2, order)
    pts = [_lift(b, order) + sigma * _lift(hk, order) for b, hk in zip(base, h)]
    out = phi.expr(pts)
    shape = next(c.shape for c in list(base) + list(h) if isinstance(c, J.Jet))
    if not isinstance(out, J.Jet):
        out = J.Jet.constant(np.broadcast_to(out, shape), 2, order)
    index = J._tables(2, order)[0]
    coeffs = np.zeros((k + 1,) + out.shape)
    for b in range(k + 1):
        for a in range(m + 1):
            coeffs[b] += out.c[index[(a, b)]]
    return J.Jet(coeffs, 1, k)


def taylor_project(scheme, phi):
    """Callable x -> (P_m phi)(x) on points of shape (..., N)."""
    return lambda x: np.asarray(scheme.project_components(phi, as_components(x)), dtype=float)


def taylor_remainder(scheme, phi):
    """Callable x -> (I_m phi)(x) = phi(x) - (P_m phi)(x)."""
    return lambda x: np.asarray(scheme.remainder_components(phi, as_components(x)), dtype=float)


def counterterm_pairing(scheme, kernel, phi, lam, quad=None):
    """Quadrature of t * (chi_base - chi_lam) * P_m phi over the shell between lam/8 and the base scale.

    Returns a :class:`~renorm.quad.QuadResult`; diverges as lam -> 0 for
    non-integrable kernels.
    """
    quad = quad or QuadConfig(rel_tol=1e-9)
    lam = float(lam)
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    lam0 = scheme.base_scale
    fam = scheme.cutoff
    r_lo = min(lam, lam0) * fam.plateau
    r_hi = max(lam, lam0)
    s = scheme.set
    t_lo, t_hi = s.tangent_range(*(phi.support.enlarged(r_hi).lo, phi.support.enlarged(r_hi).hi))

    def f(x):
        comps = x.T
        dist = np.sqrt(s.sq_distance_components(comps))
        w = fam.chi_of_distance(lam0, dist) - fam.chi_of_distance(lam, dist)
        return kernel.expr(comps) * w * scheme.project_components(phi, comps)

    return integrate_shell(f, s, r_lo, r_hi, t_lo, t_hi, quad)
