"""Cutoff family chi_lambda, dyadic annulus weights and the scaling window."""
from __future__ import annotations

import math

import numpy as np

from . import jets as J

_T_MIN = 1.0 / 700.0


def _g(t):
    ok = J.value(t) > _T_MIN
    return J.where(ok, J.exp(-1.0 / J.where(ok, t, 1.0)), 0.0)


def smoothstep(r, lo=0.125, hi=1.0):
    """Smooth nonincreasing step: 1 for r <= lo, 0 for r >= hi; accepts jets."""
    a = _g(hi - r)
    b = _g(r - lo)
    return a / (a + b)


def theta(r):
    """Cutoff profile with plateau 1 on [0, 1/8] and 0 on [1, inf)."""
    return smoothstep(r, 0.125, 1.0)


def profile_derivatives(profile, kmax=6, samples=4001, lo=0.0, hi=1.5):
    """Sampled max |profile^(k)| for k = 0..kmax."""
    r = np.linspace(lo, hi, samples)
    jet = profile(J.Jet.variable(r, 0, 1, kmax))
    return [float(np.max(np.abs(jet.c[k]))) * math.factorial(k) for k in range(kmax + 1)]


class CutoffFamily:
    """chi_lambda(x) = profile(d(x, X) / lambda)."""

    def __init__(self, singular_set, profile=theta, plateau=0.125):
        self.set = singular_set
        self.profile = profile
        self.plateau = plateau
        self._bounds = None

    def chi_components(self, lam, comps):
        return self.profile(self.set.distance_components(comps) / lam)

    def chi_of_distance(self, lam, dist):
        return self.profile(dist / lam)

    def chi(self, lam, x):
        lam = float(lam)
        if lam <= 0:
            raise ValueError("lambda must be positive")
        return np.asarray(self.profile(self.set.distance(x) / lam), dtype=float)

    @property
    def derivative_bounds(self):
        if self._bounds is None:
            self._bounds = profile_derivatives(self.profile)
        return self._bounds

    def annulus_weight(self, j, x, base_scale=1.0):
        return annulus_weight(self, j, x, base_scale)


def annulus_weight(family, j, x, base_scale=1.0):
    """psi_j = chi_{base 2^-j} - chi_{base 2^-j-1}."""
    if j < 0:
        raise ValueError("j must be nonnegative")
    lam = base_scale * 2.0 ** (-j)
    return family.chi(lam, x) - family.chi(lam / 2, x)


def annulus_of_distance(family, j, dist, base_scale=1.0):
    lam = base_scale * 2.0 ** (-j)
    return family.profile(dist / lam) - family.profile(2.0 * dist / lam)


def window_profile(r):
    """Radial cutoff for the scaling window: 1 on [0, 1/2], 0 on [2, inf)."""
    return smoothstep(r, 0.5, 2.0)


def scaling_window_radial(r, profile=window_profile):
    """psi(r) = -r chi'(r); accepts arrays (jets of r are not needed here)."""
    r = np.asarray(r, dtype=float)
    d = profile(J.Jet.variable(r, 0, 1, 1)).c[1]
    return -r * d


def scaling_window(x2, profile=window_profile):
    """psi(x2) = -|x2| chi'(|x2|) for normal vectors x2 of shape (..., n2)."""
    r = np.linalg.norm(np.atleast_1d(np.asarray(x2, dtype=float)), axis=-1)
    return scaling_window_radial(r, profile)


__all__ = [
    "CutoffFamily",
    "annulus_weight",
    "annulus_of_distance",
    "scaling_window",
    "scaling_window_radial",
    "smoothstep",
    "theta",
    "window_profile",
]
