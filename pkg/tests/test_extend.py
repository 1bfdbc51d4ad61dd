import math

import numpy as np
import pytest
from scipy import integrate as sint

from renorm.cutoff import theta
from renorm.errors import DivergentConfiguration, NotLocallyFinite
from renorm.extend import (ProbeConfig, RenormalizedDistribution, ScalingConfig, default_order, direct_pairing,
                           extend_positive_measure, fit_growth, moderate_from_scaling, renormalized_product,
                           scaling_degree)
from renorm.geometry import AffineSubspace, Point
from renorm.kernel import constant_kernel, power_log_kernel
from renorm.scheme import RenormScheme
from renorm.testfn import standard_bump, with_vanishing_jets

X = Point([0.0])


def _f(phi):
    return lambda x: float(phi(np.array([[x]]))[0])


def hadamard_oracle(phi, hi):
    """int_0^B (phi - phi(0))/x + int_B^hi phi/x, B the effective radius of the smooth cutoff."""
    c, _ = sint.quad(lambda u: (1 - theta(u)) / u, 0.125, 1, epsabs=1e-15, limit=200)
    b = math.exp(-c)
    f = _f(phi)
    f0 = f(0.0)
    val, _ = sint.quad(lambda x: (f(x) - f0) / x, 0, b, epsabs=1e-14, limit=200)
    if hi > b:
        val += sint.quad(lambda x: f(x) / x, b, hi, epsabs=1e-14, limit=200)[0]
    return val


def test_hadamard_finite_part_oracle():
    k = power_log_kernel(X, 1.0, half_line=True)
    rd = RenormalizedDistribution(k, RenormScheme(X, 0))
    phi = standard_bump([0.0], 2.0)
    res = rd.pair(phi)
    assert res.converged
    assert res.value == pytest.approx(hadamard_oracle(phi, 2.0), rel=1e-6)


def test_restriction_off_set():
    k = power_log_kernel(X, 1.0, half_line=True)
    rd = RenormalizedDistribution(k, RenormScheme(X, 0))
    phi = standard_bump([1.5], 0.5)
    oracle, _ = sint.quad(lambda x: _f(phi)(x) / x, 1, 2, epsabs=1e-14)
    assert rd.pair(phi).value == pytest.approx(oracle, rel=1e-9)
    assert direct_pairing(k, phi).value == pytest.approx(oracle, rel=1e-9)


def test_integrable_kernel_is_plain_integral():
    k = power_log_kernel(X, 0.5)
    phi = standard_bump([0.2], 1.0)
    f = _f(phi)
    oracle, _ = sint.quad(lambda x: f(x) / math.sqrt(abs(x)), -0.8, 1.2, points=[0], epsabs=1e-14, limit=200)
    rd = RenormalizedDistribution(k)
    assert rd.scheme.order == 0 and not rd.subtracts
    assert rd.pair(phi).value == pytest.approx(oracle, abs=1e-6)


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5, 2.5])
def test_dyadic_ratio_law(s):
    m = math.ceil(s)
    # one-sided, so odd Taylor orders do not cancel by symmetry
    k = power_log_kernel(X, s, half_line=True)
    rd = RenormalizedDistribution(k, RenormScheme(X, m), tail=False, j_max=10, j_min=11, subtract=True)
    terms = np.array(rd.pair(standard_bump([0.1], 1.0)).terms)
    inc = np.abs(terms[4:11])
    ratio = math.exp(np.polyfit(np.arange(inc.size), np.log(inc), 1)[0])
    # the pairing grows like d^-(s - codim), so that is the exponent in the law
    target = 2.0 ** -(m + 1 - (s - 1))
    assert rd.ratio_bound() == pytest.approx(target)
    assert 0.5 * target <= ratio <= 2 * target


def test_refuses_divergent_order():
    rd = RenormalizedDistribution(power_log_kernel(X, 2.0), RenormScheme(X, 0))
    with pytest.raises(DivergentConfiguration) as info:
        rd.pair(standard_bump([0.0], 1.0))
    assert info.value.required_order == 1
    assert default_order(2.0, 1) == 1 and default_order(0.5, 1) == 0


def test_scheme_change_is_local():
    k = power_log_kernel(X, 1.0)
    r1 = RenormalizedDistribution(k, RenormScheme(X, 1, base_scale=1.0))
    r2 = RenormalizedDistribution(k, RenormScheme(X, 1, base_scale=0.5))
    phi = standard_bump([0.2], 1.0)
    v = with_vanishing_jets(phi, X, 1)
    assert abs(r1.pair(v).value - r2.pair(v).value) <= 1e-8
    assert abs(r1.pair(phi).value - r2.pair(phi).value) >= 1e-2


def test_linearity():
    k = power_log_kernel(X, 1.5)
    rd = RenormalizedDistribution(k, RenormScheme(X, 1))
    f, g = standard_bump([0.1], 0.7), standard_bump([-0.2], 0.5)
    lhs = rd.pair(f.scaled(0.3) + g.scaled(-2.0)).value
    rhs = 0.3 * rd.pair(f).value - 2.0 * rd.pair(g).value
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


def test_extension_in_codimension_two():
    # |h|^-2.5 along a line in R^3; off-set pairing equals direct quadrature
    s = AffineSubspace([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]])
    k = power_log_kernel(s, 2.5)
    rd = RenormalizedDistribution(k)
    assert rd.scheme.order == 1
    off = standard_bump([0.0, 0.6, 0.4], 0.3)
    a, b = rd.pair(off), direct_pairing(k, off)
    assert abs(a.value - b.value) <= a.error + b.error


def test_fit_growth_examples():
    assert 0.9 <= fit_growth(power_log_kernel(X, 1.0)).s <= 1.1
    assert fit_growth(constant_kernel(X)).s == pytest.approx(0.0, abs=0.05)
    a = AffineSubspace([0.0, 0.0], [[1.0, 0.0]])
    assert fit_growth(power_log_kernel(a, 2.0)).s == pytest.approx(2.0, abs=0.1)


def test_fit_growth_flags_vanishing_kernel():
    fit = fit_growth(constant_kernel(X, 0.0), X, ProbeConfig(k_min=2, k_max=4))
    assert fit.flagged and fit.s == 0.0


def test_scaling_degree_examples():
    a = AffineSubspace([0.0, 0.0], [[1.0, 0.0]])
    assert scaling_degree(power_log_kernel(a, 1.5)) == pytest.approx(-1.5, abs=0.05)
    assert scaling_degree(constant_kernel(a)) == pytest.approx(0.0, abs=0.05)
    deg = scaling_degree(power_log_kernel(Point([0.0, 0.0]), 1.0, q=1), cfg=ScalingConfig(k_max=40))
    assert deg == pytest.approx(-1.0, abs=0.1)


def test_moderate_from_scaling():
    assert moderate_from_scaling(-1.5, 1) == 0.5
    assert moderate_from_scaling(0.0, 2) == 0.0
    assert moderate_from_scaling(-3.0, 1) == 2.0


def test_positive_measure():
    phi = standard_bump([0.0], 1.0)
    f = _f(phi)
    oracle, _ = sint.quad(lambda x: f(x) / math.sqrt(abs(x)), -1, 1, points=[0], epsabs=1e-14, limit=200)
    assert extend_positive_measure(power_log_kernel(X, 0.5), X, phi).value == pytest.approx(oracle, abs=1e-6)
    total, _ = sint.quad(f, -1, 1, epsabs=1e-14)
    assert extend_positive_measure(constant_kernel(X), X, phi).value == pytest.approx(total, abs=1e-9)
    with pytest.raises(NotLocallyFinite):
        extend_positive_measure(power_log_kernel(X, 1.0), X, phi)


def test_renormalized_product_finite_part():
    k1 = power_log_kernel(X, 1.0)
    prod = renormalized_product(k1, RenormalizedDistribution(k1, RenormScheme(X, 1)))
    assert prod.scheme.order == 1 and prod.kernel.growth == 2.0
    phi = standard_bump([0.2], 1.0)
    f = _f(phi)
    f0 = f(0.0)
    d1 = phi.eval_derivative((1,), np.array([[0.0]]))[0]
    fp = sint.quad(lambda x: (f(x) - f0 - x * d1) / x ** 2, -1, 1, points=[0], epsabs=1e-14, limit=200)[0]
    fp += sint.quad(lambda x: f(x) / x ** 2, 1, 1.2, epsabs=1e-14)[0] - 2 * f0
    kappa = 2 * (sint.quad(lambda u: (1 - theta(u)) / u ** 2, 0.125, 1, epsabs=1e-15)[0] + 1)
    assert prod.pair(phi).value == pytest.approx(fp + f0 * kappa, abs=1e-6)
    off = standard_bump([1.5], 0.4)
    oracle = sint.quad(lambda x: _f(off)(x) / x ** 2, 1.1, 1.9, epsabs=1e-14)[0]
    assert prod.pair(off).value == pytest.approx(oracle, rel=1e-9)


def test_product_with_unit_is_identity():
    k = power_log_kernel(X, 1.0)
    rd = RenormalizedDistribution(k, RenormScheme(X, 1))
    prod = renormalized_product(constant_kernel(X), rd)
    phi = standard_bump([0.1], 0.8)
    assert prod.pair(phi).value == pytest.approx(rd.pair(phi).value, abs=1e-12)
