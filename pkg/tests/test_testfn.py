import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sint

from renorm.errors import InsufficientOrder, UnsupportedSetError
from renorm.geometry import AffineSubspace, BigDiagonal, Point, SmallDiagonal
from renorm.testfn import (Box, Seminorm, from_json, seminorm_value, standard_bump, tensor_product,
                           with_vanishing_jets)


def _bump_1d(x):
    return np.where(np.abs(x) < 1, np.exp(-1.0 / np.maximum(1 - x * x, 1e-300)), 0.0)


def test_bump_values():
    b = standard_bump([0.0], 1.0)
    assert b([0.0]) == pytest.approx(math.exp(-1))
    assert b([1.0]) == 0.0 and b([-1.5]) == 0.0


def test_bump_integral_oracle():
    oracle, _ = sint.quad(lambda x: math.exp(-1 / (1 - x * x)), -1, 1, epsabs=1e-14)
    assert oracle == pytest.approx(0.443994, abs=1e-5)
    b = standard_bump([0.0], 1.0)
    x = np.linspace(-1, 1, 200001)
    assert np.trapezoid(b(x[:, None]), x) == pytest.approx(oracle, abs=1e-9)


def test_derivatives_match_finite_differences():
    b = standard_bump([0.2, -0.1], 0.9)
    rng = np.random.default_rng(3)
    pts = 0.2 + 0.5 * rng.uniform(-1, 1, size=(50, 2))
    h = 1e-5
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (b(pts + e) - b(pts - e)) / (2 * h)
        alpha = (1, 0) if k == 0 else (0, 1)
        exact = b.eval_derivative(alpha, pts)
        np.testing.assert_allclose(exact, fd, rtol=1e-5, atol=1e-9)


def test_high_order_derivative_against_closed_form():
    # f(x) = exp(-1/(1-x^2)); compare f'' from the jets with the symbolic expression
    b = standard_bump([0.0], 1.0)
    x = np.array([[0.3]])
    u = 1 - 0.09
    f = math.exp(-1 / u)
    g1 = -2 * 0.3 / u ** 2  # d/dx of -1/(1-x^2)
    g2 = -2 / u ** 2 - 8 * 0.09 / u ** 3
    assert b.eval_derivative((2,), x)[0] == pytest.approx(f * (g1 * g1 + g2), rel=1e-12)
    assert b.eval_derivative((0,), x)[0] == pytest.approx(f)


def test_seminorm_examples():
    b = standard_bump([0.0], 1.0)
    assert seminorm_value(b, 0, Box([-2], [2])) == pytest.approx(math.exp(-1), abs=1e-6)
    assert seminorm_value(b, 0, Box([2], [3])) == 0.0
    # dense-scan oracle for max |phi'| (see decisions ledger about the quoted 0.325)
    x = np.linspace(-0.999, 0.999, 400001)
    u = 1 - x * x
    fprime = np.abs(_bump_1d(x) * (-2 * x / u ** 2))
    assert seminorm_value(b, 1, Box([-1], [1]), grid_density=10) == pytest.approx(fprime.max(), abs=5e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.integers(3, 7), st.floats(0.1, 1.5))
def test_seminorm_monotone(m, level, half):
    b = standard_bump([0.1, 0.0], 0.8)
    small = Box([-half, -half], [half, half])
    big = small.enlarged(0.25)
    v = seminorm_value(b, m, small, level)
    assert v <= seminorm_value(b, m + 1, small, level) + 1e-15
    assert v <= seminorm_value(b, m, big, level) + 1e-15
    assert v <= seminorm_value(b, m, small, level + 1) + 1e-15
    assert Seminorm(m, small, level)(b) == v


def test_vanishing_jets_examples():
    b = standard_bump([0.0], 1.0)
    v0 = with_vanishing_jets(b, Point([0.0]), 0)
    assert v0([0.0]) == 0.0
    v1 = with_vanishing_jets(b, Point([0.0]), 1)
    assert v1.eval_derivative((1,), [[0.0]])[0] == 0.0
    assert v1([0.5]) / b([0.5]) == pytest.approx(0.25)


@pytest.mark.parametrize("m", [0, 1, 2, 3])
def test_vanishing_jets_all_partials_vanish_on_set(m):
    s = AffineSubspace([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0]])
    phi = with_vanishing_jets(standard_bump([0.1, 0.2, -0.1], 1.0), s, m)
    base = np.array([[t, 0.0, 0.0] for t in np.linspace(-0.5, 0.5, 7)])
    for alpha, vals in phi.derivatives(base, m).items():
        np.testing.assert_allclose(vals, 0.0, atol=1e-10)
    sd = SmallDiagonal(1, 3)
    phi = with_vanishing_jets(standard_bump([0.0, 0.1, 0.0], 1.0), sd, m)
    base = np.array([[t, t, t] for t in np.linspace(-0.3, 0.3, 5)])
    for vals in phi.derivatives(base, m).values():
        np.testing.assert_allclose(vals, 0.0, atol=1e-10)


def test_vanishing_jets_refuses_big_diagonal():
    with pytest.raises(UnsupportedSetError):
        with_vanishing_jets(standard_bump([0.0, 0.0], 1.0), BigDiagonal(1, 2), 1)


def test_support_and_algebra():
    f = standard_bump([0.0], 1.0)
    g = standard_bump([3.0], 0.5)
    fg = tensor_product(f, g)
    assert fg.dim == 2
    np.testing.assert_allclose(fg.support.lo, [-1, 2.5])
    assert fg([[0.0, 3.0]]) == pytest.approx(math.exp(-2))
    s = f + g
    assert s([[3.0]]) == pytest.approx(math.exp(-1))
    assert f.scaled(2.0)([[0.0]]) == pytest.approx(2 * math.exp(-1))
    assert (f * f)([[0.0]]) == pytest.approx(math.exp(-2))


def test_order_guard():
    b = standard_bump([0.0], 1.0, max_order=2)
    with pytest.raises(InsufficientOrder):
        b.eval_derivative((3,), [[0.0]])


def test_json_round_trip():
    desc = {"type": "tensor", "factors": [{"type": "bump", "center": [-2.0], "radius": 0.6},
                                          {"type": "bump", "center": [0.1, 0.3], "radius": 0.7}]}
    phi = from_json(desc)
    again = from_json(phi.to_json())
    pts = np.random.default_rng(0).uniform(-2.5, 1.0, size=(200, 3))
    np.testing.assert_array_equal(phi(pts), again(pts))
