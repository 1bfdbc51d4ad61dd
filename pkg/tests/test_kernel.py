import itertools

import numpy as np
import pytest

from renorm.extend import ProbeConfig, fit_growth
from renorm.geometry import BigDiagonal, PairwiseDiagonal, Point
from renorm.kernel import (FeynmanGraph, constant_kernel, graph_amplitude, kernel_from_json, massless_propagator,
                           multiply, power_log_kernel)

CHAIN = FeynmanGraph(1, 3, ((1, 2, 1), (2, 3, 1)), p=1.0)


def test_power_kernel_values():
    k = power_log_kernel(Point([0.0, 0.0, 0.0]), 1.0)
    x = np.array([[0.0, 3.0, 4.0]])
    assert k(x)[0] == pytest.approx(0.2)
    kl = power_log_kernel(Point([0.0]), 1.0, q=2)
    assert kl([[0.5]])[0] == pytest.approx(np.log(0.5) ** 2 / 0.5)
    assert kl.growth == 1.0 and kl.log_flag and kl.effective_growth == pytest.approx(1.1)


def test_product_exponents_add():
    s = Point([0.0, 0.0, 0.0])
    f = power_log_kernel(s, 1.0)
    prod = multiply(f, f)
    assert prod.growth == 2.0
    x = np.random.default_rng(0).normal(size=(20, 3))
    np.testing.assert_allclose(prod(x), np.linalg.norm(x, axis=1) ** -2, rtol=1e-13)
    one = constant_kernel(s)
    np.testing.assert_array_equal(multiply(one, f)(x), f(x))
    assert multiply(one, f).growth == f.growth


def test_chain_amplitude_examples():
    k = graph_amplitude(CHAIN)
    assert k.growth == 2.0
    assert isinstance(k.set, BigDiagonal)
    assert k([[0.0, 1.0, 3.0]])[0] == pytest.approx(0.5)
    two = graph_amplitude(FeynmanGraph(1, 2, ((1, 2, 1),)))
    assert two([[0.0, 0.25]])[0] == pytest.approx(4.0) and two.growth == 1.0


def test_product_of_pair_kernels_bounded_by_big_diagonal_growth():
    g12 = graph_amplitude(FeynmanGraph(1, 3, ((1, 2, 1),)))
    g23 = graph_amplitude(FeynmanGraph(1, 3, ((2, 3, 1),)))
    prod = multiply(g12, g23)
    assert prod.growth == 2.0
    x = np.random.default_rng(1).uniform(-1, 1, size=(20000, 3))
    bound = np.abs(prod(x)) * BigDiagonal(1, 3).distance(x) ** 2
    assert bound.max() <= 0.5 + 1e-12  # each factor <= (sqrt2 d)^-1
    for (i, j), g in (((1, 2), g12), ((2, 3), g23)):
        d_ij = PairwiseDiagonal(1, 3, i, j).distance(x)
        np.testing.assert_allclose(np.abs(g(x)) * d_ij, 1 / np.sqrt(2), rtol=1e-12)


def test_amplitude_relabeling_symmetry():
    g = FeynmanGraph(1, 4, ((1, 2, 2), (2, 3, 1), (1, 4, 1)), p=0.5)
    x = np.random.default_rng(2).normal(size=(50, 4))
    base = graph_amplitude(g)(x)
    for perm in itertools.permutations(range(1, 5)):
        h = g.relabeled(perm)
        y = np.empty_like(x)
        for v in range(4):
            y[:, perm[v] - 1] = x[:, v]
        np.testing.assert_allclose(graph_amplitude(h)(y), base, rtol=1e-13)


def test_growth_additivity_by_fit():
    s = Point([0.0])
    f = power_log_kernel(s, 1.0)
    g = power_log_kernel(s, 0.5)
    fit = fit_growth(multiply(f, g), s, ProbeConfig(k_min=3, k_max=8, seminorm_order=0))
    assert fit.s <= f.growth + g.growth + 0.1


def test_graph_validation_and_json():
    with pytest.raises(ValueError):
        FeynmanGraph(1, 3, ((1, 1, 1),))
    g = FeynmanGraph(1, 3, ((2, 1, 1), (1, 2, 1), (3, 2, 1)))
    assert g.multiplicity(1, 2) == 2 and g.multiplicity(3, 2) == 1 and g.multiplicity(1, 3) == 0
    assert FeynmanGraph.from_json(g.to_json()) == g
    k = kernel_from_json({"type": "graph", "graph": CHAIN.to_json()})
    assert k([[0.0, 1.0, 3.0]])[0] == pytest.approx(0.5)
    desc = power_log_kernel(Point([0.0]), 1.0, half_line=True).to_json()
    assert kernel_from_json(desc).to_json() == desc


def test_massless_preset():
    assert massless_propagator(4) == (2.0, 0)
    assert massless_propagator(2) == (0.0, 1)
