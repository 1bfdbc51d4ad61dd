import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from renorm.errors import UnsupportedSetError
from renorm.geometry import (AffineSubspace, BigDiagonal, PairwiseDiagonal, Point, SetUnion, SmallDiagonal,
                             set_from_json)


def test_point_distance():
    assert Point([0.0]).distance([0.5]) == pytest.approx(0.5)


def test_affine_distance_and_split():
    s = AffineSubspace([0.0, 0.0], [[1.0, 0.0]])
    assert s.distance([3.0, -2.0]) == pytest.approx(2.0)
    base, normal = s.transverse_split(np.array([3.0, -2.0]))
    np.testing.assert_allclose(base, [3.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(normal, [0.0, -2.0], atol=1e-15)


def test_small_diagonal_against_brute_force():
    x = np.array([0.0, 1.0, 2.0])
    c = np.linspace(-3, 5, 80001)
    brute = np.min(np.linalg.norm(x[None, :] - c[:, None], axis=1))
    s = SmallDiagonal(1, 3)
    assert s.distance(x) == pytest.approx(brute, abs=1e-8)
    assert s.distance(x) == pytest.approx(np.sqrt(2.0), abs=1e-14)
    base, normal = s.transverse_split(x)
    np.testing.assert_allclose(base, [1.0, 1.0, 1.0], atol=1e-14)
    np.testing.assert_allclose(normal, [-1.0, 0.0, 1.0], atol=1e-14)


def test_point_split():
    base, normal = Point([0.0]).transverse_split(np.array([0.3]))
    assert base[0] == 0.0 and normal[0] == pytest.approx(0.3)


def test_pairwise_and_big_diagonal():
    x = np.array([0.0, 1.0, 3.0])
    assert PairwiseDiagonal(1, 3, 1, 3).distance(x) == pytest.approx(3 / np.sqrt(2))
    assert BigDiagonal(1, 3).distance(x) == pytest.approx(1 / np.sqrt(2))
    with pytest.raises(UnsupportedSetError):
        BigDiagonal(1, 3).transverse_split(x)


def test_small_diagonal_d2():
    s = SmallDiagonal(2, 2)
    x = np.array([1.0, 0.0, -1.0, 0.0])
    assert s.distance(x) == pytest.approx(np.sqrt(2.0))


def test_min_properties_on_random_configurations():
    rng = np.random.default_rng(1)
    xs = rng.normal(size=(1000, 4))
    big = BigDiagonal(1, 4).distance(xs)
    small = SmallDiagonal(1, 4).distance(xs)
    for i in range(1, 5):
        for j in range(i + 1, 5):
            assert np.all(big <= PairwiseDiagonal(1, 4, i, j).distance(xs) + 1e-15)
    # d_4 lies inside every pairwise diagonal
    assert np.all(big <= small + 1e-15)
    # any single point of d_4 is at least as far as the whole diagonal
    for c in (-1.0, 0.0, 0.7):
        assert np.all(small <= Point([c] * 4).distance(xs) + 1e-15)


@settings(max_examples=60, deadline=None)
@given(arrays(float, 6, elements=st.floats(-5, 5)), arrays(float, 6, elements=st.floats(-1, 1)))
def test_distance_is_1_lipschitz(x, dx):
    for s in (SmallDiagonal(2, 3), BigDiagonal(1, 6), AffineSubspace(np.zeros(6), np.eye(6)[:2])):
        assert abs(s.distance(x) - s.distance(x + dx)) <= np.linalg.norm(dx) + 1e-12


@settings(max_examples=60, deadline=None)
@given(arrays(float, 3, elements=st.floats(-5, 5)))
def test_split_normal_norm_is_distance(x):
    for s in (SmallDiagonal(1, 3), Point([0.5, -1.0, 2.0]), AffineSubspace([1.0, 0, 0], [[0.6, 0.8, 0.0]])):
        base, normal = s.transverse_split(x)
        np.testing.assert_allclose(base + normal, x, atol=1e-12)
        assert np.linalg.norm(normal) == pytest.approx(s.distance(x), abs=1e-12)
        assert s.distance(base) == pytest.approx(0.0, abs=1e-12)


def test_json_round_trip():
    sets = [Point([0.0, 1.0]), AffineSubspace([0.0, 0.0], [[1.0, 0.0]]), SmallDiagonal(2, 3),
            PairwiseDiagonal(1, 3, 1, 2), BigDiagonal(1, 4), SetUnion([Point([0.0]), Point([1.0])])]
    for s in sets:
        t = set_from_json(s.to_json())
        assert t.to_json() == s.to_json()
        pts = np.random.default_rng(0).normal(size=(5, s.dim))
        np.testing.assert_allclose(t.distance(pts), s.distance(pts), rtol=0, atol=0)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        SmallDiagonal(1, 3).distance([0.0, 1.0])
