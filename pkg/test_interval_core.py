#!/usr/bin/env python3
"""
Interval kernel tests
Endpoint arithmetic, intersections, vector/matrix products and inclusion properties
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DimensionMismatch, EmptyIntersection, InvalidInterval
from interval_core import (
    Interval, IntervalMatrix, IntervalVector, iv_add, iv_contains, iv_intersect, iv_mid, iv_mul, iv_neg,
    iv_rad, iv_sub, ivm_mag_matvec, ivm_matmul, ivm_matvec, ivv_distance, ivv_inf_norm, ivv_intersect,
)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
unit = st.floats(min_value=0.0, max_value=1.0)


@st.composite
def intervals(draw):
    a, b = draw(finite), draw(finite)
    return Interval(min(a, b), max(a, b))


@st.composite
def nested(draw):
    """(inner, outer) with inner ⊆ outer"""
    outer = draw(intervals())
    t1, t2 = sorted((draw(unit), draw(unit)))
    width = outer.hi - outer.lo
    lo = min(max(outer.lo + t1 * width, outer.lo), outer.hi)
    hi = max(min(outer.lo + t2 * width, outer.hi), lo)
    return Interval(lo, hi), outer


@st.composite
def member(draw):
    """(x, interval) with x inside the interval"""
    iv = draw(intervals())
    x = min(max(iv.lo + draw(unit) * (iv.hi - iv.lo), iv.lo), iv.hi)
    return x, iv


# Scalar intervals

def test_construction_rejects_reversed_bounds():
    with pytest.raises(InvalidInterval):
        Interval(2.0, 1.0)
    assert isinstance(InvalidInterval("x"), ValueError)


def test_add():
    assert iv_add(Interval(1, 2), Interval(3, 4)) == Interval(4, 6)
    x = Interval(-0.5, 0.25)
    assert iv_add(Interval(0, 0), x) == x
    total = Interval(-0.03, 0.03) + Interval(0.97, 1.03)
    assert total.lo == pytest.approx(0.94)
    assert total.hi == pytest.approx(1.06)


def test_add_encloses_sampled_sums():
    a, b = Interval(-0.03, 0.03), Interval(0.97, 1.03)
    total = iv_add(a, b)
    rng = np.random.default_rng(1)
    xs = rng.uniform(a.lo, a.hi, 10_000)
    ys = rng.uniform(b.lo, b.hi, 10_000)
    sums = xs + ys
    assert np.all((total.lo <= sums) & (sums <= total.hi))


def test_mul():
    assert iv_mul(Interval(-1, 2), Interval(3, 4)) == Interval(-4, 8)
    assert iv_mul(Interval.point(1.5), Interval.point(-2.0)) == Interval.point(-3.0)
    assert 2.0 * Interval(1, 3) == Interval(2, 6)


def test_sub_and_neg():
    assert iv_sub(Interval(4, 6), Interval(1, 2)) == Interval(2, 5)
    assert iv_neg(Interval(-1, 3)) == Interval(-3, 1)
    # dependency effect: a − a is wider than [0, 0]
    assert Interval(1, 2) - Interval(1, 2) == Interval(-1, 1)
    assert 1.0 - Interval(0.25, 0.5) == Interval(0.5, 0.75)


def test_intersect():
    assert iv_intersect(Interval(1, 3), Interval(2, 5)) == Interval(2, 3)
    a = Interval(-1, 4)
    assert a & a == a
    with pytest.raises(EmptyIntersection):
        iv_intersect(Interval(1, 2), Interval(3, 4))


def test_mid_rad_contains():
    assert iv_mid(Interval(0.9, 1.1)) == pytest.approx(1.0)
    assert iv_rad(Interval.point(0.7)) == 0.0
    sigma = 0.01
    assert iv_contains(Interval(-3 * sigma, 3 * sigma), 0.0)
    assert 0.0 in Interval.around(0.0, 3 * sigma)
    assert 0.5 not in Interval(0.6, 0.7)


@given(nested(), nested())
def test_inclusion_monotonicity(a_pair, b_pair):
    a, big_a = a_pair
    b, big_b = b_pair
    assert iv_add(a, b).subset_of(iv_add(big_a, big_b))
    assert iv_sub(a, b).subset_of(iv_sub(big_a, big_b))
    assert iv_mul(a, b).subset_of(iv_mul(big_a, big_b))


@given(member(), member())
def test_operations_contain_point_results(xa, yb):
    x, a = xa
    y, b = yb
    assert iv_contains(iv_add(a, b), x + y)
    assert iv_contains(iv_sub(a, b), x - y)
    assert iv_contains(iv_mul(a, b), x * y)


# Vectors and matrices

def test_vector_basics():
    v = IntervalVector.from_intervals([Interval(-2, 1), Interval(0, 3)])
    assert len(v) == 2
    assert ivv_inf_norm(v) == 3.0
    assert ivv_distance(v, v) == 0.0
    assert v[1] == Interval(0, 3)
    assert list(v.mid()) == [-0.5, 1.5]
    with pytest.raises(AttributeError):
        v.lo = np.zeros(2)
    with pytest.raises(ValueError):
        v.lo[0] = 5.0


def test_vector_distance():
    a = IntervalVector([0.0], [1.0])
    b = IntervalVector([0.2], [1.1])
    assert ivv_distance(a, b) == pytest.approx(0.2)


def test_vector_intersect_and_subset():
    a = IntervalVector([0.0, -1.0], [2.0, 1.0])
    b = IntervalVector([1.0, -2.0], [3.0, 0.5])
    c = ivv_intersect(a, b)
    assert np.array_equal(c.lo, [1.0, -1.0])
    assert np.array_equal(c.hi, [2.0, 0.5])
    assert c.subset_of(a) and c.subset_of(b)
    with pytest.raises(EmptyIntersection):
        ivv_intersect(a, IntervalVector([5.0, 0.0], [6.0, 0.0]))


def test_vector_rejects_bad_shapes():
    with pytest.raises(DimensionMismatch):
        IntervalVector([0.0, 1.0], [1.0])
    with pytest.raises(InvalidInterval):
        IntervalVector([1.0], [0.0])
    with pytest.raises(DimensionMismatch):
        IntervalVector([0.0], [1.0]) + IntervalVector([0.0, 0.0], [1.0, 1.0])


def test_identity_matvec_returns_vector():
    v = IntervalVector([-1.0, 0.5, 2.0], [1.0, 0.75, 2.0])
    out = ivm_matvec(IntervalMatrix.identity(3), v)
    assert np.allclose(out.lo, v.lo) and np.allclose(out.hi, v.hi)


def test_matvec_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        ivm_matvec(IntervalMatrix.identity(2), IntervalVector([0.0, 0.0, 0.0]))
    with pytest.raises(DimensionMismatch):
        ivm_matmul(IntervalMatrix.identity(2), IntervalMatrix.identity(3))


def test_matvec_matches_scalar_arithmetic():
    m = IntervalMatrix.from_intervals([[Interval(1, 2), Interval(-1, 0)],
                                       [Interval(0, 0), Interval(3, 4)]])
    v = IntervalVector.from_intervals([Interval(-1, 1), Interval(2, 3)])
    out = ivm_matvec(m, v)
    expected = [
        iv_add(iv_mul(Interval(1, 2), Interval(-1, 1)), iv_mul(Interval(-1, 0), Interval(2, 3))),
        iv_add(iv_mul(Interval(0, 0), Interval(-1, 1)), iv_mul(Interval(3, 4), Interval(2, 3))),
    ]
    for got, want in zip(out, expected):
        assert got.lo == pytest.approx(want.lo) and got.hi == pytest.approx(want.hi)


def test_point_matrix_fast_path_matches_general_path():
    rng = np.random.default_rng(3)
    c = rng.normal(size=(5, 5))
    mid = rng.normal(size=5)
    v = IntervalVector.from_midrad(mid, rng.uniform(0, 0.1, 5))
    fast = ivm_matvec(IntervalMatrix.from_point(c), v)
    lo = np.minimum(c * v.lo, c * v.hi).sum(axis=1)
    hi = np.maximum(c * v.lo, c * v.hi).sum(axis=1)
    assert np.allclose(fast.lo, lo, atol=1e-12)
    assert np.allclose(fast.hi, hi, atol=1e-12)


def test_mag_matvec_encloses_general_product():
    rng = np.random.default_rng(11)
    m = IntervalMatrix.from_midrad(rng.normal(size=(4, 4)), rng.uniform(0, 0.1, (4, 4)))
    v = IntervalVector.from_midrad(rng.normal(size=4), rng.uniform(0, 0.1, 4))
    outer = ivm_mag_matvec(m.mag(), v)
    inner = ivm_matvec(m, v)
    assert np.all(outer.lo <= inner.lo + 1e-12) and np.all(inner.hi <= outer.hi + 1e-12)


def test_mag_matvec_is_sharp_for_zero_centred_matrix():
    rng = np.random.default_rng(12)
    rad = rng.uniform(0, 0.2, (5, 5))
    m = IntervalMatrix.from_midrad(np.zeros((5, 5)), rad)
    v = IntervalVector.from_midrad(rng.normal(size=5), rng.uniform(0, 0.1, 5))
    general = ivm_matvec(m, v)
    fast = ivm_mag_matvec(rad, v)
    assert np.allclose(fast.lo, general.lo, atol=1e-12)
    assert np.allclose(fast.hi, general.hi, atol=1e-12)
    with pytest.raises(DimensionMismatch):
        ivm_mag_matvec(rad, IntervalVector([0.0, 0.0]))


def test_matmul_encloses_sampled_products():
    rng = np.random.default_rng(5)
    a = IntervalMatrix.from_midrad(rng.normal(size=(4, 3)), rng.uniform(0, 0.2, (4, 3)))
    b = IntervalMatrix.from_midrad(rng.normal(size=(3, 2)), rng.uniform(0, 0.2, (3, 2)))
    product = ivm_matmul(a, b)
    for _ in range(500):
        pa = rng.uniform(a.lo, a.hi)
        pb = rng.uniform(b.lo, b.hi)
        p = pa @ pb
        assert np.all(product.lo - 1e-12 <= p) and np.all(p <= product.hi + 1e-12)


def test_matmul_point_fast_paths():
    rng = np.random.default_rng(8)
    c = rng.normal(size=(3, 3))
    a = IntervalMatrix.from_midrad(rng.normal(size=(3, 3)), rng.uniform(0, 0.1, (3, 3)))
    left = ivm_matmul(IntervalMatrix.from_point(c), a)
    right = ivm_matmul(a, IntervalMatrix.from_point(c))
    assert np.allclose(left.mid(), c @ a.mid())
    assert np.allclose(left.rad(), np.abs(c) @ a.rad())
    assert np.allclose(right.mid(), a.mid() @ c)


def test_matrix_norm_block_and_transpose():
    m = IntervalMatrix.from_intervals([[Interval(-2, 1), Interval(0, 3)],
                                       [Interval(0.5, 0.5), Interval(-1, -1)]])
    assert m.inf_norm() == 5.0
    assert m.T[0, 1] == Interval(0.5, 0.5)
    block = IntervalMatrix.block([[m, -np.eye(2)], [np.zeros((2, 2)), m.T]])
    assert block.shape == (4, 4)
    assert block[0, 2] == Interval(-1, -1)
    assert block[3, 2] == Interval(0, 3)
    assert not block.is_point()
    assert IntervalMatrix.identity(3).is_point()


@settings(max_examples=50)
@given(st.integers(min_value=1, max_value=6), st.integers(min_value=0, max_value=2**31 - 1))
def test_matvec_inclusion_monotone(n, seed):
    rng = np.random.default_rng(seed)
    mid = rng.normal(size=(n, n))
    rad = rng.uniform(0, 0.5, (n, n))
    big = IntervalMatrix.from_midrad(mid, rad)
    small = IntervalMatrix.from_midrad(mid, 0.5 * rad)
    v_mid = rng.normal(size=n)
    v_big = IntervalVector.from_midrad(v_mid, 0.3)
    v_small = IntervalVector.from_midrad(v_mid, 0.1)
    inner = ivm_matvec(small, v_small)
    outer = ivm_matvec(big, v_big)
    assert np.all(outer.lo <= inner.lo + 1e-12) and np.all(inner.hi <= outer.hi + 1e-12)
