import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from bmvseg import FeatureMap, WarpField, bilinear_warp, propagate_chain, warp_displacement


def test_zero_field_is_identity(rng):
    f = FeatureMap(rng.normal(size=(3, 5, 7)))
    assert bilinear_warp(f, WarpField.zeros(5, 7)) == f


def test_half_cell_example():
    f = FeatureMap(np.array([[[0.0, 2.0]]]))
    out = bilinear_warp(f, WarpField(np.full((1, 2, 2), [0.5, 0.0])))
    np.testing.assert_array_equal(out.data, [[[1.0, 2.0]]])


def test_integer_field_matches_gather(rng):
    data = rng.normal(size=(4, 8, 8))
    ys, xs = np.mgrid[0:8, 0:8]
    dx = rng.integers(-xs, 8 - xs)
    dy = rng.integers(-ys, 8 - ys)
    w = np.stack([dx, dy], -1).astype(float)
    out = bilinear_warp(FeatureMap(data), WarpField(w))
    np.testing.assert_array_equal(out.data, oracles.integer_gather(data, w))


def test_fractional_field_matches_four_neighbor(rng):
    data = rng.normal(size=(4, 8, 8))
    w = rng.uniform(-3, 3, (8, 8, 2))
    out = bilinear_warp(FeatureMap(data), WarpField(w))
    np.testing.assert_allclose(out.data, oracles.four_neighbor(data, w), rtol=0, atol=1e-12)


def test_out_of_range_samples_clamp_to_edges():
    data = np.arange(6.0).reshape(1, 2, 3)
    out = bilinear_warp(FeatureMap(data), WarpField(np.full((2, 3, 2), [-10.0, 10.0])))
    np.testing.assert_array_equal(out.data, np.full((1, 2, 3), 3.0))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        bilinear_warp(FeatureMap(np.zeros((1, 2, 2))), WarpField.zeros(2, 3))


def test_displacement_warp_moves_content_along_field():
    data = np.zeros((1, 1, 5))
    data[0, 0, 1] = 1.0
    moved = warp_displacement(FeatureMap(data), WarpField(np.full((1, 5, 2), [2.0, 0.0])))
    assert moved.data[0, 0, 3] == 1.0 and moved.data[0, 0, 1] == 0.0


def test_chain_examples(rng):
    f = FeatureMap(rng.normal(size=(2, 4, 4)))
    assert propagate_chain(f, 0, []) == [f]
    z = WarpField.zeros(4, 4)
    assert propagate_chain(f, 2, [z, z]) == [f, f, f]
    g1, g2 = WarpField(rng.uniform(-1, 1, (4, 4, 2))), WarpField(rng.uniform(-1, 1, (4, 4, 2)))
    chain = propagate_chain(f, 2, [g1, g2])
    expected = oracles.gather(oracles.gather(f.data, g1.offsets), g2.offsets)
    np.testing.assert_allclose(chain[2].data, expected, atol=1e-12)
    np.testing.assert_array_equal(chain[1].data, bilinear_warp(f, g1).data)


def test_chain_errors(rng):
    f = FeatureMap(np.zeros((1, 2, 2)))
    with pytest.raises(ValueError):
        propagate_chain(f, 2, [WarpField.zeros(2, 2)])
    with pytest.raises(ValueError):
        propagate_chain(f, -1, [])
    with pytest.raises(ValueError):
        propagate_chain(f, 1, [WarpField.zeros(3, 3)])


def test_per_step_differs_from_summed_field():
    data = np.arange(9.0).reshape(1, 3, 3) ** 2
    g1 = WarpField(np.array([[[1.0, 0]] * 3, [[0, 0]] * 3, [[0, 0]] * 3]))
    g2 = WarpField(np.full((3, 3, 2), [0.0, -0.5]))
    chained = propagate_chain(FeatureMap(data), 2, [g1, g2])[2]
    summed = bilinear_warp(FeatureMap(data), WarpField(g1.offsets + g2.offsets))
    assert chained != summed


maps = st.tuples(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: st.tuples(
        hnp.arrays(np.float64, s, elements=st.floats(-1e3, 1e3)),
        hnp.arrays(np.float64, s, elements=st.floats(-1e3, 1e3)),
        hnp.arrays(np.float64, (s[1], s[2], 2), elements=st.floats(-8, 8)),
    ))


@settings(max_examples=60, deadline=None)
@given(maps)
def test_property_range_and_identity(m):
    data, _, off = m
    f = FeatureMap(data)
    out = bilinear_warp(f, WarpField(off)).data
    lo, hi = data.min(), data.max()
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    assert out.min() >= lo - tol and out.max() <= hi + tol
    assert bilinear_warp(f, WarpField(np.zeros_like(off))) == f


@settings(max_examples=60, deadline=None)
@given(maps, st.floats(-3, 3), st.floats(-3, 3))
def test_property_linearity(m, a, b):
    f, g, off = m
    w = WarpField(off)
    lhs = bilinear_warp(FeatureMap(a * f + b * g), w).data
    rhs = a * bilinear_warp(FeatureMap(f), w).data + b * bilinear_warp(FeatureMap(g), w).data
    scale = max(1.0, np.abs(f).max() * abs(a) + np.abs(g).max() * abs(b))
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * scale)


@settings(max_examples=40, deadline=None)
@given(maps)
def test_property_gather_oracle(m):
    data, _, off = m
    out = bilinear_warp(FeatureMap(data), WarpField(off)).data
    np.testing.assert_allclose(out, oracles.gather(data, off), rtol=0, atol=1e-12 * max(1.0, np.abs(data).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 6))
def test_property_chain_length(steps):
    f = FeatureMap(np.ones((1, 2, 2)))
    assert len(propagate_chain(f, steps, [WarpField.zeros(2, 2)] * steps)) == steps + 1
