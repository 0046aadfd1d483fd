import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from logitcde.predict import (
    DensityEstimate,
    RangeInfo,
    cdf_at,
    density_on_y,
    grid_softmax,
    predict_grid,
    predict_grids,
)
from logitcde.qmodel import PolynomialSpec, mlp_init_he
from logitcde.transform import GaussianTransform

T = GaussianTransform(np.array([1.0, 0.5]), 2.0)
X = np.array([0.4])
RANGE = RangeInfo(-6.0, 8.4)


def smooth_poly(seed=0, scale=1.0):
    return PolynomialSpec(3, 1, 2, False, scale * np.random.default_rng(seed).normal(size=9))


def gauss_pdf(y, m, s):
    return np.exp(-0.5 * ((y - m) / s) ** 2) / (s * math.sqrt(2 * math.pi))


def test_range_info_bounds():
    assert RangeInfo(0.0, 10.0).bounds == (-0.5, 10.5)
    assert RangeInfo.from_response([3.0, 1.0, 2.0]).bounds == pytest.approx((0.9, 3.1))


def test_zero_model_uniform_quantile_masses():
    de = predict_grid(PolynomialSpec(2, 1), X, L=100, transform=T)
    assert np.all(de.probabilities == 1 / 100)
    assert de.z_grid[0] == pytest.approx(0.005) and de.z_grid[-1] == pytest.approx(0.995)
    assert de.cdf[-1] == 1.0


def test_zero_model_cutpoint_recovers_base_distribution():
    de = predict_grid(PolynomialSpec(2, 1), X, L=200, grid_mode="cutpoint", transform=T, range_info=RANGE)
    lo, hi = RANGE.bounds
    assert de.y_grid[0] == lo and de.y_grid[-1] == hi
    base = gauss_pdf(de.y_grid, T.location(X), T.sigma)
    np.testing.assert_allclose(de.probabilities, base / base.sum(), rtol=1e-10)


def test_three_point_softmax_example():
    p = grid_softmax(np.array([0.25, 0.5, 0.75]))
    e = [math.exp(v) for v in (0.25, 0.5, 0.75)]
    np.testing.assert_allclose(p, [v / sum(e) for v in e], rtol=1e-14)
    np.testing.assert_allclose(p, [0.2543, 0.3265, 0.4192], atol=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-30, 30), min_size=2, max_size=30), st.floats(-100, 100))
def test_softmax_shift_invariance(q, c):
    q = np.array(q)
    p = grid_softmax(q)
    assert p.sum() == pytest.approx(1, abs=1e-12)
    np.testing.assert_allclose(grid_softmax(q + c), p, rtol=1e-9, atol=1e-300)


def test_centre_point_normalisation():
    spec = smooth_poly(3)
    de = predict_grid(spec, X, L=99, transform=T)
    assert de.z_grid[49] == pytest.approx(0.5)
    q = spec.forward(de.z_grid, np.tile(X, (99, 1)))[0]
    assert de.probabilities[49] * np.exp(q).sum() == pytest.approx(1, rel=1e-12)


def test_uniform_quantile_masses_give_base_density():
    de = predict_grid(PolynomialSpec(1, 1), X, L=1000, transform=T)
    h = density_on_y(de, T, X)
    # unit mass is spread over z in [0.005, 0.995], i.e. L cells of width dz
    covered = 1000 * (de.z_grid[1] - de.z_grid[0])
    np.testing.assert_allclose(h * covered, gauss_pdf(de.y_grid, T.location(X), T.sigma), rtol=1e-10)


@pytest.mark.parametrize("mode", ["quantile", "cutpoint"])
def test_density_integral(mode):
    de = predict_grid(smooth_poly(1), X, L=1000, grid_mode=mode, transform=T, range_info=RANGE)
    total = np.trapezoid(density_on_y(de, T, X), de.y_grid)
    assert 0.95 <= total <= 1.0


def test_zero_mass_gives_zero_density():
    z = np.linspace(0.1, 0.9, 5)
    y = T.location(X) + T.sigma * np.linspace(-1, 1, 5)
    probs = np.array([0.0, 0.25, 0.25, 0.5, 0.0])
    de = DensityEstimate(z, y, probs, np.cumsum(probs))
    h = density_on_y(de, T, X)
    assert h[0] == 0 and h[-1] == 0 and np.all(h >= 0)


def test_cdf_at_contract():
    de = DensityEstimate(np.array([0.2, 0.4, 0.6]), np.array([1.0, 2.0, 3.0]),
                         np.array([0.2, 0.2, 0.6]), np.array([0.2, 0.4, 1.0]))
    assert cdf_at(de, 0.5) == 0 and cdf_at(de, 3.5) == 1
    assert cdf_at(de, 2.0) == 0.4
    assert cdf_at(de, 1.5) == pytest.approx(0.3)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        predict_grid(PolynomialSpec(1, 1), X, L=1, transform=T)
    with pytest.raises(ValueError):
        predict_grid(PolynomialSpec(1, 1), X, grid_mode="cutpoint", transform=T)
    with pytest.raises(ValueError):
        DensityEstimate(np.zeros(2), np.array([1.0, 1.0]), np.array([0.5, 0.5]), np.array([0.5, 1.0]))


def test_vectorised_matches_single_rows():
    spec = mlp_init_he(5, 5, 1, seed=2)
    xs = np.array([[-1.0], [0.0], [2.0]])
    many = predict_grids(spec, xs, L=50, grid_mode="cutpoint", transform=T, range_info=RANGE)
    for row, de in zip(xs, many):
        one = predict_grid(spec, row, L=50, grid_mode="cutpoint", transform=T, range_info=RANGE)
        np.testing.assert_allclose(one.probabilities, de.probabilities, rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.floats(-20, 20), min_size=2, max_size=20),
       st.sampled_from(["quantile", "cutpoint"]))
def test_cdf_monotone(seed, ys, mode):
    spec = smooth_poly(seed, scale=3.0)
    de = predict_grid(spec, X, L=60, grid_mode=mode, transform=T, range_info=RANGE)
    assert np.isclose(de.probabilities.sum(), 1, atol=1e-12)
    assert np.all(np.diff(de.cdf) >= 0)
    ys = np.sort(ys)
    assert np.all(np.diff(cdf_at(de, ys)) >= 0)


def test_grid_modes_converge():
    spec = smooth_poly(5)
    wide = RangeInfo(T.location(X) - 3.3 * T.sigma, T.location(X) + 3.3 * T.sigma)
    q = predict_grid(spec, X, L=1000, grid_mode="quantile", transform=T)
    c = predict_grid(spec, X, L=1000, grid_mode="cutpoint", transform=T, range_info=wide)
    probes = T.location(X) + T.sigma * np.linspace(-2, 2, 9)
    assert np.max(np.abs(cdf_at(q, probes) - cdf_at(c, probes))) < 1e-2
