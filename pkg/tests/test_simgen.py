import math

import numpy as np
import pytest
from scipy import stats

from logitcde.simgen import (
    ScenarioConfig,
    draw_response,
    generate,
    sample_skewnormal,
    scenario_coefficients,
    skew_error_mean,
)


@pytest.mark.parametrize("model_id,p", [(1, 5), (2, 10), (3, 1), (4, 10)])
def test_shapes_and_split(model_id, p):
    train, test, truth = generate(ScenarioConfig(model_id, 200, seed=1))
    assert train.n == 150 and test.n == 50
    assert train.p == p and len(truth) == 50


@pytest.mark.parametrize("model_id", [1, 2, 3, 4])
def test_same_seed_same_data(model_id):
    a = generate(ScenarioConfig(model_id, 100, seed=5))
    b = generate(ScenarioConfig(model_id, 100, seed=5))
    assert np.array_equal(a[0].features, b[0].features) and np.array_equal(a[1].response, b[1].response)
    assert a[2].to_dict() == b[2].to_dict()


def test_model1_coefficients_redrawn_per_replicate():
    c0 = scenario_coefficients(ScenarioConfig(1, 50, seed=0))
    c1 = scenario_coefficients(ScenarioConfig(1, 50, seed=1))
    assert not np.array_equal(c0["beta1"], c1["beta1"])
    assert np.array_equal(c0["beta1"], scenario_coefficients(ScenarioConfig(1, 50, seed=0))["beta1"])


def test_model1_truth_uses_replicate_coefficients():
    cfg = ScenarioConfig(1, 40, seed=3)
    _, test, truth = generate(cfg)
    c = scenario_coefficients(cfg)
    np.testing.assert_allclose(truth.loc, test.features @ c["beta1"])
    np.testing.assert_allclose(truth.scale, np.exp(test.features @ c["beta2"]))


def test_model1_homoskedastic_hook():
    cfg = ScenarioConfig(1, 10**5, seed=2, model1_beta2_var=0.0)
    train, test, _ = generate(cfg)
    beta1 = scenario_coefficients(cfg)["beta1"]
    resid = np.concatenate([train.response - train.features @ beta1, test.response - test.features @ beta1])
    assert abs(resid.var() - 1) < 0.05


def test_model3_covariate_support_and_variance():
    train, test, _ = generate(ScenarioConfig(3, 4000, seed=0))
    x = np.concatenate([train.features[:, 0], test.features[:, 0]])
    assert x.min() >= 0 and x.max() <= 10
    rng = np.random.default_rng(7)
    y = draw_response(3, np.zeros((10**5, 1)), {}, rng)
    expected = 0.25 * (math.sin(0) - 2 * math.sin(1)) ** 2 + 0.365
    assert abs(y.var() / expected - 1) < 0.02


def test_model2_component_variances_are_variances():
    # at a fixed x the response is a two-component mixture with SDs 1.5 and 1
    X = np.tile(np.array([[0.1, 0.2, 0.9, 0.5, 0.5] + [0.0] * 5]), (10**5, 1))
    y = draw_response(2, X, {}, np.random.default_rng(0))
    m1 = 10 * math.sin(2 * math.pi * 0.02) + 5.0
    m2 = 20 * 0.16 + 2.5
    expected = 0.5 * 2.25 + 0.5 * 1.0 + 0.25 * (m1 - m2) ** 2
    assert abs(y.var() / expected - 1) < 0.03


def test_model4_error_mean():
    eps = sample_skewnormal(0.0, 1.0, -5.0, 10**6, seed=0)
    assert abs(eps.mean() - (-0.7824)) < 0.005
    assert skew_error_mean() == pytest.approx(-0.7824, abs=1e-4)


def test_skewnormal_zero_shape_is_normal():
    n = 10**4
    x = sample_skewnormal(1.5, 2.0, 0.0, n, seed=3)
    ks = stats.kstest(x, stats.norm(1.5, 2.0).cdf).statistic
    assert ks < 1.36 / math.sqrt(n)


@pytest.mark.parametrize("seed", range(5))
def test_skewnormal_negative_skew(seed):
    assert stats.skew(sample_skewnormal(0.0, 1.0, -5.0, 10**4, seed=seed)) < 0


def test_skewnormal_variance():
    x = sample_skewnormal(0.0, 1.0, -5.0, 10**6, seed=4)
    assert abs(x.var() / 0.3879 - 1) < 0.02
    with pytest.raises(ValueError):
        sample_skewnormal(0.0, 0.0, -5.0, 10)


@pytest.mark.parametrize("kwargs", [dict(model_id=5, n=100), dict(model_id=1, n=4),
                                    dict(model_id=1, n=100, train_fraction=1.0)])
def test_invalid_config(kwargs):
    with pytest.raises(ValueError):
        ScenarioConfig(**kwargs)
