"""Synthetic benchmark scenarios (four data-generating models) with known conditionals.

All ``N(0, v)`` parameters are variances. Model 1 redraws its coefficient
vectors for every replicate; mixture indicators are drawn per observation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .scoring import TrueConditional, skewnorm_moments

SKEW_SHAPE = -5.0


@dataclass(frozen=True)
class ScenarioConfig:
    model_id: int
    n: int
    seed: int = 0
    train_fraction: float = 0.75
    model1_beta2_var: float = 0.45   # test hook: 0 makes Model 1 homoskedastic

    def __post_init__(self):
        if self.model_id not in (1, 2, 3, 4):
            raise ValueError(f"unknown model id {self.model_id}")
        if self.n < 8:
            raise ValueError("n must be at least 8")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")


def sample_skewnormal(location: float, scale: float, shape: float, n: int, seed=None) -> np.ndarray:
    """Skew-normal draws from delta |U0| + sqrt(1 - delta^2) V with U0, V iid N(0, 1)."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    delta = shape / np.sqrt(1.0 + shape * shape)
    u0 = rng.standard_normal(n)
    v = rng.standard_normal(n)
    return location + scale * (delta * np.abs(u0) + np.sqrt(1.0 - delta * delta) * v)


def _friedman_sine(X):
    return 10.0 * np.sin(2.0 * np.pi * X[:, 0] * X[:, 1])


def draw_covariates(model_id: int, n: int, rng) -> np.ndarray:
    if model_id == 1:
        return rng.standard_normal((n, 5))
    if model_id in (2, 4):
        return rng.random((n, 10))
    return rng.uniform(0.0, 10.0, size=(n, 1))


def conditional_params(model_id: int, X: np.ndarray, coefs: dict) -> dict:
    """Parameters of Y | X for every row; keys match :class:`TrueConditional` fields."""
    if model_id == 1:
        return {"loc": X @ coefs["beta1"], "scale": np.exp(X @ coefs["beta2"])}
    if model_id == 2:
        n = len(X)
        return {
            "loc": _friedman_sine(X) + 10.0 * X[:, 3], "scale": np.full(n, 1.5),
            "loc2": 20.0 * (X[:, 2] - 0.5) ** 2 + 5.0 * X[:, 4], "scale2": np.full(n, 1.0),
        }
    if model_id == 3:
        x1 = X[:, 0]
        n = len(X)
        return {"loc": np.sin(x1), "scale": np.full(n, 0.3),
                "loc2": 2.0 * np.sin(1.5 * x1 + 1.0), "scale2": np.full(n, 0.8)}
    mean = _friedman_sine(X) + 20.0 * (X[:, 2] - 0.5) ** 2 + 10.0 * X[:, 3] + 5.0 * X[:, 4]
    return {"loc": mean, "scale": np.ones(len(X)), "shape": SKEW_SHAPE}


def draw_response(model_id: int, X: np.ndarray, coefs: dict, rng) -> np.ndarray:
    """Sample Y | X from the generative description (not from the fitted parameters)."""
    n = len(X)
    if model_id == 1:
        return X @ coefs["beta1"] + np.exp(X @ coefs["beta2"]) * rng.standard_normal(n)
    if model_id == 2:
        pi1 = rng.random(n) < 0.5
        a = _friedman_sine(X) + 10.0 * X[:, 3] + rng.normal(0.0, 1.5, n)
        b = 20.0 * (X[:, 2] - 0.5) ** 2 + 5.0 * X[:, 4] + rng.normal(0.0, 1.0, n)
        return np.where(pi1, a, b)
    if model_id == 3:
        pi1 = rng.random(n) < 0.5
        a = np.sin(X[:, 0]) + rng.normal(0.0, 0.3, n)
        b = 2.0 * np.sin(1.5 * X[:, 0] + 1.0) + rng.normal(0.0, 0.8, n)
        return np.where(pi1, a, b)
    mean = _friedman_sine(X) + 20.0 * (X[:, 2] - 0.5) ** 2 + 10.0 * X[:, 3] + 5.0 * X[:, 4]
    return mean + sample_skewnormal(0.0, 1.0, SKEW_SHAPE, n, rng)


def draw_coefficients(config: ScenarioConfig, rng) -> dict:
    if config.model_id != 1:
        return {}
    beta1 = rng.standard_normal(5)
    beta2 = rng.normal(0.0, np.sqrt(config.model1_beta2_var), 5)
    return {"beta1": beta1, "beta2": beta2}


def generate(config: ScenarioConfig):
    """Draw one replicate; returns (train, test, TrueConditional for the test rows).

    The Model 1 coefficients are the first draws of the replicate's stream,
    so ``scenario_coefficients(config)`` recovers them.
    """
    rng = np.random.default_rng(config.seed)
    coefs = draw_coefficients(config, rng)
    X = draw_covariates(config.model_id, config.n, rng)
    y = draw_response(config.model_id, X, coefs, rng)
    perm = rng.permutation(config.n)
    n_train = int(round(config.train_fraction * config.n))
    tr, te = perm[:n_train], perm[n_train:]
    names = [f"x{j + 1}" for j in range(X.shape[1])]
    train = Dataset(X[tr], y[tr], None, names)
    test = Dataset(X[te], y[te], None, names)
    truth = TrueConditional(config.model_id, **conditional_params(config.model_id, X[te], coefs))
    return train, test, truth


def scenario_coefficients(config: ScenarioConfig) -> dict:
    return draw_coefficients(config, np.random.default_rng(config.seed))


def skew_error_mean() -> float:
    return skewnorm_moments(SKEW_SHAPE)[0]
