"""Smooth log-intensity models q(z, x).

Both model types expose the same small surface used by the likelihood and
the optimizers:

* ``forward(z, x, train=False, update_running=True) -> (q, cache)``
* ``param_grad(cache, dq) -> flat gradient`` of sum(dq * q)
* ``get_params()`` / ``with_params(theta)`` for a flat parameter vector
* ``penalty_mask()`` selecting the ridge-penalized entries of that vector

Polynomial feature layout (powers outermost, covariates innermost), for each
power b = 1..B with u = z - 0.5::

    u^b,
    u^b x_1, u^b x_1^2, ..., u^b x_1^O, u^b x_2, ..., u^b x_p^O,
    u^b x_1 x_2, u^b x_1 x_3, ..., u^b x_{p-1} x_p      (if interactions)

Network parameter layout (flat order): input weights (2 + p, R) with rows
[bias, z - 0.5, x_1..x_p]; hidden weights (1 + R, T) with rows [bias, a_1..a_R];
output weights (T,); then, when batch norm is on, scale1 (R,), shift1 (R,),
scale2 (T,), shift2 (T,).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np


class ModelError(ValueError):
    pass


# ---------------------------------------------------------------- polynomial


def feature_count(B: int, p: int, O: int, include_interactions: bool) -> int:
    per_power = 1 + p * O + (p * (p - 1) // 2 if include_interactions else 0)
    return B * per_power


def _covariate_block(x: np.ndarray, O: int, include_interactions: bool) -> np.ndarray:
    n, p = x.shape
    cols = [np.ones(n)]
    for j in range(p):
        for o in range(1, O + 1):
            cols.append(x[:, j] ** o)
    if include_interactions:
        for j, k in combinations(range(p), 2):
            cols.append(x[:, j] * x[:, k])
    return np.column_stack(cols)


@dataclass
class PolynomialSpec:
    B: int
    p: int
    covariate_order: int = 2
    include_interactions: bool = True
    coefficients: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.B < 1 or self.p < 1 or self.covariate_order not in (1, 2):
            raise ModelError("need B >= 1, p >= 1 and covariate_order in {1, 2}")
        k = feature_count(self.B, self.p, self.covariate_order, self.include_interactions)
        if self.coefficients is None:
            self.coefficients = np.zeros(k)
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (k,):
            raise ModelError(f"expected {k} coefficients, got {self.coefficients.shape}")

    @property
    def n_features(self) -> int:
        return len(self.coefficients)

    def features(self, z, x) -> np.ndarray:
        return poly_features(z, x, self)

    def forward(self, z, x, train=False, update_running=True):
        feats = poly_features(z, x, self)
        return feats @ self.coefficients, feats

    def param_grad(self, cache, dq):
        return cache.T @ np.asarray(dq, dtype=float)

    def get_params(self) -> np.ndarray:
        return self.coefficients.copy()

    def with_params(self, theta) -> "PolynomialSpec":
        return PolynomialSpec(self.B, self.p, self.covariate_order, self.include_interactions,
                              np.array(theta, dtype=float))

    def penalty_mask(self) -> np.ndarray:
        return np.ones(self.n_features, dtype=bool)

    def to_dict(self) -> dict:
        return {
            "type": "polynomial",
            "B": self.B,
            "p": self.p,
            "covariate_order": self.covariate_order,
            "include_interactions": self.include_interactions,
            "coefficients": self.coefficients.tolist(),
        }


def poly_features(z, x, spec: PolynomialSpec) -> np.ndarray:
    """Feature rows for paired (z, x); a scalar z with a 1-d x gives one flat row."""
    single = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=float))
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (len(z), x.shape[0]))
    if x.shape != (len(z), spec.p):
        raise ModelError(f"x has shape {x.shape}, expected ({len(z)}, {spec.p})")
    base = _covariate_block(x, spec.covariate_order, spec.include_interactions)
    u = z - 0.5
    out = np.concatenate([base * (u ** b)[:, None] for b in range(1, spec.B + 1)], axis=1)
    return out[0] if single else out


def poly_q(z, x, spec: PolynomialSpec):
    return poly_features(z, x, spec) @ spec.coefficients


# ------------------------------------------------------------------- network


def elu(u, alpha=1.0):
    return np.where(u > 0, u, alpha * np.expm1(np.minimum(u, 0.0)))


def elu_grad(u, alpha=1.0):
    return np.where(u > 0, 1.0, alpha * np.exp(np.minimum(u, 0.0)))


@dataclass
class MLPSpec:
    R: int
    T: int
    p: int
    input_weights: np.ndarray
    hidden_weights: np.ndarray
    output_weights: np.ndarray
    batchnorm: bool = True
    elu_alpha: float = 1.0
    momentum: float = 0.9
    bn_eps: float = 1e-5
    bn_scale1: np.ndarray = None
    bn_shift1: np.ndarray = None
    bn_scale2: np.ndarray = None
    bn_shift2: np.ndarray = None
    running_mean1: np.ndarray = None
    running_var1: np.ndarray = None
    running_mean2: np.ndarray = None
    running_var2: np.ndarray = None

    def __post_init__(self):
        R, T, p = self.R, self.T, self.p
        if R < 1 or T < 1 or p < 1:
            raise ModelError("R, T and p must be positive")
        self.input_weights = np.asarray(self.input_weights, dtype=float)
        self.hidden_weights = np.asarray(self.hidden_weights, dtype=float)
        self.output_weights = np.asarray(self.output_weights, dtype=float)
        if self.input_weights.shape != (2 + p, R):
            raise ModelError(f"input weights must be {(2 + p, R)}")
        if self.hidden_weights.shape != (1 + R, T):
            raise ModelError(f"hidden weights must be {(1 + R, T)}")
        if self.output_weights.shape != (T,):
            raise ModelError(f"output weights must be {(T,)}")
        defaults = {
            "bn_scale1": np.ones(R), "bn_shift1": np.zeros(R),
            "bn_scale2": np.ones(T), "bn_shift2": np.zeros(T),
            "running_mean1": np.zeros(R), "running_var1": np.ones(R),
            "running_mean2": np.zeros(T), "running_var2": np.ones(T),
        }
        for name, value in defaults.items():
            cur = getattr(self, name)
            setattr(self, name, value if cur is None else np.asarray(cur, dtype=float).copy())
        if not 0 < self.momentum < 1:
            raise ModelError("momentum must lie in (0, 1)")
        if self.elu_alpha <= 0:
            raise ModelError("elu_alpha must be positive")

    # parameter vector plumbing
    def _blocks(self):
        blocks = [("input_weights", True), ("hidden_weights", True), ("output_weights", True)]
        if self.batchnorm:
            blocks += [("bn_scale1", True), ("bn_shift1", False),
                       ("bn_scale2", True), ("bn_shift2", False)]
        return blocks

    def get_params(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).ravel() for name, _ in self._blocks()])

    def with_params(self, theta) -> "MLPSpec":
        theta = np.asarray(theta, dtype=float)
        new = copy.deepcopy(self)
        pos = 0
        for name, _ in self._blocks():
            cur = getattr(new, name)
            setattr(new, name, theta[pos:pos + cur.size].reshape(cur.shape).copy())
            pos += cur.size
        if pos != theta.size:
            raise ModelError(f"expected {pos} parameters, got {theta.size}")
        return new

    def penalty_mask(self) -> np.ndarray:
        return np.concatenate([np.full(getattr(self, name).size, pen) for name, pen in self._blocks()])

    def flatten_grads(self, grads: dict) -> np.ndarray:
        return np.concatenate([np.asarray(grads[name]).ravel() for name, _ in self._blocks()])

    def forward(self, z, x, train=False, update_running=True):
        return mlp_forward(z, x, self, "train" if train else "eval", update_running)

    def param_grad(self, cache, dq):
        return self.flatten_grads(mlp_backward(cache, dq, self))

    def to_dict(self) -> dict:
        d = {"type": "mlp", "R": self.R, "T": self.T, "p": self.p, "batchnorm": self.batchnorm,
             "elu_alpha": self.elu_alpha, "momentum": self.momentum, "bn_eps": self.bn_eps}
        for name in ("input_weights", "hidden_weights", "output_weights", "bn_scale1", "bn_shift1",
                     "bn_scale2", "bn_shift2", "running_mean1", "running_var1", "running_mean2",
                     "running_var2"):
            d[name] = getattr(self, name).tolist()
        return d


def mlp_init_he(R: int, T: int, p: int, seed=None, batchnorm: bool = True, **kwargs) -> MLPSpec:
    """He-initialized network: weights ~ N(0, 2 / fan_in), biases zero."""
    if R < 1 or T < 1:
        raise ModelError("R and T must be at least 1")
    rng = np.random.default_rng(seed)
    w_in = np.zeros((2 + p, R))
    w_in[1:] = rng.normal(0.0, np.sqrt(2.0 / (1 + p)), size=(1 + p, R))
    w_hid = np.zeros((1 + R, T))
    w_hid[1:] = rng.normal(0.0, np.sqrt(2.0 / R), size=(R, T))
    w_out = rng.normal(0.0, np.sqrt(2.0 / T), size=T)
    return MLPSpec(R, T, p, w_in, w_hid, w_out, batchnorm=batchnorm, **kwargs)


@dataclass
class ForwardCache:
    mode: str
    inputs: np.ndarray          # (N, 2 + p): [1, z - 0.5, x]
    pre1: np.ndarray            # I before normalization
    norm1: np.ndarray           # standardized I (equals pre1 without batch norm)
    inv_std1: np.ndarray
    act_in1: np.ndarray         # argument of the first ELU
    hidden: np.ndarray          # (N, 1 + R): [1, ELU(.)]
    pre2: np.ndarray
    norm2: np.ndarray
    inv_std2: np.ndarray
    act_in2: np.ndarray
    out_act: np.ndarray         # (N, T)
    batch_stats: dict = field(default_factory=dict)


def _bn_forward(pre, scale, shift, run_mean, run_var, eps, train):
    if train:
        mu = pre.mean(axis=0)
        var = pre.var(axis=0)
    else:
        mu, var = run_mean, run_var
    inv_std = 1.0 / np.sqrt(var + eps)
    norm = (pre - mu) * inv_std
    return norm, inv_std, scale * norm + shift, mu, var


def mlp_forward(z, x, spec: MLPSpec, mode: str = "eval", update_running: bool = True):
    """Forward pass; returns (q of shape (N,), ForwardCache).

    In train mode batch statistics normalize each pre-activation column and,
    when ``update_running`` is set, fold into the running moments with
    weight ``1 - momentum``.
    """
    if mode not in ("train", "eval"):
        raise ModelError(f"unknown mode {mode!r}")
    z = np.atleast_1d(np.asarray(z, dtype=float))
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = np.broadcast_to(x, (len(z), x.shape[0]))
    if len(z) == 0:
        raise ModelError("empty batch")
    if x.shape != (len(z), spec.p):
        raise ModelError(f"x has shape {x.shape}, expected ({len(z)}, {spec.p})")
    train = mode == "train"
    if train and spec.batchnorm and len(z) < 2:
        raise ModelError("train mode needs a batch of at least 2 rows")

    a = spec.elu_alpha
    inputs = np.column_stack([np.ones(len(z)), z - 0.5, x])
    pre1 = inputs @ spec.input_weights
    stats = {}
    if spec.batchnorm:
        norm1, inv1, act1, mu1, var1 = _bn_forward(pre1, spec.bn_scale1, spec.bn_shift1,
                                                   spec.running_mean1, spec.running_var1,
                                                   spec.bn_eps, train)
        stats.update(mean1=mu1, var1=var1)
    else:
        norm1, inv1, act1 = pre1, np.ones(spec.R), pre1
    hidden = np.column_stack([np.ones(len(z)), elu(act1, a)])
    pre2 = hidden @ spec.hidden_weights
    if spec.batchnorm:
        norm2, inv2, act2, mu2, var2 = _bn_forward(pre2, spec.bn_scale2, spec.bn_shift2,
                                                   spec.running_mean2, spec.running_var2,
                                                   spec.bn_eps, train)
        stats.update(mean2=mu2, var2=var2)
    else:
        norm2, inv2, act2 = pre2, np.ones(spec.T), pre2
    out_act = elu(act2, a)
    q = out_act @ spec.output_weights

    if train and spec.batchnorm and update_running:
        m = spec.momentum
        spec.running_mean1 = m * spec.running_mean1 + (1 - m) * stats["mean1"]
        spec.running_var1 = m * spec.running_var1 + (1 - m) * stats["var1"]
        spec.running_mean2 = m * spec.running_mean2 + (1 - m) * stats["mean2"]
        spec.running_var2 = m * spec.running_var2 + (1 - m) * stats["var2"]

    cache = ForwardCache(mode, inputs, pre1, norm1, inv1, act1, hidden,
                         pre2, norm2, inv2, act2, out_act, stats)
    return q, cache


def _bn_backward(d_out, norm, inv_std, scale, train):
    d_scale = (d_out * norm).sum(axis=0)
    d_shift = d_out.sum(axis=0)
    d_norm = d_out * scale
    if not train:
        return d_norm * inv_std, d_scale, d_shift
    n = d_out.shape[0]
    d_pre = inv_std / n * (n * d_norm - d_norm.sum(axis=0) - norm * (d_norm * norm).sum(axis=0))
    return d_pre, d_scale, d_shift


def mlp_backward(cache: ForwardCache, dq, spec: MLPSpec) -> dict:
    """Gradients of sum(dq * q) with respect to every network parameter.

    Batch-norm columns are differentiated through the batch mean and variance
    when the cache came from a train-mode pass.
    """
    dq = np.asarray(dq, dtype=float)
    if dq.shape != (cache.inputs.shape[0],):
        raise ModelError("dq length does not match the cached batch")
    if cache.out_act.shape[1] != spec.T or cache.pre1.shape[1] != spec.R:
        raise ModelError("cache does not match spec dimensions")
    a = spec.elu_alpha
    train = cache.mode == "train"
    grads = {"output_weights": cache.out_act.T @ dq}
    d_act2 = np.outer(dq, spec.output_weights) * elu_grad(cache.act_in2, a)
    if spec.batchnorm:
        d_pre2, grads["bn_scale2"], grads["bn_shift2"] = _bn_backward(
            d_act2, cache.norm2, cache.inv_std2, spec.bn_scale2, train)
    else:
        d_pre2 = d_act2
    grads["hidden_weights"] = cache.hidden.T @ d_pre2
    d_hidden = d_pre2 @ spec.hidden_weights[1:].T
    d_act1 = d_hidden * elu_grad(cache.act_in1, a)
    if spec.batchnorm:
        d_pre1, grads["bn_scale1"], grads["bn_shift1"] = _bn_backward(
            d_act1, cache.norm1, cache.inv_std1, spec.bn_scale1, train)
    else:
        d_pre1 = d_act1
    grads["input_weights"] = cache.inputs.T @ d_pre1
    return grads


# ------------------------------------------------------------- serialization


def model_from_dict(d: dict):
    kind = d.get("type")
    if kind == "polynomial":
        return PolynomialSpec(int(d["B"]), int(d["p"]), int(d["covariate_order"]),
                              bool(d["include_interactions"]), np.asarray(d["coefficients"], dtype=float))
    if kind == "mlp":
        kwargs = {k: v for k, v in d.items() if k not in ("type",)}
        return MLPSpec(**kwargs)
    raise ModelError(f"unknown model type {kind!r}")
