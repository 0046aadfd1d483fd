"""Optimizers for the case-control objective.

``fit_poly_mcc`` exploits the M = 1 reduction to ridge logistic regression on
difference rows and solves it by damped Newton (IRLS). ``fit_sgd`` runs
mini-batch ADAM with step decay for any q-model (used for the network).
``fit_gd`` is a plain full-batch gradient descent on the general objective,
kept as a reference optimizer.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .casecontrol import ControlSet, nll, nll_gradient
from .qmodel import PolynomialSpec

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass
class SGDConfig:
    batch_size: int = 50
    total_steps: int = 600
    initial_step_size: float = 1.0
    halve_every: int = 100
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if min(self.batch_size, self.total_steps, self.halve_every) < 1 or self.initial_step_size <= 0:
            raise ValueError("batch_size, total_steps, halve_every and initial_step_size must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1) or self.adam_epsilon <= 0:
            raise ValueError("ADAM betas must lie in (0, 1) and epsilon must be positive")

    def step_size(self, step: int) -> float:
        return self.initial_step_size * 0.5 ** (step // self.halve_every)


@dataclass
class FitReport:
    final_objective: float
    trace: list = field(default_factory=list)
    seconds: float = 0.0
    converged: bool = True
    iterations: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# -------------------------------------------------------------- IRLS (M = 1)


def _logistic_objective(D, theta, omega):
    return float(np.logaddexp(0.0, -(D @ theta)).sum() + omega * theta @ theta)


def ridge_logistic_newton(D: np.ndarray, omega: float, tol: float = 1e-8, max_iter: int = 100,
                          theta0=None):
    """Minimize sum_i log(1 + exp(-d_i . theta)) + omega ||theta||^2.

    This is ridge logistic regression without intercept where every label is
    1. Damped Newton with step halving; returns (theta, converged, objective
    trace).
    """
    n, k = D.shape
    theta = np.zeros(k) if theta0 is None else np.array(theta0, dtype=float)
    obj = _logistic_objective(D, theta, omega)
    trace = [obj]
    for _ in range(max_iter):
        s = D @ theta
        grad = -D.T @ expit(-s) + 2.0 * omega * theta
        if np.max(np.abs(grad), initial=0.0) < tol:
            return theta, True, trace
        w = expit(s) * expit(-s)
        hess = (D * w[:, None]).T @ D + 2.0 * omega * np.eye(k)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            cand = theta - t * step
            new_obj = _logistic_objective(D, cand, omega)
            if new_obj <= obj:
                break
            t *= 0.5
        else:
            log.warning("line search failed to decrease the objective")
            return theta, False, trace
        theta, obj = cand, new_obj
        trace.append(obj)
    s = D @ theta
    grad = -D.T @ expit(-s) + 2.0 * omega * theta
    return theta, bool(np.max(np.abs(grad), initial=0.0) < tol), trace


def fit_poly_mcc(z, x, spec: PolynomialSpec, controls: ControlSet, omega: float,
                 tol: float = 1e-8, max_iter: int = 100):
    """Fit polynomial coefficients with one control per observation.

    Returns the fitted spec and a :class:`FitReport`; ``report.converged``
    is False when the gradient tolerance was not reached.
    """
    if controls.M != 1:
        raise ValueError(f"matched case-control fitting needs M = 1, got M = {controls.M}")
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    start = time.perf_counter()
    x = np.asarray(x, dtype=float)
    D = spec.features(np.asarray(z, dtype=float), x) - spec.features(controls.values[:, 0], x)
    theta, converged, trace = ridge_logistic_newton(D, omega, tol, max_iter)
    if not converged:
        log.warning("IRLS did not converge in %d iterations", max_iter)
    fitted = spec.with_params(theta)
    report = FitReport(trace[-1], trace, time.perf_counter() - start, converged, len(trace) - 1,
                       {"method": "irls", "omega": omega, "tol": tol, "max_iter": max_iter})
    return fitted, report


# ----------------------------------------------------------- gradient descent


def fit_gd(model, z, x, controls: ControlSet, omega: float, max_iter: int = 20000,
           tol: float = 1e-8, train: bool = True):
    """Full-batch gradient descent with Armijo backtracking on the case-control objective."""
    start = time.perf_counter()
    theta = model.get_params()
    value, grad = nll_gradient(model, z, x, controls, omega, train=train, return_value=True)
    trace = [value]
    t = 1.0
    converged = False
    for it in range(max_iter):
        if np.max(np.abs(grad)) < tol:
            converged = True
            break
        g2 = grad @ grad
        t *= 2.0
        while True:
            cand = model.with_params(theta - t * grad)
            cand_value = nll(cand, z, x, controls, omega, train=train)
            if cand_value <= value - 0.5 * t * g2 or t < 1e-16:
                break
            t *= 0.5
        model, theta = cand, cand.get_params()
        value, grad = nll_gradient(model, z, x, controls, omega, train=train, return_value=True)
        trace.append(value)
    report = FitReport(value, trace, time.perf_counter() - start, converged, len(trace) - 1,
                       {"method": "gd", "omega": omega, "tol": tol, "max_iter": max_iter})
    return model, report


# ------------------------------------------------------------ mini-batch ADAM


class Adam:
    def __init__(self, size, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0

    def step(self, grad, lr):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return -lr * m_hat / (np.sqrt(v_hat) + self.eps)


def fit_sgd(model, z, x, controls: ControlSet, omega: float, config: SGDConfig, callback=None):
    """Mini-batch ADAM with step decay.

    Each case row travels with its own controls; the ridge term is scaled by
    batch/n so a full pass matches the full objective. Batches are reshuffled
    every epoch and the trailing short batch is used as-is.
    """
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(z)
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds n = {n}")
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    opt = Adam(model.get_params().size, config.adam_beta1, config.adam_beta2, config.adam_epsilon)
    trace = []
    step = 0
    batches: list = []
    while step < config.total_steps:
        if not batches:
            perm = rng.permutation(n)
            batches = [perm[i:i + config.batch_size] for i in range(0, n, config.batch_size)]
        idx = batches.pop(0)
        value, grad = nll_gradient(model, z[idx], x[idx], controls.subset(idx), omega,
                                   train=True, penalty_scale=len(idx) / n,
                                   return_value=True, update_running=True)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise DivergenceError(f"objective became non-finite at step {step}")
        model = model.with_params(model.get_params() + opt.step(grad, config.step_size(step)))
        trace.append(value)
        step += 1
        if callback is not None:
            callback(step, model)
    final = nll(model, z, x, controls, omega, train=False)
    if not np.isfinite(final):
        raise DivergenceError("final objective is non-finite")
    report = FitReport(final, trace, time.perf_counter() - start, True, step,
                       dict(asdict(config), method="adam", omega=omega))
    return model, report


fit_mlp_sgd = fit_sgd
