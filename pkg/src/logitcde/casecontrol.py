"""Control sampling and the case-control negative log-likelihood.

For observation i with case z_i and controls z*_i1..z*_iM, all at x_i, the
contribution is ``-q(z_i) + logsumexp(q(z_i), q(z*_i1), ..., q(z*_iM))``.
The objective adds ``omega * ||theta||^2`` over the model's penalized
parameters. M = 1 is the matched case-control form; larger M is a Monte
Carlo estimate of the normalizing integral of exp(q) over (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax


@dataclass(frozen=True)
class ControlSet:
    values: np.ndarray   # (n, M), strictly inside (0, 1)
    seed: object = None

    @property
    def M(self) -> int:
        return self.values.shape[1]

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def subset(self, idx) -> "ControlSet":
        return ControlSet(self.values[np.asarray(idx)], self.seed)


def sample_controls(n: int, M: int, seed=None, grid: bool = False) -> ControlSet:
    """Uniform(0, 1) controls, drawn independently for every observation.

    ``grid=True`` instead gives every observation the midpoints of M equal
    cells of the unit interval.
    """
    if n < 1 or M < 1:
        raise ValueError("n and M must be at least 1")
    if grid:
        vals = np.tile((np.arange(M) + 0.5) / M, (n, 1))
    else:
        rng = np.random.default_rng(seed)
        vals = rng.random((n, M))
        # Generator.random draws from [0, 1); exact zeros are remapped.
        vals[vals == 0.0] = np.nextafter(0.0, 1.0)
    return ControlSet(vals, seed)


def _stack(z_cases, x, controls: ControlSet):
    z_cases = np.asarray(z_cases, dtype=float)
    x = np.asarray(x, dtype=float)
    n = len(z_cases)
    if x.ndim != 2 or x.shape[0] != n or controls.n != n:
        raise ValueError(f"inconsistent sizes: z {n}, x {x.shape}, controls {controls.values.shape}")
    m1 = controls.M + 1
    z_all = np.column_stack([z_cases, controls.values]).ravel()
    x_all = np.repeat(x, m1, axis=0)
    return z_all, x_all, n, m1


def nll_terms(qmat) -> np.ndarray:
    """Per-observation terms from a (n, M + 1) q matrix with the case in column 0."""
    qmat = np.asarray(qmat, dtype=float)
    return logsumexp(qmat, axis=1) - qmat[:, 0]


def upstream_grad(qmat) -> np.ndarray:
    """d(sum of nll_terms)/dq: softmax weights, minus one on the case column."""
    w = softmax(np.asarray(qmat, dtype=float), axis=1)
    w[:, 0] -= 1.0
    return w


def penalty(model, omega: float) -> float:
    theta = model.get_params()[model.penalty_mask()]
    return omega * float(theta @ theta)


def evaluate_qmat(model, z_cases, x, controls: ControlSet, train: bool = True, update_running: bool = False):
    z_all, x_all, n, m1 = _stack(z_cases, x, controls)
    q, cache = model.forward(z_all, x_all, train=train, update_running=update_running)
    return q.reshape(n, m1), cache


def nll(model, z_cases, x, controls: ControlSet, omega: float = 0.0, train: bool = True) -> float:
    """Penalized case-control negative log-likelihood.

    For a network, ``train=True`` normalizes with statistics of the stacked
    case-plus-control batch (running moments are left untouched);
    ``train=False`` uses the running moments.
    """
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    qmat, _ = evaluate_qmat(model, z_cases, x, controls, train=train)
    return float(nll_terms(qmat).sum()) + penalty(model, omega)


def nll_gradient(model, z_cases, x, controls: ControlSet, omega: float = 0.0, train: bool = True,
                 penalty_scale: float = 1.0, return_value: bool = False, update_running: bool = False):
    """Flat gradient of :func:`nll` with respect to ``model.get_params()``.

    ``penalty_scale`` multiplies the ridge term (used for mini-batches).
    """
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    qmat, cache = evaluate_qmat(model, z_cases, x, controls, train=train, update_running=update_running)
    dq = upstream_grad(qmat).ravel()
    grad = model.param_grad(cache, dq)
    mask = model.penalty_mask()
    theta = model.get_params()
    grad = grad + 2.0 * omega * penalty_scale * np.where(mask, theta, 0.0)
    if return_value:
        value = float(nll_terms(qmat).sum()) + penalty_scale * penalty(model, omega)
        return value, grad
    return grad
