"""Maps the response onto the unit interval and back.

Two modes:

* ``gaussian``: z = Phi((y - [1, x] @ beta) / sigma) with beta, sigma from OLS.
* ``bounds``: z = (y - lower) / (upper - lower), for use when OLS is not
  identifiable (n <= p + 1) or when fixed response bounds are wanted.

In both modes z is clamped to [clamp_eps, 1 - clamp_eps].
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .dataset import Dataset

SQRT_2PI = np.sqrt(2.0 * np.pi)


class TransformError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianTransform:
    beta: np.ndarray
    sigma: float
    clamp_eps: float = 1e-6
    mode: str = "gaussian"
    lower: Optional[float] = None
    upper: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if not 0.0 < self.clamp_eps < 0.5:
            raise TransformError("clamp_eps must lie in (0, 0.5)")
        if self.mode == "gaussian":
            if not self.sigma > 0:
                raise TransformError("sigma must be positive")
        elif self.mode == "bounds":
            if self.lower is None or self.upper is None or not self.upper > self.lower:
                raise TransformError("bounds mode needs lower < upper")
        else:
            raise TransformError(f"unknown mode {self.mode!r}")

    @property
    def p(self) -> int:
        return len(self.beta) - 1

    def location(self, x) -> np.ndarray:
        """Fitted conditional mean [1, x] @ beta (row-wise for a matrix)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.p:
            raise TransformError(f"expected {self.p} covariates, got {x.shape[-1]}")
        return self.beta[0] + x @ self.beta[1:]

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "beta": self.beta.tolist(),
            "sigma": float(self.sigma),
            "clamp_eps": float(self.clamp_eps),
            "lower": self.lower,
            "upper": self.upper,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianTransform":
        return cls(
            beta=np.asarray(d["beta"], dtype=float),
            sigma=float(d["sigma"]),
            clamp_eps=float(d.get("clamp_eps", 1e-6)),
            mode=d.get("mode", "gaussian"),
            lower=d.get("lower"),
            upper=d.get("upper"),
        )


def fit_ols(data: Dataset, clamp_eps: float = 1e-6, sigma_floor_rel: float = 1e-8) -> GaussianTransform:
    """OLS fit of the response on an intercept plus all features.

    sigma is sqrt(RSS / (n - p - 1)), floored at ``sigma_floor_rel`` times the
    response range (or times 1 for a constant response).
    """
    n, p = data.n, data.p
    if n <= p + 1:
        raise TransformError(f"OLS needs n > p + 1 (n={n}, p={p}); use bounds mode")
    design = np.column_stack([np.ones(n), data.features])
    beta, _, rank, _ = np.linalg.lstsq(design, data.response, rcond=None)
    if rank < p + 1:
        raise TransformError("design matrix is rank deficient")
    resid = data.response - design @ beta
    sigma = np.sqrt(resid @ resid / (n - p - 1))
    span = np.ptp(data.response)
    floor = sigma_floor_rel * (span if span > 0 else 1.0)
    return GaussianTransform(beta, float(max(sigma, floor)), clamp_eps)


def fit_bounds(data: Dataset, extend: float = 0.1, clamp_eps: float = 1e-6) -> GaussianTransform:
    """Linear map of the training response range, widened by ``extend`` in total."""
    lo, hi = float(data.response.min()), float(data.response.max())
    span = hi - lo if hi > lo else 1.0
    return GaussianTransform(
        np.zeros(data.p + 1), 1.0, clamp_eps, mode="bounds",
        lower=lo - 0.5 * extend * span, upper=hi + 0.5 * extend * span,
    )


def _standardize(y, x, t: GaussianTransform):
    y = np.asarray(y, dtype=float)
    if t.mode == "gaussian":
        return (y - t.location(x)) / t.sigma
    return (y - t.lower) / (t.upper - t.lower)


def to_unit(y, x, t: GaussianTransform, clamp: bool = True):
    u = _standardize(y, x, t)
    z = ndtr(u) if t.mode == "gaussian" else u
    if clamp:
        z = np.clip(z, t.clamp_eps, 1.0 - t.clamp_eps)
    return z


def from_unit(z, x, t: GaussianTransform):
    z = np.asarray(z, dtype=float)
    if np.any((z <= 0.0) | (z >= 1.0)):
        raise TransformError("z must lie strictly inside (0, 1)")
    if t.mode == "gaussian":
        return t.location(x) + t.sigma * ndtri(z)
    return t.lower + z * (t.upper - t.lower)


def unit_jacobian(y, x, t: GaussianTransform):
    """dz/dy of the unclamped map."""
    if t.mode == "gaussian":
        u = _standardize(y, x, t)
        return np.exp(-0.5 * u * u) / (SQRT_2PI * t.sigma)
    return np.full(np.shape(y), 1.0 / (t.upper - t.lower))


def density_to_original(f_z, y, x, t: GaussianTransform):
    """Change of variables: density on z at G(y) times |dG/dy|."""
    f_z = np.asarray(f_z, dtype=float)
    if np.any(f_z < 0):
        raise TransformError("density values must be nonnegative")
    return f_z * unit_jacobian(y, x, t)
