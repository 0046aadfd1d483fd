"""CRPS, CRPS divergence and the true conditional CDFs of the simulation models."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import ndtr

SN_TRUNCATION = 12.0


# ------------------------------------------------------------------- scores


def riemann_grid(l: float, u: float, grid_points: int = 1000) -> np.ndarray:
    """Left endpoints of ``grid_points`` equal cells covering [l, u)."""
    if not l < u:
        raise ValueError(f"need l < u, got l={l}, u={u}")
    return l + (u - l) * np.arange(grid_points) / grid_points


def crps(cdf, y_obs, l: float, u: float, grid_points: int = 1000) -> float:
    """Range-normalized CRPS, int_l^u (F(y) - 1{y >= y_obs})^2 dy / (u - l).

    ``cdf`` is a vectorized callable. Left-endpoint Riemann sum.
    """
    y = riemann_grid(l, u, grid_points)
    diff = np.asarray(cdf(y), dtype=float) - (y >= y_obs)
    return float(np.mean(diff * diff))


def crps_divergence(cdf, true_cdf, l: float, u: float, grid_points: int = 1000) -> float:
    """Range-normalized int_l^u (F_hat - F)^2 dy / (u - l) on the same grid as :func:`crps`."""
    y = riemann_grid(l, u, grid_points)
    diff = np.asarray(cdf(y), dtype=float) - np.asarray(true_cdf(y), dtype=float)
    return float(np.mean(diff * diff))


@dataclass
class ScoreReport:
    scores: np.ndarray
    mean: float
    se: float
    grid_points: int
    lower: float
    upper: float
    kind: str = "crps"

    @classmethod
    def from_scores(cls, scores, l, u, grid_points=1000, kind="crps", se=None) -> "ScoreReport":
        scores = np.asarray(scores, dtype=float)
        if se is None:
            se = float(scores.std(ddof=1) / np.sqrt(len(scores))) if len(scores) > 1 else float("nan")
        return cls(scores, float(scores.mean()), se, grid_points, float(l), float(u), kind)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mean": self.mean, "se": self.se, "n": int(len(self.scores)),
                "grid_points": self.grid_points, "lower": self.lower, "upper": self.upper,
                "scores": self.scores.tolist()}


# -------------------------------------------------------------- skew normal


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    def simpson(fa, fm, fb, a, b):
        return (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a, m)
        right = simpson(fm, frm, fb, m, b)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * tol:
            return left + right + delta / 15.0
        return (recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))

    if b == a:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def skewnorm_pdf_std(t: float, alpha: float) -> float:
    return 2.0 * math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) * 0.5 * math.erfc(-alpha * t / math.sqrt(2.0))


def skewnorm_cdf_quad(y: float, alpha: float, loc: float = 0.0, scale: float = 1.0,
                      tol: float = 1e-9) -> float:
    """Skew-normal CDF by adaptive Simpson on [-12, (y - loc) / scale]."""
    t = (y - loc) / scale
    if t <= -SN_TRUNCATION:
        return 0.0
    if t >= SN_TRUNCATION:
        return 1.0
    total = 0.0
    # split at 0 where the integrand's skew factor changes fastest
    edges = [-SN_TRUNCATION] + ([0.0] if t > 0 else []) + [t]
    for a, b in zip(edges[:-1], edges[1:]):
        total += adaptive_simpson(lambda s: skewnorm_pdf_std(s, alpha), a, b, tol)
    return min(max(total, 0.0), 1.0)


@lru_cache(maxsize=8)
def _skewnorm_table(alpha: float, knots: int = 4801):
    """Cumulative adaptive-Simpson integrals on a uniform knot grid, for fast vectorized lookup."""
    t = np.linspace(-SN_TRUNCATION, SN_TRUNCATION, knots)
    f = lambda s: skewnorm_pdf_std(s, alpha)
    pieces = [adaptive_simpson(f, a, b, 1e-13) for a, b in zip(t[:-1], t[1:])]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    pdf = np.array([f(s) for s in t])
    return t, cdf, pdf


def skewnorm_cdf(y, alpha: float, loc=0.0, scale=1.0):
    """Vectorized skew-normal CDF via cubic Hermite interpolation of the quadrature table."""
    spline = _hermite(float(alpha))
    t = (np.asarray(y, dtype=float) - loc) / scale
    out = spline(np.clip(t, -SN_TRUNCATION, SN_TRUNCATION))
    return np.clip(out, 0.0, 1.0)


@lru_cache(maxsize=8)
def _hermite(alpha: float):
    t, cdf, pdf = _skewnorm_table(alpha)
    return CubicHermiteSpline(t, cdf, pdf)


def skewnorm_moments(alpha: float) -> tuple[float, float]:
    """Mean and variance of the standard skew-normal with shape ``alpha``."""
    delta = alpha / math.sqrt(1.0 + alpha * alpha)
    mean = delta * math.sqrt(2.0 / math.pi)
    return mean, 1.0 - 2.0 * delta * delta / math.pi


# --------------------------------------------------------- true conditionals


@dataclass
class TrueConditional:
    """Per-row parameters of the data-generating conditional distribution.

    Model 1: ``loc``, ``scale`` (Gaussian). Models 2 and 3: two equally
    weighted Gaussian components ``loc``/``scale`` and ``loc2``/``scale2``.
    Model 4: skew-normal with location ``loc``, scale ``scale`` and shape
    ``shape``.
    """

    model_id: int
    loc: np.ndarray
    scale: np.ndarray
    loc2: np.ndarray = None
    scale2: np.ndarray = None
    shape: float = 0.0
    weight: float = 0.5

    def __post_init__(self):
        if self.model_id not in (1, 2, 3, 4):
            raise ValueError(f"unknown model id {self.model_id}")
        self.loc = np.asarray(self.loc, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        if self.model_id in (2, 3):
            self.loc2 = np.asarray(self.loc2, dtype=float)
            self.scale2 = np.asarray(self.scale2, dtype=float)

    def __len__(self):
        return len(self.loc)

    def cdf(self, index: int):
        return lambda y: true_cdf(self, index, y)

    def to_dict(self) -> dict:
        d = {"model_id": self.model_id, "loc": self.loc.tolist(), "scale": self.scale.tolist(),
             "shape": self.shape, "weight": self.weight}
        if self.loc2 is not None:
            d["loc2"] = self.loc2.tolist()
            d["scale2"] = self.scale2.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrueConditional":
        return cls(int(d["model_id"]), d["loc"], d["scale"], d.get("loc2"), d.get("scale2"),
                   float(d.get("shape", 0.0)), float(d.get("weight", 0.5)))


def true_cdf(tc: TrueConditional, n_index: int, y):
    if not 0 <= n_index < len(tc):
        raise IndexError(f"row {n_index} out of range for {len(tc)} rows")
    y = np.asarray(y, dtype=float)
    m, s = tc.loc[n_index], tc.scale[n_index]
    if tc.model_id == 1:
        return ndtr((y - m) / s)
    if tc.model_id in (2, 3):
        w = tc.weight
        return w * ndtr((y - m) / s) + (1 - w) * ndtr((y - tc.loc2[n_index]) / tc.scale2[n_index])
    return skewnorm_cdf(y, tc.shape, m, s)
