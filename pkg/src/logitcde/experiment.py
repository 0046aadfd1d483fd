"""End-to-end fitting, the simulation study and grouped cross-validation."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .casecontrol import sample_controls
from .dataset import (
    Dataset,
    NormalizationParams,
    apply_normalization,
    fit_normalization,
    kfold_by_group,
)
from .fit import DivergenceError, SGDConfig, fit_poly_mcc, fit_sgd
from .predict import RangeInfo, cdf_at, predict_grids
from .qmodel import PolynomialSpec, mlp_init_he, model_from_dict
from .scoring import ScoreReport, crps, crps_divergence, true_cdf
from .simgen import ScenarioConfig, generate
from .transform import GaussianTransform, TransformError, fit_bounds, fit_ols, to_unit

log = logging.getLogger(__name__)

METHOD_LABELS = {
    "poly-mcc": "Polynomial M=1",
    "mlp-mcc": "Deep Learning M=1",
    "mlp-ipp": "Deep Learning M=10",
    "ols-gaussian": "OLS Gaussian",
}
DEFAULT_M = {"poly-mcc": 1, "mlp-mcc": 1, "mlp-ipp": 10, "ols-gaussian": 0}

# Ridge penalties by scenario and training-set size for the simulation study.
POLY_OMEGA = {1: {0: 0.025}, 2: {0: 0.05}, 3: {200: 0.025, 1000: 0.01, 4000: 0.01}, 4: {0: 0.05}}
MLP_OMEGA = {
    1: {200: 0.025, 1000: 0.002, 4000: 0.0025},
    2: {200: 0.015, 1000: 0.0025, 4000: 0.001},
    3: {200: 0.0075, 1000: 0.001, 4000: 0.001},
    4: {200: 0.01, 1000: 0.001, 4000: 0.0005},
}


def default_omega(method: str, scenario: int, n: int) -> float:
    if method == "ols-gaussian":
        return 0.0
    table = (POLY_OMEGA if method == "poly-mcc" else MLP_OMEGA).get(scenario, {0: 0.01})
    if 0 in table:
        return table[0]
    return table[min(table, key=lambda k: abs(k - n))]


@dataclass
class MethodConfig:
    """Model-shape settings shared by every fit of one method."""

    B: int = 3
    covariate_order: int = 2
    interactions: Optional[bool] = None   # None: on whenever p > 1
    R: int = 30
    T: int = 30
    M: Optional[int] = None
    control_grid: bool = False
    sgd: SGDConfig = field(default_factory=SGDConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "MethodConfig":
        d = dict(d)
        sgd = SGDConfig(**d.pop("sgd", {}))
        return cls(sgd=sgd, **d)


@dataclass
class FittedCDE:
    """Everything needed to predict for raw covariates."""

    method: str
    normalization: NormalizationParams
    transform: GaussianTransform
    model: object
    range_info: RangeInfo
    omega: float
    report: dict = field(default_factory=dict)

    def normalize(self, features) -> np.ndarray:
        return (np.atleast_2d(np.asarray(features, dtype=float)) - self.normalization.mean) / self.normalization.sd

    def predict(self, features, L: int = 100, grid_mode: str = "cutpoint"):
        return predict_grids(self.model, self.normalize(features), L, grid_mode, self.transform, self.range_info)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "label": METHOD_LABELS.get(self.method, self.method),
            "omega": self.omega,
            "normalization": self.normalization.to_dict(),
            "transform": self.transform.to_dict(),
            "range": self.range_info.to_dict(),
            "model": self.model.to_dict(),
            "report": self.report,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedCDE":
        r = d["range"]
        return cls(d["method"], NormalizationParams.from_dict(d["normalization"]),
                   GaussianTransform.from_dict(d["transform"]), model_from_dict(d["model"]),
                   RangeInfo(r["lower"], r["upper"], r.get("extend", 0.1)), float(d["omega"]),
                   d.get("report", {}))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "FittedCDE":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_method(train: Dataset, method: str, omega: float, config: MethodConfig = None, seed=0) -> FittedCDE:
    """Normalize covariates, fit the response transform and the q-model on ``train``."""
    if method not in METHOD_LABELS:
        raise ValueError(f"unknown method {method!r}; choose from {sorted(METHOD_LABELS)}")
    config = config or MethodConfig()
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    ctl_seed, init_seed, sgd_seed = ss.spawn(3)
    norm = fit_normalization(train)
    trn = apply_normalization(train, norm)
    try:
        transform = fit_ols(trn)
    except TransformError as err:
        log.warning("%s; falling back to bounds transform", err)
        transform = fit_bounds(trn)
    range_info = RangeInfo.from_response(train.response)
    z = to_unit(trn.response, trn.features, transform)
    p = trn.p
    interactions = config.interactions if config.interactions is not None else p > 1
    M = config.M if config.M is not None else DEFAULT_M[method]
    report = {"converged": True, "seconds": 0.0}

    if method == "ols-gaussian":
        model = PolynomialSpec(1, p, 1, False)
    elif method == "poly-mcc":
        spec = PolynomialSpec(config.B, p, config.covariate_order, interactions)
        controls = sample_controls(trn.n, 1, ctl_seed, grid=config.control_grid)
        model, rep = fit_poly_mcc(z, trn.features, spec, controls, omega)
        report = rep.to_dict()
    else:
        controls = sample_controls(trn.n, M, ctl_seed, grid=config.control_grid)
        model = mlp_init_he(config.R, config.T, p, init_seed)
        sgd = config.sgd
        sgd = SGDConfig(**dict(asdict(sgd), batch_size=min(sgd.batch_size, trn.n),
                               seed=int(sgd_seed.generate_state(1)[0])))
        try:
            model, rep = fit_sgd(model, z, trn.features, controls, omega, sgd)
            report = rep.to_dict()
        except DivergenceError as err:
            log.warning("SGD diverged: %s", err)
            report = {"converged": False, "seconds": 0.0, "error": str(err)}
            model = PolynomialSpec(1, p, 1, False)
    report.pop("trace", None)
    return FittedCDE(method, norm, transform, model, range_info, omega, report)


def score_divergence(fitted: FittedCDE, test: Dataset, truth, L: int = 100, grid_points: int = 1000):
    lo, hi = fitted.range_info.bounds
    ests = fitted.predict(test.features, L, "cutpoint")
    scores = [crps_divergence(lambda y, e=e: cdf_at(e, y), lambda y, i=i: true_cdf(truth, i, y),
                              lo, hi, grid_points) for i, e in enumerate(ests)]
    return ScoreReport.from_scores(scores, lo, hi, grid_points, kind="crps_divergence")


def score_crps(fitted: FittedCDE, test: Dataset, L: int = 100, grid_points: int = 1000):
    lo, hi = fitted.range_info.bounds
    ests = fitted.predict(test.features, L, "cutpoint")
    scores = [crps(lambda y, e=e: cdf_at(e, y), y_obs, lo, hi, grid_points)
              for e, y_obs in zip(ests, test.response)]
    return ScoreReport.from_scores(scores, lo, hi, grid_points, kind="crps")


# ----------------------------------------------------------- simulation study


@dataclass
class ExperimentConfig:
    scenarios: list = field(default_factory=lambda: [1, 2, 3, 4])
    n_list: list = field(default_factory=lambda: [200, 1000, 4000])
    replicates: int = 100
    methods: list = field(default_factory=lambda: ["poly-mcc", "mlp-mcc", "mlp-ipp"])
    M: dict = field(default_factory=dict)
    omega_grid: dict = field(default_factory=dict)  # method -> list; empty uses the built-in defaults
    method_config: dict = field(default_factory=dict)  # method -> MethodConfig
    sgd: SGDConfig = field(default_factory=SGDConfig)
    out_dir: Optional[str] = None
    master_seed: int = 0
    L: int = 100
    grid_points: int = 1000
    threads: int = 1

    def __post_init__(self):
        if not self.scenarios or not self.n_list or not self.methods or self.replicates < 1:
            raise ValueError("scenarios, n_list, methods must be nonempty and replicates positive")
        unknown = [m for m in self.methods if m not in METHOD_LABELS]
        if unknown:
            raise ValueError(f"unknown methods {unknown}")

    def config_for(self, method: str) -> MethodConfig:
        cfg = self.method_config.get(method)
        if cfg is None:
            cfg = MethodConfig(sgd=self.sgd)
        elif isinstance(cfg, dict):
            cfg = MethodConfig.from_dict(cfg)
        if method in self.M:
            cfg = MethodConfig(**dict(vars(cfg), M=self.M[method]))
        return cfg

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "sgd" in d:
            d["sgd"] = SGDConfig(**d["sgd"])
        return cls(**d)


def _select_omega(train: Dataset, method, grid, cfg, seed, L, grid_points) -> float:
    """Pick the penalty with the lowest mean CRPS on a 20% inner hold-out."""
    rng = np.random.default_rng(seed.spawn(1)[0])
    perm = rng.permutation(train.n)
    n_val = max(1, train.n // 5)
    inner_tr, inner_val = train.subset(perm[n_val:]), train.subset(perm[:n_val])
    best, best_score = grid[0], np.inf
    for omega in grid:
        fitted = fit_method(inner_tr, method, omega, cfg, seed)
        score = score_crps(fitted, inner_val, L, grid_points).mean
        if score < best_score:
            best, best_score = omega, score
    return best


def run_cell(config: ExperimentConfig, scenario: int, n: int, rep: int) -> list[dict]:
    data_seed = np.random.SeedSequence([config.master_seed, scenario, n, rep])
    train, test, truth = generate(ScenarioConfig(scenario, n, data_seed))
    rows = []
    for mi, method in enumerate(config.methods):
        cfg = config.config_for(method)
        fit_seed = np.random.SeedSequence([config.master_seed, scenario, n, rep, 1000 + mi])
        grid = config.omega_grid.get(method) or [default_omega(method, scenario, n)]
        omega = grid[0] if len(grid) == 1 else _select_omega(train, method, grid, cfg, fit_seed,
                                                             config.L, config.grid_points)
        start = time.perf_counter()
        fitted = fit_method(train, method, omega, cfg, fit_seed)
        seconds = time.perf_counter() - start
        report = score_divergence(fitted, test, truth, config.L, config.grid_points)
        rows.append({
            "scenario": scenario, "n": n, "replicate": rep, "method": method,
            "label": METHOD_LABELS[method], "omega": omega, "divergence": report.mean,
            "seconds": seconds, "converged": bool(fitted.report.get("converged", True)),
        })
    return rows


def summarize(scores: pd.DataFrame):
    """Per (scenario, n, method): quartiles of the divergence, and mean/SE of fit time."""
    g = scores.groupby(["scenario", "n", "method", "label"], sort=True)
    summary = g["divergence"].agg(
        median="median", q1=lambda s: s.quantile(0.25), q3=lambda s: s.quantile(0.75),
        mean="mean", count="count").reset_index()
    timing = g["seconds"].agg(
        mean_minutes=lambda s: s.mean() / 60.0,
        se_minutes=lambda s: s.std(ddof=1) / np.sqrt(len(s)) / 60.0 if len(s) > 1 else np.nan,
    ).reset_index()
    return summary, timing


def run_simulation_study(config: ExperimentConfig):
    """Run every (scenario, n, replicate) cell; returns (scores, summary, timing) frames."""
    cells = [(s, n, r) for s in config.scenarios for n in config.n_list for r in range(config.replicates)]
    if config.threads > 1:
        with ProcessPoolExecutor(config.threads) as pool:
            chunks = list(pool.map(run_cell, [config] * len(cells), *zip(*cells)))
    else:
        chunks = [run_cell(config, *c) for c in cells]
    scores = pd.DataFrame([row for chunk in chunks for row in chunk])
    scores = scores.sort_values(["scenario", "n", "replicate", "method"], kind="stable").reset_index(drop=True)
    summary, timing = summarize(scores)
    if config.out_dir:
        from pathlib import Path
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        scores.to_csv(out / "scores.csv", index=False)
        summary.to_csv(out / "summary.csv", index=False)
        timing.to_csv(out / "timing.csv", index=False)
    return scores, summary, timing


# ----------------------------------------------------------- cross-validation


@dataclass
class CVResult:
    method: str
    report: ScoreReport            # scores are the per-fold mean CRPS values
    folds: list                    # per-fold ScoreReport with per-observation scores
    fitted: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"method": self.method, "label": METHOD_LABELS.get(self.method, self.method),
                "mean": self.report.mean, "se": self.report.se,
                "fold_means": self.report.scores.tolist(),
                "fold_sizes": [len(f.scores) for f in self.folds]}


def run_cv(data: Dataset, k: int = 5, methods=("poly-mcc",), omega: dict = None,
           method_config: dict = None, seed=0, L: int = 100, grid_points: int = 1000,
           keep_models: bool = False) -> dict:
    """Grouped k-fold CV; every fold is scored by mean CRPS on its held-out rows.

    Normalization, transform and model see only the training folds. The
    reported mean is the average of the fold means and the SE is their
    standard deviation over sqrt(k).
    """
    omega = omega or {}
    method_config = method_config or {}
    folds = kfold_by_group(data, k, seed)
    results = {}
    for mi, method in enumerate(methods):
        cfg = method_config.get(method) or MethodConfig()
        if isinstance(cfg, dict):
            cfg = MethodConfig.from_dict(cfg)
        fold_reports, fitted_models = [], []
        for f, (tr_idx, te_idx) in enumerate(folds):
            if len(te_idx) == 0:
                raise ValueError(f"fold {f} has no test rows")
            fitted = fit_method(data.subset(tr_idx), method, omega.get(method, 1e-6), cfg,
                                np.random.SeedSequence([int(seed), mi, f]))
            fold_reports.append(score_crps(fitted, data.subset(te_idx), L, grid_points))
            if keep_models:
                fitted_models.append(fitted)
        means = [r.mean for r in fold_reports]
        summary = ScoreReport.from_scores(means, np.nan, np.nan, grid_points, kind="crps")
        results[method] = CVResult(method, summary, fold_reports, fitted_models)
    return results


def cv_table(results: dict) -> pd.DataFrame:
    return pd.DataFrame([{"method": m, "label": METHOD_LABELS.get(m, m), "mean": r.report.mean,
                          "se": r.report.se} for m, r in results.items()])


# ------------------------------------------------------------- curve export


def emit_quantile_curves(fitted: FittedCDE, covariates, L: int = 100) -> pd.DataFrame:
    """Quantile-grid densities for each covariate row, for plotting.

    The first and last grid points are shown with zero probability and the
    interior masses are renormalized to sum to one.
    """
    covariates = np.atleast_2d(np.asarray(covariates, dtype=float))
    ests = fitted.predict(covariates, L, "quantile")
    names = [f"x{j + 1}" for j in range(covariates.shape[1])]
    frames = []
    for x, e in zip(covariates, ests):
        rel = e.probabilities.copy()
        rel[0] = rel[-1] = 0.0
        rel /= rel.sum()
        frame = pd.DataFrame({"grid_index": np.arange(L), "quantile": e.z_grid, "y": e.y_grid,
                              "probability": rel})
        for j, name in enumerate(names):
            frame.insert(j, name, x[j])
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)
