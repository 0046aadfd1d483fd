"""Conditional density estimation with a logistic transform of a smooth model,
fit through case-control approximations of the normalizing integral."""

from .casecontrol import ControlSet, nll, nll_gradient, sample_controls
from .dataset import Dataset, NormalizationParams, apply_normalization, fit_normalization, kfold_by_group, load_table
from .experiment import FittedCDE, fit_method, run_cv, run_simulation_study
from .fit import FitReport, SGDConfig, fit_poly_mcc, fit_sgd
from .predict import DensityEstimate, RangeInfo, cdf_at, density_on_y, predict_grid
from .qmodel import MLPSpec, PolynomialSpec, mlp_init_he, poly_features
from .scoring import TrueConditional, crps, crps_divergence, true_cdf
from .simgen import ScenarioConfig, generate
from .transform import GaussianTransform, fit_ols, from_unit, to_unit

__version__ = "0.1.0"
