"""Hybrid GLM plus Laplace-approximated Gaussian process models for binary time series."""

__version__ = "0.1.0"

from .config import RunConfig, config_hash
from .data import BinarySeriesDataset, load_csv, split_data, write_csv
from .glm import FixedEffectFit, fit_glm, select_by_ic, wald_ci
from .kernels import KernelParams, build_cov_matrix, build_cross_cov, sample_gp
from .laplace import find_mode, predict_probability
from .links import LinkKind
from .model import HibitsModel, classify, fit_hibits, one_step_forecast, predict, predict_dataset
from .bootstrap import bootstrap_beta
from .evaluation import error_rate, paired_bonferroni_ci
from .select import optimize_lambda
from .simulate import ScenarioConfig, generate, scenario_config

__all__ = [
    "BinarySeriesDataset",
    "FixedEffectFit",
    "HibitsModel",
    "KernelParams",
    "LinkKind",
    "RunConfig",
    "ScenarioConfig",
    "bootstrap_beta",
    "build_cov_matrix",
    "build_cross_cov",
    "classify",
    "config_hash",
    "error_rate",
    "find_mode",
    "fit_glm",
    "fit_hibits",
    "generate",
    "load_csv",
    "one_step_forecast",
    "optimize_lambda",
    "paired_bonferroni_ci",
    "predict",
    "predict_dataset",
    "predict_probability",
    "sample_gp",
    "scenario_config",
    "select_by_ic",
    "split_data",
    "wald_ci",
    "write_csv",
]
