"""Two-stage hybrid fit: fixed-effect GLM, then a Laplace GP conditioned on it.

Stage 1 fits ``t(intercept + X1 beta)``. Stage 2 fixes the offset
``beta_hat . x1`` (no intercept, the GP absorbs the level) and finds the
Laplace mode of the latent process over the GP inputs, optionally after
choosing ``lam`` by marginal likelihood.

GP inputs are min-max rescaled to [0, 1] over the training rows by default
(``gp_input="scaled"``); ``"raw"`` uses them unchanged, as the simulation
studies do.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LAG_NAME, BinarySeriesDataset, transform_columns
from .errors import ConvergenceError, InvalidInputError
from .glm import FixedEffectFit, fit_glm
from .kernels import KernelParams, build_cov_matrix, build_cross_cov, prior_diag
from .laplace import LaplaceState, PredictiveDistribution, find_mode, predict_latent, predict_probability
from .links import LinkKind
from .select import DEFAULT_BOUNDS, LambdaSearch, optimize_lambda

GP_INPUT_MODES = ("scaled", "raw")


@dataclass(eq=False)
class HibitsModel:
    stage1: FixedEffectFit
    kernel: KernelParams
    link: LinkKind
    laplace: LaplaceState
    train_X1: np.ndarray
    train_X2: np.ndarray
    x1_names: tuple = ()
    x2_names: tuple = ()
    gp_input: str = "scaled"
    x2_shift: np.ndarray | None = None
    x2_scale: np.ndarray | None = None
    lambda_search: LambdaSearch | None = None
    last_t: int | None = None
    offset_intercept: bool = False

    @property
    def beta(self) -> np.ndarray:
        """Fixed-effect slopes (intercept excluded)."""
        return self.stage1.slopes

    @property
    def intercept(self) -> float:
        return self.stage1.intercept

    @property
    def lambda_hat(self) -> float:
        return self.kernel.lam

    def scale_gp_inputs(self, X2) -> np.ndarray:
        X2 = np.asarray(X2, dtype=float)
        if X2.ndim == 1:
            X2 = X2[:, None]
        if self.gp_input == "raw":
            return X2
        return (X2 - self.x2_shift) / self.x2_scale


def gp_affine(X2, mode):
    if mode not in GP_INPUT_MODES:
        raise InvalidInputError(f"gp_input must be one of {GP_INPUT_MODES}, got {mode!r}")
    if mode == "raw":
        return None, None
    lo = X2.min(axis=0)
    span = X2.max(axis=0) - lo
    span = np.where(span > 0, span, 1.0)
    return lo, span


def fit_arrays(
    X1,
    X2,
    y,
    kernel_init: KernelParams | None = None,
    link=LinkKind.LOGIT,
    select_lambda: bool = True,
    lambda_bounds=DEFAULT_BOUNDS,
    gp_input: str = "scaled",
    x1_names=(),
    x2_names=(),
    offset_intercept: bool = False,
) -> HibitsModel:
    """Array-level version of :func:`fit_hibits`; ``X1`` and ``X2`` are on the model scale."""
    link = LinkKind.parse(link)
    kernel = kernel_init or KernelParams()
    y = np.asarray(y, dtype=float)
    X1 = np.asarray(X1, dtype=float).reshape(len(y), -1)
    X2 = np.asarray(X2, dtype=float).reshape(len(y), -1)

    stage1 = fit_glm(X1, y, link, with_intercept=True)
    offset = X1 @ stage1.slopes if X1.shape[1] else np.zeros(len(y))
    if offset_intercept:
        offset = offset + stage1.intercept

    shift, scale = gp_affine(X2, gp_input)
    Z2 = X2 if gp_input == "raw" else (X2 - shift) / scale

    search = None
    if select_lambda:
        lo, hi = map(float, lambda_bounds)
        if not hi > lo:
            raise InvalidInputError("lambda bounds must have positive length")
        search = optimize_lambda(Z2, y, kernel, link, offset, (lo, hi))
        kernel = kernel.with_lambda(search.lambda_hat)

    K = build_cov_matrix(Z2, kernel)
    try:
        state = find_mode(K, y, offset, link)
    except ConvergenceError as exc:
        raise ConvergenceError(str(exc), trace=exc.trace, payload=stage1) from exc

    return HibitsModel(
        stage1=stage1,
        kernel=kernel,
        link=link,
        laplace=state,
        train_X1=X1,
        train_X2=Z2,
        x1_names=tuple(x1_names),
        x2_names=tuple(x2_names),
        gp_input=gp_input,
        x2_shift=shift,
        x2_scale=scale,
        lambda_search=search,
        offset_intercept=offset_intercept,
    )


def fit_hibits(
    data: BinarySeriesDataset,
    kernel_init: KernelParams | None = None,
    link=LinkKind.LOGIT,
    select_lambda: bool = True,
    lambda_bounds=DEFAULT_BOUNDS,
    gp_input: str = "scaled",
    offset_intercept: bool = False,
) -> HibitsModel:
    """Fit the hybrid model to a dataset.

    Stage 2 non-convergence raises :class:`ConvergenceError` with the finished
    Stage-1 fit as ``payload``.
    """
    model = fit_arrays(
        data.fixed_design,
        data.gp_inputs,
        data.y,
        kernel_init=kernel_init,
        link=link,
        select_lambda=select_lambda,
        lambda_bounds=lambda_bounds,
        gp_input=gp_input,
        x1_names=data.x1_names,
        x2_names=data.x2_names,
        offset_intercept=offset_intercept,
    )
    model.last_t = int(data.t[-1]) if len(data) else None
    return model


def predict(model: HibitsModel, X1_test, X2_test) -> PredictiveDistribution:
    """Predictive latent mean/variance and probability for test rows (model scale)."""
    X1_test = np.asarray(X1_test, dtype=float)
    X2_test = np.asarray(X2_test, dtype=float)
    p = model.train_X1.shape[1]
    q = model.train_X2.shape[1]
    if X1_test.size == 0 and X2_test.size == 0:
        empty = np.zeros(0)
        return PredictiveDistribution(empty, empty, empty)
    X1_test = X1_test.reshape(-1, p) if p else np.zeros((X2_test.reshape(-1, q).shape[0], 0))
    X2_test = X2_test.reshape(-1, q)
    if X1_test.shape[0] != X2_test.shape[0]:
        raise InvalidInputError("X1_test and X2_test have different row counts")
    Z2 = model.scale_gp_inputs(X2_test)
    K_star = build_cross_cov(Z2, model.train_X2, model.kernel)
    kss = prior_diag(Z2, model.kernel)
    K = build_cov_matrix(model.train_X2, model.kernel)
    f_bar, v = predict_latent(model.laplace, K, K_star, kss)
    lin = X1_test @ model.beta if p else np.zeros(len(f_bar))
    if model.offset_intercept:
        lin = lin + model.intercept
    pi = np.atleast_1d(predict_probability(f_bar, v, lin, model.link))
    return PredictiveDistribution(f_bar, v, pi)


def predict_dataset(model: HibitsModel, data: BinarySeriesDataset) -> PredictiveDistribution:
    if data.x1_names != model.x1_names or data.x2_names != model.x2_names:
        raise InvalidInputError("test data columns do not match the fitted model")
    if len(data) == 0:
        empty = np.zeros(0)
        return PredictiveDistribution(empty, empty, empty)
    return predict(model, data.fixed_design, data.gp_inputs)


def classify(dist, threshold: float = 0.5) -> np.ndarray:
    """``1{pi >= threshold}``; ties go to class 1."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1), got {threshold}")
    pi = dist.pi_bar if isinstance(dist, PredictiveDistribution) else np.asarray(dist)
    return (pi >= threshold).astype(np.int64)


def one_step_forecast(model: HibitsModel, history: BinarySeriesDataset, next_exogenous, next_x2=None) -> float:
    """Probability that the next observation is 1.

    ``next_exogenous`` gives the raw values of the non-lag fixed-effect
    columns (a mapping by name or a sequence in column order). The lag column
    is filled from the last observed response. The GP input defaults to the
    next time index, which requires the model's only GP input to be ``t``.
    """
    if LAG_NAME not in model.x1_names:
        raise InvalidInputError(f"model has no {LAG_NAME!r} column; one-step forecasts need the lagged response")
    if len(history) == 0:
        raise InvalidInputError("history is empty")
    exo_names = [n for n in model.x1_names if n != LAG_NAME]
    if isinstance(next_exogenous, dict):
        missing = set(exo_names) - set(next_exogenous)
        if missing:
            raise InvalidInputError(f"next_exogenous lacks columns {sorted(missing)}")
        exo = [float(next_exogenous[n]) for n in exo_names]
    else:
        exo = [float(v) for v in np.atleast_1d(next_exogenous)]
        if len(exo) != len(exo_names):
            raise InvalidInputError(f"expected {len(exo_names)} exogenous values, got {len(exo)}")
    values = dict(zip(exo_names, exo))
    values[LAG_NAME] = float(history.y[-1])
    raw = [values[n] for n in model.x1_names]
    x1 = transform_columns(model.x1_names, raw)
    if next_x2 is None:
        if model.x2_names != ("t",):
            raise InvalidInputError("GP inputs are not the time index; pass next_x2")
        x2 = np.array([[history.t[-1] + 1.0]])
    else:
        x2 = transform_columns(model.x2_names, np.atleast_1d(next_x2))
    return float(predict(model, x1, x2).pi_bar[0])
