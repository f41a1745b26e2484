"""Model files: a JSON document with named fields.

The file holds everything needed to predict (coefficients, kernel, training
matrices, latent mode) plus the run config and its hash. Output is
byte-deterministic: keys are sorted and floats are written with ``repr``
precision, so two fits from identical inputs give identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from . import __version__
from .config import RunConfig, config_hash
from .data import atomic_write_text
from .errors import InvalidInputError
from .glm import FixedEffectFit
from .kernels import KernelParams, build_cov_matrix
from .laplace import find_mode
from .links import LinkKind
from .model import HibitsModel
from .select import LambdaSearch

FORMAT = "hibits-model"
FORMAT_VERSION = 1


def _clean(x):
    """JSON-safe copy: arrays to lists, non-finite floats to ``None``."""
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _arr(x, shape=None):
    a = np.array(x, dtype=float)  # None becomes nan
    if shape is not None:
        a = a.reshape(shape)
    return a


def model_to_dict(model: HibitsModel, config: RunConfig | None = None) -> dict:
    s1 = model.stage1
    lap = model.laplace
    d = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "version": __version__,
        "config": config.to_dict() if config else None,
        "config_hash": config_hash(config) if config else None,
        "seed": config.seed if config else None,
        "link": model.link.value,
        "kernel": model.kernel.to_dict(),
        "intercept": model.intercept,
        "beta": model.beta,
        "lambda_hat": model.lambda_hat,
        "x1_names": list(model.x1_names),
        "x2_names": list(model.x2_names),
        "gp_input": model.gp_input,
        "x2_shift": model.x2_shift,
        "x2_scale": model.x2_scale,
        "offset_intercept": model.offset_intercept,
        "last_t": model.last_t,
        "stage1": {
            "beta": s1.beta,
            "cov_beta": s1.cov_beta,
            "loglik": s1.loglik,
            "aic": s1.aic,
            "bic": s1.bic,
            "iterations": s1.iterations,
            "converged": s1.converged,
            "n_obs": s1.n_obs,
            "has_intercept": s1.has_intercept,
            "separated": s1.separated,
        },
        "train": {"X1": model.train_X1, "X2": model.train_X2, "y": lap.y},
        "laplace": {
            "f_hat": lap.f_hat,
            "offset": lap.offset,
            "log_marginal": lap.log_marginal,
            "iterations": lap.iterations,
        },
        "lambda_trace": model.lambda_search.trace if model.lambda_search else None,
    }
    return _clean(d)


def dumps_model(model: HibitsModel, config: RunConfig | None = None) -> str:
    return json.dumps(model_to_dict(model, config), sort_keys=True, indent=1) + "\n"


def save_model(path, model: HibitsModel, config: RunConfig | None = None) -> None:
    atomic_write_text(path, dumps_model(model, config))


def model_from_dict(d: dict) -> tuple[HibitsModel, RunConfig | None]:
    """Rebuild a model; the Laplace state is recomputed from the stored training data."""
    if not isinstance(d, dict) or d.get("format") != FORMAT:
        raise InvalidInputError("not a model file")
    try:
        link = LinkKind.parse(d["link"])
        kernel = KernelParams(**d["kernel"])
        s = d["stage1"]
        p = len(s["beta"])
        stage1 = FixedEffectFit(
            beta=_arr(s["beta"]),
            cov_beta=_arr(s["cov_beta"], (p, p)),
            loglik=s["loglik"],
            aic=s["aic"],
            bic=s["bic"],
            iterations=s["iterations"],
            converged=s["converged"],
            n_obs=s["n_obs"],
            has_intercept=s["has_intercept"],
            link=link,
            separated=s["separated"],
        )
        n = len(d["train"]["y"])
        X1 = np.array(d["train"]["X1"], dtype=float).reshape(n, len(d["x1_names"]))
        X2 = np.array(d["train"]["X2"], dtype=float).reshape(n, len(d["x2_names"]))
        y = np.array(d["train"]["y"], dtype=float)
        offset = np.array(d["laplace"]["offset"], dtype=float)
        shift = None if d["x2_shift"] is None else np.array(d["x2_shift"], dtype=float)
        scale = None if d["x2_scale"] is None else np.array(d["x2_scale"], dtype=float)
        trace = d.get("lambda_trace")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed model file: {exc}") from None

    state = find_mode(build_cov_matrix(X2, kernel), y, offset, link)
    stored = np.array(d["laplace"]["f_hat"], dtype=float)
    if stored.shape != state.f_hat.shape or not np.allclose(stored, state.f_hat, rtol=1e-8, atol=1e-8):
        raise InvalidInputError("stored latent mode does not match the training data")
    search = None
    if trace is not None:
        trace = [(x, float("nan") if v is None else v) for x, v in trace]
        search = LambdaSearch(kernel.lam, state.log_marginal, trace)
    model = HibitsModel(
        stage1=stage1,
        kernel=kernel,
        link=link,
        laplace=state,
        train_X1=X1,
        train_X2=X2,
        x1_names=tuple(d["x1_names"]),
        x2_names=tuple(d["x2_names"]),
        gp_input=d["gp_input"],
        x2_shift=shift,
        x2_scale=scale,
        lambda_search=search,
        last_t=d["last_t"],
        offset_intercept=d["offset_intercept"],
    )
    config = RunConfig.from_dict(d["config"]) if d.get("config") else None
    return model, config


def load_model(path) -> tuple[HibitsModel, RunConfig | None]:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read model {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(d)
