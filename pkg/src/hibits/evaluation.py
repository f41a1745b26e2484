"""Method comparison: error rates and paired simultaneous Bonferroni intervals.

Error rates ``E[i, j]`` of method ``i`` on dataset ``j`` follow
``E = mu_i + z_j + eps``. Every contrast ``mu_ref - mu_i`` is estimated from
the paired differences, in which the dataset effect ``z_j`` cancels, so no
mixed-model fit is needed. Sign convention: reference (proposed) minus
competitor, so a negative interval means the reference method wins.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import t as student_t

from .data import split_data
from .errors import HibitsError, InvalidInputError
from .glm import fit_glm, wald_ci
from .kernels import KernelParams
from .model import classify, fit_hibits, predict_dataset
from .simulate import ScenarioConfig, generate

log = logging.getLogger(__name__)

WORKERS_ENV = "HIBITS_WORKERS"


def as_seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def error_rate(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise InvalidInputError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise InvalidInputError("no observations")
    return float(np.mean(y_true != y_pred))


@dataclass
class PairedInterval:
    method: int
    mean_diff: float
    lower: float
    upper: float
    sd: float
    n_replicates: int

    @property
    def excludes_zero(self) -> bool:
        return self.upper < 0 or self.lower > 0


def paired_bonferroni_ci(errors, baseline_col: int = 0, level: float = 0.95) -> list[PairedInterval]:
    """Simultaneous intervals for ``mu[baseline_col] - mu[i]``, one per other method.

    ``errors`` is replicates x methods. ``baseline_col`` is the reference
    method every other column is compared with. Each interval is
    ``mean(d) -/+ t_{m-1, 1 - alpha / (2 (k-1))} sd(d) / sqrt(m)``.
    """
    E = np.asarray(errors, dtype=float)
    if E.ndim != 2:
        raise InvalidInputError("errors must be a replicates x methods matrix")
    m, k = E.shape
    if k < 2:
        raise InvalidInputError("need at least two methods")
    if m < 10:
        raise InvalidInputError("need at least 10 replicates")
    alpha = 1.0 - level
    q = student_t.ppf(1.0 - alpha / (2.0 * (k - 1)), df=m - 1)
    out = []
    for i in range(k):
        if i == baseline_col:
            continue
        d = E[:, baseline_col] - E[:, i]
        mean = float(np.mean(d))
        sd = float(np.std(d, ddof=1))
        half = q * sd / np.sqrt(m)
        out.append(PairedInterval(i, mean, mean - half, mean + half, sd, m))
    return out


def run_replicate(
    config: ScenarioConfig,
    train_n: int = 400,
    test_n: int = 100,
    split: str = "sequential",
    fit_kernel: KernelParams | None = None,
    fit_link="logit",
    select_lambda: bool = True,
    lambda_bounds=(0.0, 10.0),
    threshold: float = 0.5,
    bootstrap_iters: int = 0,
    offset_intercept: bool = False,
    seed=None,
) -> dict:
    """Simulate one dataset and score the hybrid model against the logistic baseline.

    The series is simulated with ``train_n + test_n + 1`` points so that,
    after the first row is lost to the lag, exactly ``train_n + test_n``
    remain. Returns error rates, coefficient estimates, baseline Wald
    intervals and (with ``bootstrap_iters``) bootstrap intervals.
    """
    from .bootstrap import bootstrap_beta

    ss = as_seed_sequence(seed if seed is not None else config.seed)
    sim_ss, split_ss, boot_ss = ss.spawn(3)
    cfg = ScenarioConfig(
        scenario=config.scenario,
        beta=config.beta,
        kernel=config.kernel,
        n=train_n + test_n + 1,
        y_init=config.y_init,
    )
    data, _ = generate(cfg, np.random.default_rng(sim_ss))
    data = data.with_lag()
    train, test = split_data(data, train_n, test_n, mode=split, seed=np.random.default_rng(split_ss))

    fit_kernel = fit_kernel or KernelParams(lam=1.0, rho=1.0, sigma2=0.01)
    model = fit_hibits(train, fit_kernel, fit_link, select_lambda, lambda_bounds, gp_input="raw", offset_intercept=offset_intercept)
    dist = predict_dataset(model, test)
    err_h = error_rate(test.y, classify(dist, threshold))

    base = fit_glm(train.fixed_design, train.y, fit_link, with_intercept=True)
    err_b = error_rate(test.y, (base.predict_proba(test.fixed_design) >= threshold).astype(int))

    out = {
        "err_hibits": err_h,
        "err_logistic": err_b,
        "lambda_hat": model.lambda_hat,
        "beta_hat": model.beta.tolist(),
        "baseline_beta": base.slopes.tolist(),
        "baseline_ci": wald_ci(base)[1:].tolist(),
        "baseline_converged": base.converged,
    }
    if bootstrap_iters:
        summary = bootstrap_beta(model, bootstrap_iters, seed=boot_ss)
        out["boot_beta"] = summary.beta_star.tolist()
        out["boot_ci"] = np.column_stack([summary.ci_lower, summary.ci_upper]).tolist()
        out["boot_failed"] = summary.n_failed
    return out


def _safe_replicate(args):
    kwargs, seed = args
    try:
        return run_replicate(seed=seed, **kwargs)
    except HibitsError as exc:
        log.warning("replicate with seed %s failed: %s", seed, exc)
        return None


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_replicates(config: ScenarioConfig, n_replicates: int, seed: int = 0, workers: int | None = None, **kwargs):
    """Run independent replicates with seeds spawned from ``seed``.

    Results are in replicate order regardless of ``workers``; failed
    replicates come back as ``None``.
    """
    seeds = np.random.SeedSequence(seed).spawn(n_replicates)
    jobs = [({"config": config, **kwargs}, s) for s in seeds]
    workers = workers or worker_count()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_safe_replicate, jobs))
    return [_safe_replicate(j) for j in jobs]


def error_matrix(results) -> np.ndarray:
    """Replicates x 2 matrix of (hybrid, logistic) error rates, failures dropped."""
    rows = [(r["err_hibits"], r["err_logistic"]) for r in results if r is not None]
    return np.array(rows, dtype=float).reshape(-1, 2)
