"""Bootstrap point and interval estimates for the fixed-effect slopes.

Each iteration draws a latent path from the fitted GP, refits the slopes on
the observed responses with that path as a known offset (no intercept), and
keeps the estimate. The responses are not regenerated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import HibitsError, InvalidInputError
from .glm import fit_glm
from .kernels import build_cov_matrix

log = logging.getLogger(__name__)

DEFAULT_ITERS = 1000
MAX_FAIL_FRACTION = 0.10


@dataclass(eq=False)
class BootstrapSummary:
    beta_star: np.ndarray
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    draws: np.ndarray
    n_failed: int
    unreliable: bool = False

    @property
    def width(self) -> np.ndarray:
        return self.ci_upper - self.ci_lower


def percentile(draws, q: float) -> float:
    """Linear-interpolation quantile (Hyndman-Fan type 7, numpy's default)."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise InvalidInputError("no draws")
    if not 0.0 <= q <= 1.0:
        raise InvalidInputError(f"q must lie in [0, 1], got {q}")
    return float(np.quantile(draws, q, method="linear"))


def summarize(draws, level: float = 0.95, n_failed: int = 0, max_iter: int | None = None) -> BootstrapSummary:
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] == 0:
        raise InvalidInputError("draws must be a non-empty iterations x coefficients matrix")
    # fsum keeps the mean independent of iteration order
    mean = np.array([math.fsum(col) / draws.shape[0] for col in draws.T])
    lo_q = 0.5 * (1.0 - level)
    lower = np.array([percentile(col, lo_q) for col in draws.T])
    upper = np.array([percentile(col, 1.0 - lo_q) for col in draws.T])
    total = max_iter if max_iter is not None else draws.shape[0] + n_failed
    return BootstrapSummary(mean, lower, upper, draws, n_failed, n_failed > MAX_FAIL_FRACTION * total)


def bootstrap_beta(model, max_iter: int = DEFAULT_ITERS, seed=None, level: float = 0.95) -> BootstrapSummary:
    """Resample the latent process ``max_iter`` times and summarize the refitted slopes.

    Iteration ``i`` uses its own generator spawned from ``seed``, so results
    do not depend on execution order. Refits that fail or do not converge are
    counted in ``n_failed``; above 10% the summary is flagged ``unreliable``.
    """
    if max_iter < 1:
        raise InvalidInputError("max_iter must be positive")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    K = build_cov_matrix(model.train_X2, model.kernel)
    L = K.chol
    X1 = model.train_X1
    y = model.laplace.y
    start = model.beta.copy()

    draws = []
    failed = 0
    for child in ss.spawn(max_iter):
        z = np.random.default_rng(child).standard_normal(K.n)
        offset = L @ z
        try:
            fit = fit_glm(X1, y, model.link, offset=offset, with_intercept=False, beta0=start)
        except HibitsError as exc:
            log.debug("bootstrap refit failed: %s", exc)
            failed += 1
            continue
        if not fit.converged:
            failed += 1
            continue
        draws.append(fit.beta)
    if not draws:
        raise HibitsError("every bootstrap refit failed")
    summary = summarize(np.array(draws), level, failed, max_iter)
    if summary.unreliable:
        log.warning("%d of %d bootstrap refits failed; intervals flagged unreliable", failed, max_iter)
    return summary
