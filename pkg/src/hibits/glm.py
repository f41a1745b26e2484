"""Binary-response GLM by Newton-Raphson, with an optional known offset.

This is Stage 1 of the hybrid fit (the latent process is treated as a constant
intercept), the refit inside the bootstrap, and the logistic baseline.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.stats import norm

from .errors import InvalidInputError, RankDeficientError
from .links import LinkKind, inverse_link, loglik_terms

log = logging.getLogger(__name__)

SCORE_TOL = 1e-8
STEP_TOL = 1e-10
MAX_ITER = 100
MAX_HALVINGS = 30


@dataclass
class FixedEffectFit:
    beta: np.ndarray
    cov_beta: np.ndarray
    loglik: float
    aic: float
    bic: float
    iterations: int
    converged: bool
    n_obs: int
    has_intercept: bool
    link: LinkKind = LinkKind.LOGIT
    separated: bool = False
    max_abs_score: float = float("nan")
    trace: list = field(default_factory=list, repr=False)

    @property
    def intercept(self) -> float:
        return float(self.beta[0]) if self.has_intercept else 0.0

    @property
    def slopes(self) -> np.ndarray:
        """Coefficients on the covariate columns, without the intercept."""
        return self.beta[1:] if self.has_intercept else self.beta

    @property
    def std_err(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov_beta), 0.0, None))

    def linear_predictor(self, X1, offset=None, include_intercept=True) -> np.ndarray:
        X1 = np.asarray(X1, dtype=float)
        if X1.ndim == 1:
            X1 = X1[:, None]
        eta = X1 @ self.slopes if X1.shape[1] else np.zeros(X1.shape[0])
        if include_intercept:
            eta = eta + self.intercept
        if offset is not None:
            eta = eta + offset
        return eta

    def predict_proba(self, X1, offset=None) -> np.ndarray:
        return np.atleast_1d(inverse_link(self.link, self.linear_predictor(X1, offset)))


def _design(X1, n, with_intercept):
    if X1 is None:
        X1 = np.zeros((n, 0))
    X1 = np.asarray(X1, dtype=float)
    if X1.ndim == 1:
        X1 = X1[:, None]
    if with_intercept:
        X1 = np.column_stack([np.ones(X1.shape[0]), X1])
    return X1


def fit_glm(X1, y, kind=LinkKind.LOGIT, offset=None, with_intercept=True, beta0=None) -> FixedEffectFit:
    """Maximum-likelihood fit of ``P(y=1) = t(intercept + X1 @ beta + offset)``.

    Newton-Raphson from zero (or ``beta0``) with up to 30 step halvings per
    iteration. Stops when ``max|score| < 1e-8`` or the largest coefficient
    change drops below ``1e-10``, then takes one final full Newton step. After 100 iterations the fit is returned with
    ``converged=False``; complete separation is also reported that way, with
    ``separated=True``.

    Raises :class:`RankDeficientError` when the information matrix is singular.
    """
    kind = LinkKind.parse(kind)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    X = _design(X1, n, with_intercept)
    if X.shape[0] != n:
        raise InvalidInputError(f"design has {X.shape[0]} rows but y has {n}")
    p = X.shape[1]
    if n <= p:
        raise InvalidInputError(f"need more observations than parameters (n={n}, p={p})")
    if not np.all((y == 0) | (y == 1)):
        raise InvalidInputError("y must be binary")
    off = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)

    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    ll, d1, d2, _ = loglik_terms(kind, y, X @ beta + off)
    total = ll.sum()
    converged = False
    trace = []
    it = 0
    for it in range(1, MAX_ITER + 1):
        score = X.T @ d1
        info = (X * -d2[:, None]).T @ X
        try:
            cf = cho_factor(info, lower=True, check_finite=False)
        except LinAlgError:
            raise RankDeficientError("information matrix is singular; design columns are collinear") from None
        step = cho_solve(cf, score, check_finite=False)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = beta + t * step
            ll_c, d1_c, d2_c, _ = loglik_terms(kind, y, X @ cand + off)
            if ll_c.sum() >= total - 1e-12 * abs(total):
                break
            t *= 0.5
        change = np.max(np.abs(cand - beta)) if p else 0.0
        beta, total, d1, d2 = cand, ll_c.sum(), d1_c, d2_c
        max_score = float(np.max(np.abs(X.T @ d1))) if p else 0.0
        trace.append((it, total, max_score, t))
        if max_score < SCORE_TOL or change < STEP_TOL:
            converged = True
            break

    if converged and p:
        # one more full Newton step: from inside the tolerance it is quadratically
        # convergent, taking the estimate to rounding level at negligible cost
        info = (X * -d2[:, None]).T @ X
        try:
            cand = beta + cho_solve(cho_factor(info, lower=True, check_finite=False), X.T @ d1, check_finite=False)
            ll_c, d1_c, d2_c, _ = loglik_terms(kind, y, X @ cand + off)
            if ll_c.sum() >= total - 1e-12 * abs(total):
                beta, total, d1, d2 = cand, ll_c.sum(), d1_c, d2_c
        except LinAlgError:
            pass

    info = (X * -d2[:, None]).T @ X
    try:
        cf = cho_factor(info, lower=True, check_finite=False)
        cov = cho_solve(cf, np.eye(p), check_finite=False)
        cov = 0.5 * (cov + cov.T)
    except LinAlgError:
        # happens under separation, where W underflows to zero
        cov = np.full((p, p), np.inf)

    fitted = X @ beta + off
    separated = bool(np.all(np.where(y == 1, fitted > 0, fitted < 0)) and total > -1e-6)
    if separated:
        converged = False
    if not converged:
        log.debug("GLM did not converge after %d iterations (separated=%s)", it, separated)

    return FixedEffectFit(
        beta=beta,
        cov_beta=cov,
        loglik=float(total),
        aic=2.0 * p - 2.0 * total,
        bic=p * np.log(n) - 2.0 * total,
        iterations=it,
        converged=converged,
        n_obs=n,
        has_intercept=with_intercept,
        link=kind,
        separated=separated,
        max_abs_score=float(np.max(np.abs(X.T @ d1))) if p else 0.0,
        trace=trace,
    )


def wald_ci(fit: FixedEffectFit, level: float = 0.95) -> np.ndarray:
    """``beta_j -/+ z * se_j`` as a ``(p, 2)`` array."""
    if not 0.0 <= level < 1.0:
        raise InvalidInputError(f"level must lie in [0, 1), got {level}")
    z = norm.ppf(0.5 + 0.5 * level)
    half = z * fit.std_err
    return np.column_stack([fit.beta - half, fit.beta + half])


def select_by_ic(candidates, X1, y, kind=LinkKind.LOGIT, criterion="AIC", with_intercept=True):
    """Fit each candidate column subset and return ``(subset, fit)`` minimizing the criterion.

    Ties go to the candidate with fewer parameters, then to the first listed.
    Candidates whose fit raises are skipped with a warning.
    """
    criterion = criterion.upper()
    if criterion not in ("AIC", "BIC"):
        raise InvalidInputError(f"criterion must be AIC or BIC, got {criterion!r}")
    X1 = np.asarray(X1, dtype=float)
    if X1.ndim == 1:
        X1 = X1[:, None]
    best = None
    for order, cols in enumerate(candidates):
        cols = list(cols)
        try:
            fit = fit_glm(X1[:, cols], y, kind, with_intercept=with_intercept)
        except (RankDeficientError, InvalidInputError) as exc:
            warnings.warn(f"candidate {cols} skipped: {exc}", stacklevel=2)
            continue
        key = (fit.aic if criterion == "AIC" else fit.bic, len(fit.beta), order)
        if best is None or key < best[0]:
            best = (key, cols, fit)
    if best is None:
        raise InvalidInputError("no candidate subset could be fitted")
    return best[1], best[2]
