"""Selection of the signal variance by maximizing the Laplace marginal likelihood.

Only ``lam`` is free; ``rho`` and ``sigma2`` stay at their configured values.
The search is Brent's bounded minimizer (golden-section steps mixed with
successive parabolic interpolation), run on the negated objective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, JitterExhaustedError, OptimizationFailedError
from .kernels import KernelParams, build_cov_matrix, dK_dlambda
from .laplace import find_mode, log_marginal_grad
from .links import LinkKind

GOLDEN = 0.5 * (3.0 - math.sqrt(5.0))
MAX_EVALS = 200
DEFAULT_BOUNDS = (0.0, 10.0)


@dataclass
class LambdaSearch:
    lambda_hat: float
    log_marginal: float
    trace: list = field(default_factory=list)

    @property
    def n_evals(self) -> int:
        return len(self.trace)


def brent_maximize(fun, a: float, b: float, tol: float | None = None, max_evals: int = MAX_EVALS):
    """Maximize a scalar function on ``[a, b]``.

    Terminates once the bracket is narrower than ``tol`` (default
    ``1e-4 * (b - a)``). Non-finite values count as ``-inf``, which pushes the
    bracket away from the offending probe. The endpoints and midpoint are
    probed too, and the best probe overall is returned, so a boundary maximum
    is reported exactly at the boundary.

    Returns ``(x_best, f_best, trace)`` where ``trace`` lists every
    ``(x, f(x))`` in evaluation order.
    """
    if not (math.isfinite(a) and math.isfinite(b) and a < b):
        raise ValueError(f"need finite bounds with a < b, got [{a}, {b}]")
    if tol is None:
        tol = 1e-4 * (b - a)
    trace = []

    def neg(x):
        if len(trace) >= max_evals:
            raise _BudgetSpent
        try:
            val = float(fun(x))
        except (ConvergenceError, JitterExhaustedError, FloatingPointError, np.linalg.LinAlgError):
            val = float("nan")
        trace.append((float(x), val))
        return -val if math.isfinite(val) else math.inf

    lo, hi = a, b
    eps = np.finfo(float).eps
    x = w = v = lo + GOLDEN * (hi - lo)
    d = e = 0.0
    try:
        fx = fw = fv = neg(x)
        while True:
            xm = 0.5 * (lo + hi)
            tol1 = eps * abs(x) + 0.25 * tol
            tol2 = 2.0 * tol1
            if abs(x - xm) <= tol2 - 0.5 * (hi - lo):
                break
            parabolic = False
            if abs(e) > tol1 and math.isfinite(fx) and math.isfinite(fw) and math.isfinite(fv):
                r = (x - w) * (fx - fv)
                q = (x - v) * (fx - fw)
                p = (x - v) * q - (x - w) * r
                q = 2.0 * (q - r)
                if q > 0.0:
                    p = -p
                q = abs(q)
                e_prev, e = e, d
                if abs(p) < abs(0.5 * q * e_prev) and q * (lo - x) < p < q * (hi - x):
                    d = p / q
                    u = x + d
                    if u - lo < tol2 or hi - u < tol2:
                        d = tol1 if x < xm else -tol1
                    parabolic = True
            if not parabolic:
                e = (hi - x) if x < xm else (lo - x)
                d = GOLDEN * e
            u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
            fu = neg(u)
            if fu <= fx:
                if u < x:
                    hi = x
                else:
                    lo = x
                v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
            else:
                if u < x:
                    lo = u
                else:
                    hi = u
                if fu <= fw or w == x:
                    v, fv, w, fw = w, fw, u, fu
                elif fu <= fv or v == x or v == w:
                    v, fv = u, fu
        for extra in (a, 0.5 * (a + b), b):
            neg(extra)
    except _BudgetSpent:
        pass

    finite = [(xx, ff) for xx, ff in trace if math.isfinite(ff)]
    if not finite:
        raise OptimizationFailedError("objective was non-finite at every probe")
    x_best, f_best = max(finite, key=lambda t: t[1])
    return x_best, f_best, trace


class _BudgetSpent(Exception):
    pass


def lambda_objective(X2, y, kernel_template: KernelParams, link, offset):
    """``lam -> log marginal likelihood`` at the Laplace mode."""
    link = LinkKind.parse(link)

    def objective(lam):
        K = build_cov_matrix(X2, kernel_template.with_lambda(lam))
        return find_mode(K, y, offset, link).log_marginal

    return objective


def optimize_lambda(
    X2,
    y,
    kernel_template: KernelParams,
    link=LinkKind.LOGIT,
    offset=None,
    bounds=DEFAULT_BOUNDS,
    tol: float | None = None,
    objective=None,
) -> LambdaSearch:
    """Pick ``lam`` in ``bounds`` maximizing the approximate log marginal likelihood.

    ``objective`` replaces the marginal likelihood when given (any callable of
    ``lam``), which is how the optimizer itself is tested.
    """
    a, b = map(float, bounds)
    if a < 0:
        raise ValueError("lambda bounds must be non-negative")
    if objective is None:
        objective = lambda_objective(X2, y, kernel_template, link, offset)
    lam, val, trace = brent_maximize(objective, a, b, tol)
    return LambdaSearch(lam, val, trace)


def grad_check_lambda(X2, y, kernel: KernelParams, link, offset, lambda0: float, rel_step: float = 1e-5) -> dict:
    """Compare the analytic d(log marginal)/d(lam) with a central difference at ``lambda0``."""
    link = LinkKind.parse(link)
    p0 = kernel.with_lambda(lambda0)
    K = build_cov_matrix(X2, p0)
    state = find_mode(K, y, offset, link)
    analytic = float(log_marginal_grad(state, K, dK_dlambda(X2, p0))[0])

    h = rel_step * max(abs(lambda0), 1.0)
    obj = lambda_objective(X2, y, kernel, link, offset)
    numeric = (obj(lambda0 + h) - obj(lambda0 - h)) / (2.0 * h)
    scale = max(abs(numeric), abs(analytic))
    rel = abs(analytic - numeric) / scale if scale > 0 else 0.0
    return {"lambda": float(lambda0), "analytic": analytic, "numeric": float(numeric), "rel_error": rel}
