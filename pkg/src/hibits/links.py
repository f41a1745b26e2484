"""Logit and probit links with the likelihood derivatives needed by Laplace.

Everything is vectorized over ``y`` and ``f``. Log-likelihoods are computed
in the log domain (``logaddexp`` / ``log_ndtr``), so they stay finite for any
finite ``f``. Only :func:`inverse_link` clamps, to ``[1e-12, 1 - 1e-12]``.
"""

from __future__ import annotations

import enum

import numpy as np
from scipy.special import expit, log_ndtr, ndtr

from .errors import InvalidInputError

PROB_CLAMP = 1e-12
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)


class LinkKind(str, enum.Enum):
    LOGIT = "logit"
    PROBIT = "probit"

    @classmethod
    def parse(cls, value) -> "LinkKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(f"unknown link {value!r}; expected 'logit' or 'probit'") from None


def _check_finite(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("linear predictor contains non-finite values")
    return x


def raw_inverse_link(kind, eta):
    """Unclamped inverse link; used where exactness matters (quadrature nodes)."""
    kind = LinkKind.parse(kind)
    return expit(eta) if kind is LinkKind.LOGIT else ndtr(eta)


def inverse_link(kind, eta):
    eta = _check_finite(eta)
    p = np.clip(raw_inverse_link(kind, eta), PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(p) if p.ndim == 0 else p


def mills_ratio(u):
    """phi(u) / Phi(u), evaluated in the log domain so the lower tail stays accurate."""
    u = np.asarray(u, dtype=float)
    return np.exp(-0.5 * u * u - _LOG_SQRT_2PI - log_ndtr(u))


def loglik(kind, y, f):
    kind = LinkKind.parse(kind)
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    u = s * np.asarray(f, dtype=float)
    if kind is LinkKind.LOGIT:
        return -np.logaddexp(0.0, -u)
    return log_ndtr(u)


def loglik_terms(kind, y, f):
    """Return ``(log p(y|f), d1, d2, d3)`` with derivatives taken in ``f``."""
    kind = LinkKind.parse(kind)
    f = _check_finite(f)
    y = np.asarray(y, dtype=float)
    if kind is LinkKind.LOGIT:
        p = expit(f)
        ll = -np.logaddexp(0.0, -(2.0 * y - 1.0) * f)
        w = p * (1.0 - p)
        return ll, y - p, -w, -w * (1.0 - 2.0 * p)

    # probit: with s = 2y - 1 and u = s f, log p = log Phi(u); r = phi(u)/Phi(u)
    s = 2.0 * y - 1.0
    u = s * f
    r = mills_ratio(u)
    g2 = -r * (u + r)
    g3 = r * (u + r) * (u + 2.0 * r) - r
    return log_ndtr(u), s * r, g2, s * g3
