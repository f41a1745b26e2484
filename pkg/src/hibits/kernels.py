"""Covariance functions over GP inputs.

The kernel is a squared-exponential with an index nugget, optionally mixed
with a Cauchy kernel::

    k(x, x') = eta * [lam * exp(-rho * |x - x'|^2) + sigma2 * 1{same index}]
               + (1 - eta) / (1 + tau * |x - x'|^2)

``eta = 1`` (the default) gives the plain squared-exponential + nugget.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cholesky

from .errors import InvalidInputError, JitterExhaustedError

JITTER_START = 1e-10
JITTER_STOP = 1e-6


@dataclass(frozen=True)
class KernelParams:
    lam: float = 1.0
    rho: float = 1.0
    sigma2: float = 0.01
    eta: float = 1.0
    tau: float = 1.0

    def __post_init__(self):
        for name in ("lam", "rho", "sigma2", "tau"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InvalidInputError(f"kernel parameter {name} must be finite and >= 0, got {v!r}")
        if not (0.0 <= self.eta <= 1.0):
            raise InvalidInputError(f"mixture weight eta must lie in [0, 1], got {self.eta!r}")

    def with_lambda(self, lam: float) -> "KernelParams":
        return replace(self, lam=float(lam))

    def to_dict(self) -> dict:
        return asdict(self)


def _as_inputs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidInputError(f"GP inputs must be a vector or a matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("GP inputs contain non-finite values")
    return X


def sq_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, computed by explicit differences.

    The expanded ``|a|^2 + |b|^2 - 2ab`` form loses all precision for raw time
    indices in the hundreds, so it is avoided.
    """
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _stationary_part(d2: np.ndarray, p: KernelParams) -> np.ndarray:
    out = p.eta * p.lam * np.exp(-p.rho * d2)
    if p.eta < 1.0:
        out = out + (1.0 - p.eta) / (1.0 + p.tau * d2)
    return out


def kernel_value(xi, xj, p: KernelParams, same_index: bool) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xj = np.atleast_1d(np.asarray(xj, dtype=float))
    if xi.shape != xj.shape:
        raise InvalidInputError(f"input dimensions differ: {xi.shape} vs {xj.shape}")
    if not (np.all(np.isfinite(xi)) and np.all(np.isfinite(xj))):
        raise InvalidInputError("non-finite GP input")
    d2 = float(np.sum((xi - xj) ** 2))
    val = p.eta * (p.lam * math.exp(-p.rho * d2) + (p.sigma2 if same_index else 0.0))
    return val + (1.0 - p.eta) / (1.0 + p.tau * d2)


class CovMatrix:
    """Symmetric covariance matrix with a lazily computed lower Cholesky factor.

    When the plain factorization fails, a diagonal jitter starting at
    ``1e-10 * mean(diag)`` is added and escalated tenfold up to
    ``1e-6 * mean(diag)``; past that :class:`JitterExhaustedError` is raised.
    The jitter actually used is kept in ``jitter``.
    """

    def __init__(self, entries: np.ndarray):
        self.entries = np.asarray(entries, dtype=float)
        self.n = self.entries.shape[0]
        self._chol = None
        self.jitter = 0.0

    @property
    def chol(self) -> np.ndarray:
        if self._chol is None:
            self._chol, self.jitter = _jittered_cholesky(self.entries)
        return self._chol

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def _jittered_cholesky(K: np.ndarray) -> tuple[np.ndarray, float]:
    n = K.shape[0]
    if n == 0:
        return np.zeros((0, 0)), 0.0
    try:
        return cholesky(K, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    scale = float(np.mean(np.diag(K)))
    if scale <= 0:
        # all-zero covariance: the factor is zero, which still samples correctly
        if not np.any(K):
            return np.zeros_like(K), 0.0
        scale = 1.0
    rel = JITTER_START
    while rel <= JITTER_STOP * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = cholesky(K + jitter * np.eye(n), lower=True, check_finite=False)
            return L, jitter
        except LinAlgError:
            rel *= 10.0
    raise JitterExhaustedError(
        f"covariance matrix not factorizable even with jitter {JITTER_STOP:g} * mean(diag)"
    )


def build_cov_matrix(X, p: KernelParams) -> CovMatrix:
    X = _as_inputs(X)
    if X.shape[0] < 1:
        raise InvalidInputError("need at least one input point")
    K = _stationary_part(sq_dist(X, X), p)
    K = 0.5 * (K + K.T)
    K[np.diag_indices_from(K)] += p.eta * p.sigma2
    return CovMatrix(K)


def build_cross_cov(Xtest, Xtrain, p: KernelParams) -> np.ndarray:
    """Train/test covariances; no nugget, since test and train indices never coincide."""
    Xtest = _as_inputs(Xtest)
    Xtrain = _as_inputs(Xtrain)
    if Xtest.shape[1] != Xtrain.shape[1]:
        raise InvalidInputError(
            f"test inputs have {Xtest.shape[1]} columns, training inputs {Xtrain.shape[1]}"
        )
    return _stationary_part(sq_dist(Xtest, Xtrain), p)


def prior_diag(Xtest, p: KernelParams) -> np.ndarray:
    """k(x*, x*) for new points: stationary part at zero distance plus the nugget."""
    Xtest = _as_inputs(Xtest)
    return np.full(Xtest.shape[0], p.eta * (p.lam + p.sigma2) + (1.0 - p.eta))


def dK_dlambda(X, p: KernelParams) -> np.ndarray:
    X = _as_inputs(X)
    return p.eta * np.exp(-p.rho * sq_dist(X, X))


def sample_gp(X, p: KernelParams, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``L @ z`` with ``z`` iid standard normal.

    With ``size`` given, returns a ``(size, n)`` array of independent draws.
    """
    K = X if isinstance(X, CovMatrix) else build_cov_matrix(X, p)
    L = K.chol
    if size is None:
        return L @ rng.standard_normal(K.n)
    return (L @ rng.standard_normal((K.n, size))).T
