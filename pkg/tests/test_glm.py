import warnings

import numpy as np
import pytest

from hibits.errors import InvalidInputError, RankDeficientError
from hibits.glm import fit_glm, select_by_ic, wald_ci

Z975 = 1.959963984540054


def _logistic_data(n=400, beta=(-0.3, 1.2), seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    p = 1 / (1 + np.exp(-(beta[0] + beta[1] * x)))
    return x[:, None], (rng.random(n) < p).astype(float)


def test_intercept_only_is_logit_of_mean():
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], dtype=float)
    fit = fit_glm(None, y, "logit")
    assert fit.beta[0] == pytest.approx(-0.8472978603872037, abs=1e-10)
    assert fit.converged


def test_intercept_only_probit():
    y = np.array([1, 1, 1, 0, 0, 0, 0, 0, 0, 0], dtype=float)
    fit = fit_glm(np.zeros((10, 0)), y, "probit")
    # norm.ppf(0.3)
    assert fit.beta[0] == pytest.approx(-0.5244005127080409, abs=1e-10)


def test_matches_statsmodels_free_oracle():
    # oracle: direct maximization of the log-likelihood with scipy.optimize
    from scipy.optimize import minimize

    X, y = _logistic_data()
    A = np.column_stack([np.ones(len(y)), X])

    def nll(b):
        eta = A @ b
        return np.sum(np.logaddexp(0, eta) - y * eta)

    ref = minimize(nll, np.zeros(2), method="BFGS", options={"gtol": 1e-10}).x
    fit = fit_glm(X, y, "logit")
    np.testing.assert_allclose(fit.beta, ref, atol=1e-5)
    assert fit.aic == pytest.approx(2 * 2 - 2 * fit.loglik)
    assert fit.bic == pytest.approx(2 * np.log(len(y)) - 2 * fit.loglik)


def test_offset_shift_moves_only_intercept():
    X, y = _logistic_data(seed=3)
    off = np.random.default_rng(4).standard_normal(len(y))
    a = fit_glm(X, y, "logit", offset=off)
    b = fit_glm(X, y, "logit", offset=off + 0.7)
    assert b.beta[0] == pytest.approx(a.beta[0] - 0.7, abs=1e-8)
    np.testing.assert_allclose(b.beta[1:], a.beta[1:], atol=1e-8)


def test_no_intercept_with_offset():
    X, y = _logistic_data(seed=5)
    fit = fit_glm(X, y, "probit", offset=np.full(len(y), 0.2), with_intercept=False)
    assert fit.beta.shape == (1,)
    assert fit.intercept == 0.0
    np.testing.assert_array_equal(fit.slopes, fit.beta)


def test_wald_interval_standard_normal():
    fit = fit_glm(None, np.array([1.0, 0.0] * 20), "logit")
    fit.beta = np.array([0.0])
    fit.cov_beta = np.array([[1.0]])
    np.testing.assert_allclose(wald_ci(fit), [[-Z975, Z975]], atol=1e-9)


def test_separation_is_reported():
    x = np.arange(-5.0, 5.0)[:, None]
    y = (x[:, 0] > 0).astype(float)
    fit = fit_glm(x, y, "logit")
    assert fit.separated
    assert not fit.converged


def test_collinear_design_raises():
    x = np.random.default_rng(0).standard_normal(50)
    with pytest.raises(RankDeficientError):
        fit_glm(np.column_stack([x, 2 * x]), (x > 0.3).astype(float) * (np.arange(50) % 3 > 0), "logit")


def test_bad_response_rejected():
    with pytest.raises(InvalidInputError):
        fit_glm(None, np.array([0.0, 2.0, 1.0]), "logit")


def test_select_by_ic_prefers_informative_column():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((300, 2))
    y = (rng.random(300) < 1 / (1 + np.exp(-2.0 * x[:, 0]))).astype(float)
    for crit in ("AIC", "BIC"):
        cols, fit = select_by_ic([[], [0]], x, y, "logit", criterion=crit)
        assert list(cols) == [0]


def test_select_by_ic_single_and_ties():
    X, y = _logistic_data(n=100)
    cols, _ = select_by_ic([[0]], X, y, "logit")
    assert list(cols) == [0]
    X2 = np.column_stack([X[:, 0], X[:, 0]])
    cols, _ = select_by_ic([[0], [1]], X2, y, "logit")
    assert list(cols) == [0]


def test_select_by_ic_skips_failing_candidate():
    X, y = _logistic_data(n=100)
    X2 = np.column_stack([X[:, 0], X[:, 0]])
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        cols, _ = select_by_ic([[0, 1], [0]], X2, y, "logit")
    assert list(cols) == [0]
    assert w
