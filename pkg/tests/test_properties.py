"""Property suite: invariants checked over many generated cases with fixed seeds."""

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize
from scipy.stats import norm

from hibits.cli import main
from hibits.glm import fit_glm
from hibits.kernels import KernelParams, build_cov_matrix
from hibits.laplace import find_mode, predict_probability
from hibits.links import inverse_link, loglik, loglik_terms
from hibits.model import fit_arrays, predict
from hibits.select import brent_maximize, grad_check_lambda

FIXED = settings(derandomize=True, deadline=None, database=None)

kernels = st.builds(
    KernelParams,
    lam=st.floats(0.0, 20.0),
    rho=st.floats(0.0, 5.0),
    sigma2=st.floats(0.0, 1.0),
    eta=st.floats(0.0, 1.0),
    tau=st.floats(0.0, 5.0),
)


@settings(FIXED, max_examples=100)
@given(p=kernels, seed=st.integers(0, 2**32 - 1), n=st.integers(1, 25), d=st.integers(1, 3))
def test_kernel_symmetric_psd(p, seed, n, d):
    X = np.random.default_rng(seed).uniform(-3, 3, (n, d))
    K = build_cov_matrix(X, p).entries
    np.testing.assert_array_equal(K, K.T)
    scale = max(1.0, float(np.max(np.abs(K))))
    assert np.linalg.eigvalsh(K).min() >= -1e-9 * scale


# high-precision oracle: mpmath differentiates the log-likelihood at 30 digits
mpmath.mp.dps = 30


def _mp_loglik(kind, y):
    s = 2 * y - 1
    if kind == "logit":
        return lambda f: -mpmath.log1p(mpmath.exp(-s * f))
    return lambda f: mpmath.log(mpmath.ncdf(s * f))


@pytest.mark.parametrize("kind", ["logit", "probit"])
@pytest.mark.parametrize("y", [0, 1])
def test_link_derivatives_against_high_precision_differences(kind, y):
    g = _mp_loglik(kind, y)
    for f in np.linspace(-6.0, 6.0, 49):
        _, d1, d2, d3 = (float(np.asarray(a)) for a in loglik_terms(kind, np.array(y, float), np.array(f)))
        for order, analytic in ((1, d1), (2, d2), (3, d3)):
            ref = float(mpmath.diff(g, mpmath.mpf(float(f)), order))
            if abs(ref) < 1e-30:  # exact zero up to mpmath's differencing noise
                assert abs(analytic) < 1e-14
            else:
                assert abs(analytic - ref) / abs(ref) < 1e-4, (kind, y, f, order)


def _brute_force_mode(K, y, off, kind):
    n = len(y)
    Kinv = np.linalg.inv(K)

    def psi(F):
        F = np.atleast_2d(F)
        return loglik(kind, y, F + off).sum(axis=1) - 0.5 * np.einsum("ij,jk,ik->i", F, Kinv, F)

    grid = np.linspace(-6, 6, {1: 2401, 2: 241, 3: 61}[n])
    mesh = np.stack(np.meshgrid(*([grid] * n), indexing="ij"), -1).reshape(-1, n)
    start = mesh[np.argmax(psi(mesh))]
    res = minimize(lambda F: -psi(F)[0], start, method="Nelder-Mead", options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 20000})
    return res.x


@settings(FIXED, max_examples=30)
@given(
    n=st.integers(1, 3),
    seed=st.integers(0, 2**32 - 1),
    kind=st.sampled_from(["logit", "probit"]),
    lam=st.floats(0.1, 4.0),
    rho=st.floats(0.1, 3.0),
)
def test_laplace_mode_matches_grid_search(n, seed, kind, lam, rho):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 3, n)
    K = build_cov_matrix(X, KernelParams(lam=lam, rho=rho, sigma2=0.05)).entries
    y = rng.integers(0, 2, n).astype(float)
    off = rng.uniform(-1, 1, n)
    st_ = find_mode(K, y, off, kind)
    np.testing.assert_allclose(st_.f_hat, _brute_force_mode(K, y, off, kind), atol=1e-4)


def test_marginal_likelihood_gradient_on_random_problems():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = 5
        X = rng.uniform(0, 4, n)
        kind = rng.choice(["logit", "probit"])
        kp = KernelParams(lam=rng.uniform(0.2, 5), rho=rng.uniform(0.1, 2), sigma2=rng.uniform(0.001, 0.2), eta=rng.uniform(0.3, 1), tau=1.0)
        y = rng.integers(0, 2, n).astype(float)
        off = rng.normal(0, 1, n)
        out = grad_check_lambda(X, y, kp, kind, off, kp.lam)
        assert out["rel_error"] < 1e-4, out


@settings(FIXED, max_examples=200)
@given(mu=st.floats(-8, 8), v=st.floats(0, 50), c=st.floats(-3, 3))
def test_probit_quadrature_matches_closed_form(mu, v, c):
    gh = predict_probability(mu, v, c, "probit", method="quadrature")
    exact = float(norm.cdf((mu + c) / np.sqrt(1 + v)))
    assert abs(gh - exact) < 1e-8
    assert predict_probability(mu, v, c, "probit") == pytest.approx(exact, abs=1e-15)


@settings(FIXED, max_examples=60)
@given(mu=st.floats(-6, 6), v=st.floats(0.01, 25))
def test_logit_quadrature_matches_adaptive_integration(mu, v):
    sd = np.sqrt(v)
    ref = quad(lambda z: inverse_link("logit", z) * norm.pdf(z, mu, sd), mu - 10 * sd, mu + 10 * sd, epsabs=1e-12, limit=200)[0]
    assert abs(predict_probability(mu, v, 0.0, "logit") - ref) < 1e-6


@settings(FIXED, max_examples=60)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=300).filter(lambda y: 0 < sum(y) < len(y)))
def test_intercept_only_glm_is_logit_of_mean(y):
    y = np.array(y, float)
    fit = fit_glm(None, y, "logit")
    m = y.mean()
    assert abs(fit.beta[0] - np.log(m / (1 - m))) < 1e-10
    assert abs(fit.predict_proba(np.zeros((1, 0)))[0] - m) < 1e-10


@settings(FIXED, max_examples=20)
@given(seed=st.integers(0, 2**32 - 1), kind=st.sampled_from(["logit", "probit"]), with_int=st.booleans())
def test_degenerate_gp_reduces_to_glm(seed, kind, with_int):
    rng = np.random.default_rng(seed)
    n = 80
    X1 = rng.standard_normal((n, 2))
    y = (rng.random(n) < 1 / (1 + np.exp(-X1[:, 0] + 0.5))).astype(float)
    m = fit_arrays(X1, np.arange(n, dtype=float), y, KernelParams(lam=0.0, sigma2=0.0), kind, select_lambda=False, offset_intercept=with_int)
    Xs = rng.standard_normal((10, 2))
    got = predict(m, Xs, np.arange(n, n + 10, dtype=float)).pi_bar
    glm = fit_glm(X1, y, kind)
    want = inverse_link(kind, glm.linear_predictor(Xs, include_intercept=with_int))
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_optimizer_quadratic():
    tol = 1e-4 * 5
    x, _, _ = brent_maximize(lambda l: -((l - 2.0) ** 2), 0.0, 5.0, tol=tol)
    assert abs(x - 2.0) <= tol


def test_seeded_cli_runs_are_byte_identical(tmp_path):
    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        assert main(["simulate", "--scenario", "S3", "--n", "150", "--seed", "9", "--out", str(d / "sim.csv")]) == 0
        assert main(["fit", "--data", str(d / "sim.csv"), "--train", "120", "--link", "probit", "--out", str(d / "m.json")]) == 0
        assert main(["bootstrap", "--model", str(d / "m.json"), "--iters", "100", "--seed", "4", "--out", str(d / "b.csv")]) == 0
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a, b = run("a"), run("b")
    assert a.keys() == b.keys() and len(a) >= 5
    assert a == b
