import numpy as np
import pytest
from scipy.stats import t as student_t

from hibits.errors import InvalidInputError
from hibits.evaluation import error_matrix, error_rate, paired_bonferroni_ci, run_replicate, run_replicates
from hibits.simulate import scenario_config


def test_error_rate_examples():
    assert error_rate([1, 0, 1], [1, 0, 1]) == 0.0
    assert error_rate([1, 0], [0, 1]) == 1.0
    assert error_rate([1, 0, 1, 1], [1, 1, 1, 0]) == 0.5
    with pytest.raises(InvalidInputError):
        error_rate([1], [1, 0])
    with pytest.raises(InvalidInputError):
        error_rate([], [])


def test_identical_methods_give_zero_interval():
    E = np.tile(np.linspace(0.1, 0.3, 12)[:, None], (1, 2))
    (iv,) = paired_bonferroni_ci(E)
    assert (iv.lower, iv.upper) == (0.0, 0.0)


def test_constant_shift():
    base = np.linspace(0.1, 0.3, 12)
    (iv,) = paired_bonferroni_ci(np.column_stack([base, base + 0.02]))
    assert iv.lower == pytest.approx(-0.02) and iv.upper == pytest.approx(-0.02)
    assert iv.excludes_zero


def test_interval_formula():
    rng = np.random.default_rng(0)
    E = rng.random((15, 3))
    ivs = paired_bonferroni_ci(E, level=0.9)
    d = E[:, 0] - E[:, 2]
    q = student_t.ppf(1 - 0.1 / 4, 14)
    half = q * d.std(ddof=1) / np.sqrt(15)
    assert ivs[1].lower == pytest.approx(d.mean() - half)
    assert ivs[1].upper == pytest.approx(d.mean() + half)


def test_baseline_column_choice():
    rng = np.random.default_rng(1)
    E = rng.random((10, 2))
    (iv,) = paired_bonferroni_ci(E, baseline_col=1)
    assert iv.method == 0
    assert iv.mean_diff == pytest.approx(np.mean(E[:, 1] - E[:, 0]))


def test_too_few_replicates_or_methods():
    with pytest.raises(InvalidInputError):
        paired_bonferroni_ci(np.zeros((9, 2)))
    with pytest.raises(InvalidInputError):
        paired_bonferroni_ci(np.zeros((10, 1)))


def test_run_replicate_smoke_and_determinism():
    cfg = scenario_config("S2")
    a = run_replicate(cfg, train_n=80, test_n=20, seed=5)
    b = run_replicate(cfg, train_n=80, test_n=20, seed=5)
    assert a == b
    assert 0 <= a["err_hibits"] <= 1 and len(a["beta_hat"]) == 2


def test_run_replicates_order_and_matrix():
    res = run_replicates(scenario_config("S2"), 3, seed=2, train_n=60, test_n=20)
    assert len(res) == 3
    assert error_matrix(res).shape == (3, 2)
    assert error_matrix([None, res[0]]).shape == (1, 2)
