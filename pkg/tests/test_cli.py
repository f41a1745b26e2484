import json

import pytest

from hibits.cli import main
from hibits.config import RunConfig, config_hash, load_config
from hibits.data import load_csv
from hibits.errors import InvalidInputError
from hibits.kernels import KernelParams
from hibits.modelio import dumps_model, load_model


def test_config_round_trip():
    cfg = RunConfig(link="probit", kernel=KernelParams(lam=2.0, rho=0.5), train_n=10, seed=4, missing_data=True)
    back = RunConfig.from_json(cfg.to_json())
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)
    assert config_hash(cfg.replace(seed=5)) != config_hash(cfg)
    assert cfg.effective_split == "random" and not cfg.use_lag


@pytest.mark.parametrize(
    "bad",
    [{"link": "cauchit"}, {"threshold": 1.0}, {"lambda_bounds": [3, 1]}, {"nope": 1}, {"kernel": {"lam": -1}}, {"train_n": -2}],
)
def test_config_schema_errors(bad):
    with pytest.raises(InvalidInputError):
        RunConfig.from_dict(bad)


def _run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def simulated(tmp_path):
    out = tmp_path / "d.csv"
    assert _run("simulate", "--scenario", "S1", "--n", 201, "--seed", 7, "--out", out) == 0
    return tmp_path, out


def test_end_to_end(simulated, capsys):
    tmp, data = simulated
    assert (tmp / "d_latent.csv").exists()
    model = tmp / "m.json"
    assert _run("fit", "--data", data, "--train", 150, "--test", 50, "--gp-input", "raw", "--out", model) == 0
    report = (tmp / "m_report.txt").read_text()
    assert "config_hash" in report and "AIC" in report and "lambda_hat" in report
    assert _run("predict", "--model", model, "--data", data, "--out", tmp / "p.csv") == 0
    lines = (tmp / "p.csv").read_text().splitlines()
    assert lines[0].startswith("# hibits") and lines[1].startswith("# config_hash")
    assert lines[2] == "t,y,pi_bar,f_bar,v,y_hat" and len(lines) == 53
    assert _run("bootstrap", "--model", model, "--iters", 50, "--seed", 1, "--out", tmp / "b.csv") == 0
    assert "boot_lower" in (tmp / "b_summary.csv").read_text()
    assert _run("select", "--data", data, "--train", 150, "--out", tmp / "s.csv") == 0
    assert "lambda_hat" in capsys.readouterr().out


def test_simulated_csv_reloads(simulated):
    _, data = simulated
    assert len(load_csv(data)) == 201


def test_fit_is_byte_deterministic_and_reproducible_from_model(simulated):
    tmp, data = simulated
    a, b, c = tmp / "a.json", tmp / "b.json", tmp / "c.json"
    args = ["--data", data, "--train", 100, "--seed", 3]
    assert _run("fit", *args, "--out", a) == 0
    assert _run("fit", *args, "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert _run("fit", "--config", a, "--data", data, "--out", c) == 0
    assert a.read_bytes() == c.read_bytes()
    model, cfg = load_model(a)
    assert dumps_model(model, cfg) == a.read_text()
    assert load_config(a) == cfg


def test_bootstrap_is_byte_deterministic(simulated):
    tmp, data = simulated
    m = tmp / "m.json"
    _run("fit", "--data", data, "--train", 100, "--out", m)
    _run("bootstrap", "--model", m, "--iters", 30, "--seed", 2, "--out", tmp / "b1.csv")
    _run("bootstrap", "--model", m, "--iters", 30, "--seed", 2, "--out", tmp / "b2.csv")
    assert (tmp / "b1.csv").read_bytes() == (tmp / "b2.csv").read_bytes()


def test_evaluate_from_error_table(tmp_path):
    rows = "\n".join(f"{i},{0.2 + 0.001 * i},{0.25 + 0.001 * i}" for i in range(12))
    (tmp_path / "e.csv").write_text("replicate,hibits,logistic\n" + rows + "\n")
    assert _run("evaluate", "--errors", tmp_path / "e.csv", "--out", tmp_path / "t.csv") == 0
    last = (tmp_path / "t.csv").read_text().splitlines()[-1].split(",")
    assert float(last[2]) == pytest.approx(-0.05) and last[-1] == "1"


def _error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1
    return json.loads(err[0])


def test_unknown_flag_exit_2(capsys):
    assert _run("fit", "--bogus", "1") == 2
    assert _error_line(capsys)["error"] == "usage"


def test_missing_file_exit_2(tmp_path, capsys):
    assert _run("fit", "--data", tmp_path / "none.csv", "--out", tmp_path / "m.json") == 2
    assert _error_line(capsys)["error"] == "input"


def test_schema_violation_exit_2(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("t,y\n1,0\n2,5\n")
    assert _run("fit", "--data", tmp_path / "bad.csv", "--out", tmp_path / "m.json") == 2
    assert "row 2" in _error_line(capsys)["message"]
    (tmp_path / "cfg.json").write_text('{"threshold": 3}')
    assert _run("fit", "--config", tmp_path / "cfg.json", "--data", tmp_path / "bad.csv", "--out", tmp_path / "m.json") == 2


def test_no_command_exit_2(capsys):
    assert _run() == 2
