"""Command-line interface: ``hibits {simulate,fit,predict,bootstrap,select,evaluate}``.

Settings come from the defaults, then ``--config`` (JSON), then flags. All
randomness derives from ``--seed``. Failures print one JSON line on stderr,
``{"error": kind, "message": ...}``; usage and input errors exit with 2,
numerical failures with 1.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .bootstrap import bootstrap_beta
from .config import RunConfig, config_hash, load_config
from .data import atomic_write_text, load_csv, split_data, write_csv, write_table
from .errors import HibitsError, InvalidInputError
from .evaluation import error_matrix, paired_bonferroni_ci, run_replicates
from .glm import fit_glm, wald_ci
from .model import classify, fit_hibits, gp_affine, predict_dataset
from .modelio import load_model, save_model
from .select import optimize_lambda
from .simulate import SCENARIOS, ScenarioConfig, generate, scenario_config, sleep_like_series

EXIT_USAGE = 2
EXIT_FAILURE = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _bounds(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a,b', got {text!r}") from None
    return lo, hi


def _sidecar(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}{suffix}{ext or '.csv'}"


def _provenance(config: RunConfig | None = None) -> list[str]:
    lines = [f"hibits {__version__}"]
    if config is not None:
        lines.append(f"config_hash {config_hash(config)}")
    return lines


def run_config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    changes = {}
    for flag, key in (
        ("seed", "seed"),
        ("link", "link"),
        ("lambda_bounds", "lambda_bounds"),
        ("threshold", "threshold"),
        ("train", "train_n"),
        ("test", "test_n"),
        ("iters", "bootstrap_iters"),
        ("split", "split"),
        ("gp_input", "gp_input"),
    ):
        v = getattr(args, flag, None)
        if v is not None:
            changes[key] = v
    if getattr(args, "missing_data", False):
        changes["missing_data"] = True
    return cfg.replace(**changes) if changes else cfg


def _prepare(data, cfg: RunConfig):
    data = data.with_lag() if cfg.use_lag else data
    if cfg.train_n is None:
        return data, data.take(np.arange(0))
    return split_data(data, cfg.train_n, cfg.test_n, mode=cfg.effective_split, seed=cfg.seed)


def _fit(data_path, cfg: RunConfig):
    train, test = _prepare(load_csv(data_path), cfg)
    model = fit_hibits(
        train,
        cfg.kernel,
        cfg.link_kind,
        cfg.select_lambda,
        cfg.lambda_bounds,
        gp_input=cfg.gp_input,
        offset_intercept=cfg.offset_intercept,
    )
    return model, train, test


def _report(model, cfg: RunConfig) -> str:
    s1 = model.stage1
    names = (["(intercept)"] if s1.has_intercept else []) + list(model.x1_names)
    ci = wald_ci(s1)
    lines = [f"# {line}" for line in _provenance(cfg)]
    lines += [
        f"link {model.link.value}",
        f"n_train {s1.n_obs}",
        "",
        "stage 1 fixed effects",
        f"{'term':<14}{'estimate':>14}{'std_err':>14}{'wald_lo':>14}{'wald_hi':>14}",
    ]
    for i, nm in enumerate(names):
        lines.append(f"{nm:<14}{s1.beta[i]:>14.6f}{s1.std_err[i]:>14.6f}{ci[i, 0]:>14.6f}{ci[i, 1]:>14.6f}")
    lines += [
        f"loglik {s1.loglik:.6f}",
        f"AIC {s1.aic:.6f}",
        f"BIC {s1.bic:.6f}",
        f"converged {s1.converged}",
        "",
        "stage 2 latent process",
        f"lambda_hat {model.lambda_hat:.6f}",
        f"rho {model.kernel.rho} sigma2 {model.kernel.sigma2}",
        f"log_marginal {model.laplace.log_marginal:.6f}",
        f"mode_iterations {model.laplace.iterations}",
    ]
    if model.lambda_search is not None:
        lines.append("lambda trace (lambda, log_marginal)")
        lines += [f"{x:.8f} {v:.8f}" for x, v in model.lambda_search.trace]
    return "\n".join(lines) + "\n"


def cmd_simulate(args):
    seed = args.seed if args.seed is not None else 0
    if args.scenario == "sleep":
        data = sleep_like_series(n=args.n or 1024, seed=seed)
        write_csv(args.out, data)
        return
    if args.config:
        try:
            with open(args.config) as fh:
                sc = ScenarioConfig.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise InvalidInputError(f"bad scenario config: {exc}") from None
    else:
        sc = scenario_config(args.scenario or "S1")
    if args.n is not None:
        sc = ScenarioConfig(sc.scenario, sc.beta, sc.kernel, args.n, sc.y_init, sc.seed)
    data, f = generate(sc, np.random.default_rng(seed))
    write_csv(args.out, data)
    if f is not None:
        write_table(_sidecar(args.out, "_latent"), ["t", "f"], zip(data.t.tolist(), f.tolist()))


def cmd_fit(args):
    cfg = run_config(args)
    model, _, _ = _fit(args.data, cfg)
    save_model(args.out, model, cfg)
    atomic_write_text(args.report or os.path.splitext(args.out)[0] + "_report.txt", _report(model, cfg))


def cmd_predict(args):
    model, cfg = load_model(args.model)
    cfg = cfg or RunConfig()
    if args.threshold is not None:
        cfg = cfg.replace(threshold=args.threshold)
    data = load_csv(args.data)
    if "lag_y" in model.x1_names:
        data = data.with_lag()
    if cfg.train_n is not None and not args.all_rows:
        _, data = split_data(data, cfg.train_n, cfg.test_n, mode=cfg.effective_split, seed=cfg.seed)
    dist = predict_dataset(model, data)
    yhat = classify(dist, cfg.threshold)
    rows = zip(data.t.tolist(), data.y.tolist(), dist.pi_bar.tolist(), dist.f_bar.tolist(), dist.v.tolist(), yhat.tolist())
    write_table(args.out, ["t", "y", "pi_bar", "f_bar", "v", "y_hat"], rows, _provenance(cfg))
    if len(data):
        sys.stdout.write(f"error_rate {float(np.mean(yhat != data.y)):.6f}\n")


def cmd_bootstrap(args):
    model, cfg = load_model(args.model)
    cfg = cfg or RunConfig()
    iters = args.iters if args.iters is not None else cfg.bootstrap_iters
    seed = args.seed if args.seed is not None else cfg.seed
    summary = bootstrap_beta(model, iters, seed=seed)
    names = list(model.x1_names)
    write_table(args.out, names, summary.draws.tolist(), _provenance(cfg))
    s1 = model.stage1
    wald = wald_ci(s1)[1:] if s1.has_intercept else wald_ci(s1)
    rows = [
        [nm, summary.beta_star[i], summary.ci_lower[i], summary.ci_upper[i], model.beta[i], wald[i, 0], wald[i, 1]]
        for i, nm in enumerate(names)
    ]
    header = ["term", "boot_estimate", "boot_lower", "boot_upper", "mle", "wald_lower", "wald_upper"]
    write_table(_sidecar(args.out, "_summary"), header, rows, _provenance(cfg))
    if summary.unreliable:
        sys.stderr.write(json.dumps({"warning": "unreliable", "failed_refits": summary.n_failed}) + "\n")


def cmd_select(args):
    cfg = run_config(args)
    train, _ = _prepare(load_csv(args.data), cfg)
    X1 = train.fixed_design
    s1 = fit_glm(X1, train.y, cfg.link_kind, with_intercept=True)
    offset = X1 @ s1.slopes + (s1.intercept if cfg.offset_intercept else 0.0)
    X2 = train.gp_inputs
    shift, scale = gp_affine(X2, cfg.gp_input)
    if shift is not None:
        X2 = (X2 - shift) / scale
    search = optimize_lambda(X2, train.y, cfg.kernel, cfg.link_kind, offset, cfg.lambda_bounds)
    write_table(args.out, ["lambda", "log_marginal"], search.trace, _provenance(cfg))
    sys.stdout.write(f"lambda_hat {search.lambda_hat:.8f}\nlog_marginal {search.log_marginal:.8f}\n")


def _read_errors(paths):
    """Error tables: header plus one row per replicate; a leading ``replicate`` column is dropped."""
    cols = []
    for path in paths:
        try:
            with open(path, newline="") as fh:
                lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
            header = next(csv.reader(lines[:1]))
            E = np.array([[float(v) for v in r] for r in csv.reader(lines[1:])], dtype=float).reshape(len(lines) - 1, -1)
        except (OSError, ValueError, StopIteration) as exc:
            raise InvalidInputError(f"cannot read error table {path}: {exc}") from None
        cols.append(E[:, 1:] if header and header[0] == "replicate" else E)
    return np.column_stack(cols)


def cmd_evaluate(args):
    cfg = run_config(args)
    if args.errors:
        E = _read_errors(args.errors)
    else:
        sc = scenario_config(args.scenario or "S1")
        results = run_replicates(
            sc,
            args.replicates,
            seed=cfg.seed,
            train_n=cfg.train_n or 400,
            test_n=cfg.test_n or 100,
            split=cfg.effective_split,
            fit_link=cfg.link_kind,
            lambda_bounds=cfg.lambda_bounds,
            threshold=cfg.threshold,
            fit_kernel=cfg.kernel,
        )
        E = error_matrix(results)
        write_table(
            _sidecar(args.out, "_errors"),
            ["replicate", "hibits", "logistic"],
            [[i] + r for i, r in enumerate(E.tolist())],
            _provenance(cfg),
        )
    intervals = paired_bonferroni_ci(E, baseline_col=0)
    rows = [[iv.method, iv.mean_diff, iv.lower, iv.upper, iv.sd, iv.n_replicates, int(iv.excludes_zero)] for iv in intervals]
    write_table(args.out, ["method", "mean_diff", "lower", "upper", "sd", "replicates", "excludes_zero"], rows, _provenance(cfg))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hibits", description="Hybrid GLM and Gaussian-process models for binary time series.")
    p.add_argument("--version", action="version", version=f"hibits {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, data=True):
        sp.add_argument("--config", help="JSON run config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)
        if data:
            sp.add_argument("--data", required=True, help="dataset CSV")

    def run_flags(sp):
        sp.add_argument("--link", choices=["logit", "probit"])
        sp.add_argument("--lambda-bounds", type=_bounds, dest="lambda_bounds")
        sp.add_argument("--threshold", type=float)
        sp.add_argument("--train", type=int)
        sp.add_argument("--test", type=int)
        sp.add_argument("--split", choices=["sequential", "random"])
        sp.add_argument("--gp-input", choices=["scaled", "raw"], dest="gp_input")
        sp.add_argument("--missing-data", action="store_true", dest="missing_data")

    sp = sub.add_parser("simulate", help="simulate a scenario dataset")
    common(sp, data=False)
    sp.add_argument("--scenario", choices=list(SCENARIOS) + ["sleep"])
    sp.add_argument("--n", type=int)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a model")
    common(sp)
    run_flags(sp)
    sp.add_argument("--report")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("predict", help="predict with a fitted model")
    sp.add_argument("--model", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--all-rows", action="store_true", dest="all_rows", help="ignore the split in the model config")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("bootstrap", help="bootstrap intervals for the fixed effects")
    sp.add_argument("--model", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--iters", type=int)
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_bootstrap)

    sp = sub.add_parser("select", help="marginal-likelihood search for lambda")
    common(sp)
    run_flags(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("evaluate", help="paired Bonferroni intervals for error-rate differences")
    common(sp, data=False)
    run_flags(sp)
    sp.add_argument("--errors", nargs="+", help="replicate error CSV(s); first error column is the reference method")
    sp.add_argument("--scenario", choices=list(SCENARIOS))
    sp.add_argument("--replicates", type=int, default=100)
    sp.set_defaults(func=cmd_evaluate)
    return p


def _fail(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message)}) + "\n")
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    try:
        args.func(args)
    except (InvalidInputError, FileNotFoundError) as exc:
        return _fail("input", exc, EXIT_USAGE)
    except HibitsError as exc:
        return _fail(type(exc).__name__, exc, EXIT_FAILURE)
    return 0


if __name__ == "__main__":
    sys.exit(main())
