"""Autoregressive binary series for the five simulation scenarios.

``P(y_i = 1) = t(b0 * x1_i + b1 * y_{i-1} + f(x2_i))`` with ``x1_i ~ N(0, 1)``
iid, ``x2_i = i`` (raw time index) and ``f`` one GP draw per series.

==========  =======  ==========================================
scenario    link     latent process
==========  =======  ==========================================
S1          logit    squared-exponential + nugget
S2          logit    none
S3          probit   squared-exponential + nugget
S4          probit   none
S5          logit    mixture of squared-exponential and Cauchy
==========  =======  ==========================================
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import BinarySeriesDataset
from .errors import InvalidInputError
from .kernels import KernelParams, sample_gp
from .links import LinkKind, raw_inverse_link

SCENARIOS = ("S1", "S2", "S3", "S4", "S5")
_LINKS = {"S1": LinkKind.LOGIT, "S2": LinkKind.LOGIT, "S3": LinkKind.PROBIT, "S4": LinkKind.PROBIT, "S5": LinkKind.LOGIT}
_HAS_GP = {"S1": True, "S2": False, "S3": True, "S4": False, "S5": True}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str = "S1"
    beta: tuple = (0.5, 3.0)
    kernel: KernelParams = field(default_factory=lambda: KernelParams(lam=10.0, rho=1.0, sigma2=0.01))
    n: int = 500
    y_init: int = 1
    seed: int | None = None

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {self.scenario!r}")
        if len(self.beta) != 2:
            raise InvalidInputError("beta must be (b0, b1)")
        if self.n < 1:
            raise InvalidInputError("n must be positive")
        if self.y_init not in (0, 1):
            raise InvalidInputError("y_init must be 0 or 1")
        if self.scenario == "S5" and not (self.kernel.tau > 0):
            raise InvalidInputError("scenario S5 needs tau > 0")

    @property
    def link(self) -> LinkKind:
        return _LINKS[self.scenario]

    @property
    def has_gp(self) -> bool:
        return _HAS_GP[self.scenario]

    def with_seed(self, seed) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = list(self.beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        if isinstance(d.get("kernel"), dict):
            d["kernel"] = KernelParams(**d["kernel"])
        if "beta" in d:
            d["beta"] = tuple(float(b) for b in d["beta"])
        return cls(**d)


def scenario_config(scenario: str, **overrides) -> ScenarioConfig:
    """Defaults per scenario.

    S1/S3: beta = (0.5, 3), lam = 10, rho = 1, sigma = 0.1. S5 adds eta = 0.2
    and tau = 1 on top of the same squared-exponential part. S2/S4 carry the
    kernel but never use it.
    """
    kernel = KernelParams(lam=10.0, rho=1.0, sigma2=0.01)
    if scenario == "S5":
        kernel = replace(kernel, eta=0.2, tau=1.0)
    kw = {"scenario": scenario, "kernel": kernel}
    if "kernel" in overrides and isinstance(overrides["kernel"], dict):
        overrides["kernel"] = replace(kernel, **overrides["kernel"])
    kw.update(overrides)
    return ScenarioConfig(**kw)


def generate(config: ScenarioConfig, rng: np.random.Generator | None = None):
    """Simulate one series. Returns ``(dataset, f)``; ``f`` is ``None`` without a GP.

    The dataset holds ``t = 1..n``, ``y``, the covariate ``x`` and GP input
    ``t``; the lagged response is not included (build it with
    :meth:`BinarySeriesDataset.with_lag`).
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n
    b0, b1 = map(float, config.beta)
    t = np.arange(1, n + 1)
    x1 = rng.standard_normal(n)
    f = sample_gp(t.astype(float), config.kernel, rng) if config.has_gp else None
    u = rng.random(n)
    base = b0 * x1 + (f if f is not None else 0.0)

    y = np.empty(n, dtype=np.int64)
    prev = config.y_init
    for i in range(n):
        p = raw_inverse_link(config.link, base[i] + b1 * prev)
        prev = int(u[i] < p)
        y[i] = prev
    data = BinarySeriesDataset(t, y, x1[:, None], t[:, None].astype(float), ("x",), ("t",))
    return data, f


def empirical_transition_table(y, normalize: bool = False) -> np.ndarray:
    """2x2 table of ``(y_{i-1}, y_i)`` pairs; ``table[a, b]`` counts ``a -> b``."""
    y = np.asarray(y, dtype=np.int64)
    if y.shape[0] < 2:
        raise InvalidInputError("need at least two observations")
    table = np.zeros((2, 2), dtype=np.int64)
    np.add.at(table, (y[:-1], y[1:]), 1)
    if normalize:
        return table / (y.shape[0] - 1)
    return table


def empirical_log_odds_by_bin(covariate, y, n_bins: int = 8):
    """Equal-width bins over the covariate range with ``log(#y=1 / #y=0)`` per bin.

    Returns ``(edges, log_odds, defined)``; bins lacking either class get
    ``nan`` and ``defined = False``.
    """
    if n_bins < 2:
        raise InvalidInputError("need at least two bins")
    x = np.asarray(covariate, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    edges = np.linspace(x.min(), x.max(), n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    ones = np.bincount(idx, weights=(y == 1), minlength=n_bins)
    zeros = np.bincount(idx, weights=(y == 0), minlength=n_bins)
    defined = (ones > 0) & (zeros > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(defined, np.log(ones / zeros), np.nan)
    return edges, lo, defined


def sleep_like_series(n: int = 1024, persistence: float = 0.99, hr_effect: float = 1.0, rng=None, seed=None):
    """Synthetic stand-in for the infant sleep recordings.

    A two-state chain whose staying probability is ``persistence`` at average
    heart rate, with a positive heart-rate effect on the log-odds of being
    awake. Heart rate is an AR(1) around 134 bpm with sd about 15 that sits
    higher while awake, and is stored raw in ``log_hr`` (log-scale covariate).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    stay = math.log(persistence / (1.0 - persistence))
    b_lag = 2.0 * stay
    b0 = -stay
    hr = np.empty(n)
    y = np.empty(n, dtype=np.int64)
    prev = 0
    level = 0.0
    for i in range(n):
        level = 0.8 * level + rng.normal(0.0, 0.6)
        hr[i] = 134.0 * math.exp(0.11 * level / 1.67 + 0.05 * prev)
        z = (math.log(hr[i]) - math.log(134.0)) / 0.11
        p = 1.0 / (1.0 + math.exp(-(b0 + b_lag * prev + hr_effect * z)))
        prev = int(rng.random() < p)
        y[i] = prev
    t = np.arange(1, n + 1)
    return BinarySeriesDataset(t, y, hr[:, None], t[:, None].astype(float), ("log_hr",), ("t",))
