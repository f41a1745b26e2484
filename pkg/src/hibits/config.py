"""Run configuration shared by the command-line tools.

Every field has a default, so ``RunConfig()`` is a complete configuration.
Configs are stored as JSON; ``config_hash`` fingerprints the canonical form
so reports and model files can be traced back to the settings that made them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .errors import InvalidInputError
from .kernels import KernelParams
from .links import LinkKind

SPLIT_MODES = ("sequential", "random")


@dataclass(frozen=True)
class RunConfig:
    """Settings for one fit / predict / bootstrap run.

    link: response link, ``logit`` or ``probit``.
    kernel: starting kernel; ``rho`` and ``sigma2`` stay fixed, ``lam`` is the
        start value (or the fixed value when ``select_lambda`` is off).
    lambda_bounds: search interval for ``lam``.
    split: ``sequential`` (first ``train_n`` rows train) or ``random``.
    train_n / test_n: split sizes; ``None`` means "all" / "the rest".
    threshold: classification cut-off on the predictive probability.
    bootstrap_iters: bootstrap resamples.
    seed: master seed for every random draw.
    gp_input: ``scaled`` (min-max to [0, 1] over training rows) or ``raw``.
    lag: add the lagged response as a fixed effect.
    missing_data: drop the lag column and force a random split, for series
        whose observations are not consecutive.
    offset_intercept: add the Stage-1 intercept to the Stage-2 offset
        (off by default; kept for sensitivity checks).
    """

    link: str = "logit"
    kernel: KernelParams = field(default_factory=lambda: KernelParams(lam=1.0, rho=1.0, sigma2=0.01))
    lambda_bounds: tuple = (0.0, 10.0)
    select_lambda: bool = True
    split: str = "sequential"
    train_n: int | None = None
    test_n: int | None = None
    threshold: float = 0.5
    bootstrap_iters: int = 1000
    seed: int = 0
    gp_input: str = "scaled"
    lag: bool = True
    missing_data: bool = False
    offset_intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "link", LinkKind.parse(self.link).value)
        object.__setattr__(self, "lambda_bounds", tuple(float(b) for b in self.lambda_bounds))
        lo, hi = self.lambda_bounds if len(self.lambda_bounds) == 2 else (None, None)
        if lo is None or not 0.0 <= lo < hi:
            raise InvalidInputError(f"lambda_bounds must be [a, b] with 0 <= a < b, got {self.lambda_bounds}")
        if self.split not in SPLIT_MODES:
            raise InvalidInputError(f"split must be one of {SPLIT_MODES}, got {self.split!r}")
        if not 0.0 < self.threshold < 1.0:
            raise InvalidInputError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.bootstrap_iters < 1:
            raise InvalidInputError("bootstrap_iters must be positive")
        if self.gp_input not in ("scaled", "raw"):
            raise InvalidInputError(f"gp_input must be 'scaled' or 'raw', got {self.gp_input!r}")
        for name in ("train_n", "test_n"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or isinstance(v, bool) or v < 0):
                raise InvalidInputError(f"{name} must be a non-negative integer")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise InvalidInputError("seed must be a non-negative integer")

    @property
    def link_kind(self) -> LinkKind:
        return LinkKind.parse(self.link)

    @property
    def effective_split(self) -> str:
        return "random" if self.missing_data else self.split

    @property
    def use_lag(self) -> bool:
        return self.lag and not self.missing_data

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_bounds"] = list(self.lambda_bounds)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise InvalidInputError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "kernel" in d:
            k = d["kernel"]
            if not isinstance(k, dict):
                raise InvalidInputError("kernel must be an object")
            try:
                d["kernel"] = KernelParams(**k)
            except TypeError as exc:
                raise InvalidInputError(f"bad kernel: {exc}") from None
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(d)

    def replace(self, **changes) -> "RunConfig":
        return replace(self, **changes)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: RunConfig) -> str:
    """First 16 hex digits of the SHA-256 of the canonical JSON form."""
    return hashlib.sha256(canonical_json(config.to_dict()).encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    """Read a config file, or the config embedded in a model file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config is not valid JSON: {exc}") from None
    if isinstance(d, dict) and "config" in d and "format" in d:
        d = d["config"]
        if d is None:
            raise InvalidInputError(f"model file {path} carries no config")
    return RunConfig.from_dict(d)
