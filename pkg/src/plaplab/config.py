"""Run configuration: schema, defaults and validation.

Configs are YAML or JSON mappings.  Unknown keys are errors, and every
violation is reported with its key path in a single exception.
"""
from __future__ import annotations

import json
from typing import List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fields import DATA_FUNCTIONS, MANUFACTURED_NAMES
from .grid import DomainSpec
from .harness import ESTIMATES
from .solver import DEFAULT_SCHEDULE, MOLLIFY_MODES
from .suite import DIMENSIONS, INEQUALITIES

SUBCOMMANDS = ("check-point", "solve", "sweep", "counterexample", "holder")


class ConfigError(ValueError):
    """Raised with one line per schema violation."""

    def __init__(self, problems: List[str]):
        self.problems = problems
        super().__init__("invalid config:\n" + "\n".join(f"  {p}" for p in problems))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _check_gamma(values: List[float]) -> List[float]:
    for g in values:
        if not g > -1:
            raise ValueError("gamma must exceed -1")
    return values


def _check_p(values: List[float]) -> List[float]:
    for p in values:
        if not p > 1:
            raise ValueError("p must exceed 1")
    return values


def _check_schedule(values: List[float]) -> List[float]:
    if not values:
        raise ValueError("eps schedule must be nonempty")
    if any(not 0 < e <= 1 for e in values):
        raise ValueError("eps values must lie in (0, 1]")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError("eps schedule must be strictly decreasing")
    return values


class DomainModel(_Strict):
    shape: Literal["rectangle", "disk"] = "rectangle"
    a: float = Field(1.0, gt=0)
    b: float = Field(1.0, gt=0)
    R: float = Field(1.0, gt=0)

    def spec(self) -> DomainSpec:
        return DomainSpec.rectangle(self.a, self.b) if self.shape == "rectangle" else DomainSpec.disk(self.R)


class CheckPointSection(_Strict):
    samples: int = Field(1_000_000, ge=1)
    dims: List[int] = list(DIMENSIONS)
    inequalities: List[str] = list(INEQUALITIES)
    equality_samples: int = Field(100_000, ge=1)

    @field_validator("inequalities")
    @classmethod
    def _known(cls, v):
        bad = [x for x in v if x not in INEQUALITIES]
        if bad:
            raise ValueError(f"unknown inequalities {bad}; known: {list(INEQUALITIES)}")
        return v

    @field_validator("dims")
    @classmethod
    def _dims(cls, v):
        if not v or any(n < 2 for n in v):
            raise ValueError("dims must be a nonempty list of integers >= 2")
        return v


class SolveSection(_Strict):
    preset: Optional[Literal["poisson"]] = None
    p: float = 2.0
    gamma: float = 0.0
    eps: float = Field(1e-2, gt=0, le=1)
    lam: float = Field(0.0, ge=0, lt=1)
    f: str = "sinsin"
    f_scale: float = 1.0
    f_file: Optional[str] = None
    continuation: bool = False
    mollify: str = "tied"
    max_picard: int = Field(200, ge=1)

    @field_validator("gamma")
    @classmethod
    def _g(cls, v):
        return _check_gamma([v])[0]

    @field_validator("p")
    @classmethod
    def _p(cls, v):
        return _check_p([v])[0]

    @field_validator("f")
    @classmethod
    def _f(cls, v):
        if v not in DATA_FUNCTIONS:
            raise ValueError(f"unknown data function {v!r}; known: {sorted(DATA_FUNCTIONS)}")
        return v

    @field_validator("mollify")
    @classmethod
    def _m(cls, v):
        if v not in MOLLIFY_MODES:
            raise ValueError(f"mollify must be one of {list(MOLLIFY_MODES)}")
        return v


class CounterexampleSection(_Strict):
    n: int = Field(4, ge=3)
    p: float = 2.0
    gamma: float = 0.0
    eps: List[float] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    cutoff: Literal["auto", "quintic", "smooth"] = "auto"

    @field_validator("gamma")
    @classmethod
    def _g(cls, v):
        return _check_gamma([v])[0]

    @field_validator("p")
    @classmethod
    def _p(cls, v):
        return _check_p([v])[0]

    @field_validator("eps")
    @classmethod
    def _e(cls, v):
        if any(not 0 < e < 0.5 for e in v) or any(b >= a for a, b in zip(v, v[1:])) or not v:
            raise ValueError("eps must be a nonempty strictly decreasing list in (0, 1/2)")
        return v


class RunConfig(_Strict):
    subcommand: Optional[Literal["check-point", "solve", "sweep", "counterexample", "holder"]] = None
    seed: int = 42
    threads: int = Field(1, ge=1)
    out: str = "out"
    h: float = Field(1.0 / 64, gt=0)
    hs: Optional[List[float]] = None
    eps_schedule: List[float] = list(DEFAULT_SCHEDULE)
    beta: List[float] = [0.0]
    p: Union[float, List[float]] = [2.0]
    gamma: Union[float, List[float]] = [0.0]
    domains: List[DomainModel] = [DomainModel()]
    functions: List[str] = ["sinsin"]
    estimates: List[str] = ["miranda_talenti", "apriori", "gradient_lq"]
    check_point: CheckPointSection = CheckPointSection()
    solve: SolveSection = SolveSection()
    counterexample: CounterexampleSection = CounterexampleSection()

    @field_validator("p", mode="after")
    @classmethod
    def _p(cls, v):
        return _check_p(_as_list(v))

    @field_validator("gamma", mode="after")
    @classmethod
    def _g(cls, v):
        return _check_gamma(_as_list(v))

    @field_validator("eps_schedule")
    @classmethod
    def _eps(cls, v):
        return _check_schedule(v)

    @field_validator("beta")
    @classmethod
    def _beta(cls, v):
        if any(b < 0 for b in v):
            raise ValueError("beta values must be >= 0")
        return v

    @field_validator("hs")
    @classmethod
    def _hs(cls, v):
        if v is not None and (not v or any(not h > 0 for h in v)):
            raise ValueError("hs must be a nonempty list of positive spacings")
        return v

    @field_validator("estimates")
    @classmethod
    def _est(cls, v):
        bad = [e for e in v if e not in ESTIMATES]
        if bad:
            raise ValueError(f"unknown estimates {bad}; known: {list(ESTIMATES)}")
        return v

    @model_validator(mode="after")
    def _functions_exist(self):
        bad = [f for f in self.functions if f not in MANUFACTURED_NAMES and f not in DATA_FUNCTIONS]
        if bad:
            raise ValueError(f"unknown functions {bad}")
        return self

    @property
    def spacings(self) -> List[float]:
        return list(self.hs) if self.hs is not None else [self.h]


def _format(err: ValidationError) -> List[str]:
    out = []
    for e in err.errors():
        path = ".".join(str(x) for x in e["loc"]) or "<root>"
        msg = e["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        if e["type"] == "extra_forbidden":
            msg = f"unknown key {e['loc'][-1]!r}"
        out.append(f"{path}: {msg}")
    return out


def parse_config(text: str) -> RunConfig:
    """Parse YAML or JSON text into a validated :class:`RunConfig`."""
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigError([f"<root>: not valid YAML/JSON ({exc})"]) from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(["<root>: config must be a mapping"])
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def with_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Return ``cfg`` with the non-None overrides applied and re-validated."""
    data = cfg.model_dump()
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from None


def dump_config(cfg: RunConfig) -> str:
    return json.dumps(cfg.model_dump(), indent=2, sort_keys=True) + "\n"
