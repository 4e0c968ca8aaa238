"""Declarative run configuration read from TOML.

Every section maps onto a dataclass; unknown sections or keys are rejected
before anything is computed. See README.md for the full schema.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, fields, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    """Bad or missing configuration; the message names the offending key."""


@dataclass
class RunSection:
    seed: int = 0
    grid: int = 32
    out: str = ""
    jobs: int = 1


@dataclass
class ProblemSection:
    p: float = 2.0
    domain: str = "square"
    delta: float = 0.1
    r0: float = 0.25
    coefficient: str = "const"
    obstacles: str = "inactive"
    forcing: str = "poisson"


@dataclass
class WeightSection:
    gamma: float = 0.0
    center: list = field(default_factory=lambda: [0.5, 0.55])
    subsets_per_ball: int = 32


@dataclass
class OperatorSection:
    alpha: float = 0.0
    beta: float = 1.0
    t: float = 1.0
    points: int = 64


@dataclass
class LorentzSection:
    q: float = 2.0
    s: float = 3.0


@dataclass
class YoungSection:
    family: str = ""
    p: float = 1.0


@dataclass
class GoodLambdaSection:
    epsilon_grid: list = field(default_factory=lambda: [0.1, 0.05, 0.02])
    lambda_knots: int = 64


@dataclass
class SolverSection:
    tol: float = 1e-8
    max_iter: int = 20000
    mu: float = 1e-8
    mu_start: float = 1e-2
    mu_stages: int = 4


@dataclass
class InputSection:
    field: str = ""
    mask: str = ""


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    problem: ProblemSection = field(default_factory=ProblemSection)
    weight: WeightSection = field(default_factory=WeightSection)
    operator: OperatorSection = field(default_factory=OperatorSection)
    lorentz: LorentzSection = field(default_factory=LorentzSection)
    young: YoungSection = field(default_factory=YoungSection)
    goodlambda: GoodLambdaSection = field(default_factory=GoodLambdaSection)
    solver: SolverSection = field(default_factory=SolverSection)
    input: InputSection = field(default_factory=InputSection)

    def out_dir(self) -> str:
        return self.run.out or os.environ.get("REGLAB_OUT", "") or "reglab_out"

    def require(self, dotted: str):
        section, key = dotted.split(".")
        value = getattr(getattr(self, section), key)
        if value in ("", None):
            raise ConfigError(f"missing config key '{dotted}'")
        return value


def _coerce(section: str, key: str, default, value):
    where = f"{section}.{key}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"'{where}' must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"'{where}' must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
            return math.inf
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"'{where}' must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"'{where}' must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"'{where}' must be an array")
        return value
    return value


def from_mapping(doc: dict) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for section, body in doc.items():
        if section not in known:
            raise ConfigError(f"unknown config section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"'{section}' must be a table")
        current = getattr(cfg, section)
        allowed = {f.name: getattr(current, f.name) for f in fields(current)}
        updates = {}
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(f"unknown config key '{section}.{key}'")
            updates[key] = _coerce(section, key, allowed[key], value)
        setattr(cfg, section, replace(current, **updates))
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_mapping(doc)
