"""Run configuration: a TOML file plus ``section.key=value`` overrides.

Schema (every key optional unless noted)::

    seed = 0

    [problem]
    name = "sq2"              # required, from the catalog
    [problem.params]          # builder keyword overrides
    coupling = 0.5

    [constants]               # overrides for derived smoothness constants
    mu_g = 1.0

    [schedule]                # ScheduleParams fields
    rho = 1.5

    [init]
    x0 = [1.0]

    [output]
    dir = "out"

    [checks]
    oracle = true             # use exact ground truth when available

Unknown keys raise ``ConfigError`` naming the key.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional, Sequence

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .core import SmoothnessConstants
from .errors import ConfigError
from .outer import ScheduleParams

_SCHEDULE_KEYS = {f.name for f in dataclasses.fields(ScheduleParams)}
_CONSTANT_KEYS = {f.name for f in dataclasses.fields(SmoothnessConstants)}
_SCHEMA = {
    "seed": None,
    "problem": {"name": None, "params": "*"},
    "constants": _CONSTANT_KEYS,
    "schedule": _SCHEDULE_KEYS,
    "init": {"x0": None},
    "output": {"dir": None},
    "checks": {"oracle": None},
}


@dataclass
class RunConfig:
    problem: Optional[str] = None
    problem_params: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    x0: Optional[list] = None
    out: Optional[str] = None
    seed: int = 0
    use_oracle: bool = True

    def schedule_params(self) -> ScheduleParams:
        try:
            return ScheduleParams(**self.schedule)
        except TypeError as exc:
            raise ConfigError(f"schedule: {exc}") from None

    def require_problem(self) -> str:
        if not self.problem:
            raise ConfigError("problem.name is required")
        return self.problem


def _validate(data: dict, schema=_SCHEMA, prefix: str = "") -> None:
    for key, value in data.items():
        path = f"{prefix}{key}"
        if isinstance(schema, dict):
            if key not in schema:
                raise ConfigError(f"unknown config key {path!r}")
            sub = schema[key]
        else:
            if key not in schema:
                raise ConfigError(f"unknown config key {path!r}")
            sub = None
        if sub == "*":
            if not isinstance(value, dict):
                raise ConfigError(f"{path!r} must be a table")
            continue
        if sub is None:
            if isinstance(value, dict):
                raise ConfigError(f"{path!r} must be a value, not a table")
            continue
        if not isinstance(value, dict):
            raise ConfigError(f"{path!r} must be a table")
        _validate(value, sub, path + ".")


def _parse_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def apply_overrides(data: dict, overrides: Sequence[str]) -> dict:
    """Apply ``a.b.c=value`` strings; values are parsed as TOML literals."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, raw = item.partition("=")
        parts = key.strip().split(".")
        if not all(parts):
            raise ConfigError(f"malformed override key {key!r}")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a value")
        node[parts[-1]] = _parse_value(raw.strip())
    return data


def from_dict(data: dict) -> RunConfig:
    _validate(data)
    prob = data.get("problem", {})
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' must be an integer")
    oracle = data.get("checks", {}).get("oracle", True)
    if not isinstance(oracle, bool):
        raise ConfigError("'checks.oracle' must be a boolean")
    return RunConfig(
        problem=prob.get("name"),
        problem_params=dict(prob.get("params", {})),
        constants=dict(data.get("constants", {})),
        schedule=dict(data.get("schedule", {})),
        x0=data.get("init", {}).get("x0"),
        out=data.get("output", {}).get("dir"),
        seed=seed,
        use_oracle=oracle,
    )


def load_config(path: Optional[str] = None, overrides: Sequence[str] = ()) -> RunConfig:
    data: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config {path!r}: {exc}") from None
    return from_dict(apply_overrides(data, overrides))
