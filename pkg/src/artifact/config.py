"""Line-oriented run configuration: ``section.key = value`` with ``#`` comments.

Every key is declared in :data:`SCHEMA`; unknown keys, malformed values and
duplicates raise :class:`ConfigError` before any computation starts.
Lists are comma separated; numbers may be written as fractions (``2/3``).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

from .errors import ConfigError
from .minimizer import SolverOptions


def _number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a number: {text!r}") from exc


def _integer(text: str) -> int:
    text = text.strip()
    try:
        return int(text, 0)
    except ValueError as exc:
        raise ValueError(f"not an integer: {text!r}") from exc


def _boolean(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _string(text: str) -> str:
    t = text.strip()
    if len(t) >= 2 and t[0] == t[-1] and t[0] in "\"'":
        t = t[1:-1]
    return t


def _list_of(item: Callable[[str], Any]) -> Callable[[str], list]:
    def parse(text: str) -> list:
        parts = [p for p in text.split(",")]
        if any(not p.strip() for p in parts):
            raise ValueError("empty list entry")
        return [item(p) for p in parts]
    return parse


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text: str) -> str:
        t = _string(text)
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {t!r}")
        return t
    return parse


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any
    help: str = ""


_FLOATS = _list_of(_number)
_INTS = _list_of(_integer)

SCHEMA: dict[str, Key] = {
    "grid.dim": Key(_integer, 1, "spatial dimension"),
    "grid.L": Key(_number, None, "box half-width (automatic when unset)"),
    "grid.n": Key(_integer, None, "points per axis, a power of two (automatic when unset)"),
    "problem.sigma": Key(_number, 1.0, "nonlinearity exponent"),
    "problem.c": Key(_number, None, "frequency shift"),
    "problem.m": Key(_number, None, "mass"),
    "problem.values": Key(_FLOATS, None, "sweep parameters (masses or frequencies)"),
    "problem.k_star": Key(_number, None, "critical mass (computed when unset)"),
    "problem.m0": Key(_number, None, "degeneracy threshold mass for E_min scans"),
    "problem.mu0": Key(_number, None, "inflection threshold mass (computed when unset)"),
    "output.dir": Key(_string, None, "output directory"),
    "functionals.profile": Key(_choice("gaussian", "knapp", "annulus", "file"), "gaussian",
                               "field to evaluate"),
    "functionals.tau": Key(_number, 1.0, "Gaussian width"),
    "functionals.carrier": Key(_boolean, False, "modulate the Gaussian onto |xi| = 1"),
    "functionals.eps": Key(_number, 0.1, "Knapp/annulus thickness"),
    "functionals.delta": Key(_number, 0.09, "Knapp cap aperture"),
    "functionals.path": Key(_string, None, "stored field binary"),
    "ineq.dim": Key(_INTS, None, "dimensions"),
    "ineq.s": Key(_FLOATS, None, "derivative orders"),
    "ineq.p": Key(_FLOATS, None, "Lebesgue exponents"),
    "ineq.kappa": Key(_FLOATS, None, "interpolation weights"),
    "ineq.t_grid": Key(_FLOATS, None, "profile evaluation points"),
    "ineq.family": Key(_choice("gaussian", "dilation", "knapp", "knapp-diagonal"), "gaussian",
                       "witness family"),
    "ineq.params": Key(_FLOATS, None, "witness family parameters"),
    "ineq.delta": Key(_number, 0.09, "Knapp aperture for the eps sweep"),
    "ineq.instances": Key(_integer, 50, "random finite measure instances"),
    "ineq.q": Key(_number, 1.5, "finite measure exponent q in [1, 2)"),
    "ineq.size": Key(_integer, None, "finite measure support size (random when unset)"),
    "ineq.R": Key(_number, None, "restriction radius for unbounded points"),
    "ineq.sigma": Key(_number, None, "sigma used to convert M into m0"),
    "asymptotics.c": Key(_FLOATS, None, "frequencies (decreasing for small-c)"),
    "constants.with_M": Key(_boolean, True, "also estimate M and m0"),
    "constants.R": Key(_number, None, "restriction radius for M where unbounded"),
}

_SOLVER_PARSERS = {int: _integer, float: _number, bool: _boolean, str: _string}
for _f in dataclasses.fields(SolverOptions):
    SCHEMA[f"solver.{_f.name}"] = Key(_SOLVER_PARSERS[type(_f.default)], _f.default,
                                      "solver option")


@dataclass
class RunConfig:
    """Validated configuration; ``explicit`` holds only the keys that were set."""

    explicit: dict[str, Any] = dc_field(default_factory=dict)
    source: str = ""

    def get(self, key: str) -> Any:
        if key not in SCHEMA:
            raise KeyError(key)
        return self.explicit.get(key, SCHEMA[key].default)

    def __getitem__(self, key: str) -> Any:
        return self.get(key)

    def require(self, key: str) -> Any:
        val = self.get(key)
        if val is None:
            raise ConfigError(f"missing required key {key}")
        return val

    def solver_options(self) -> SolverOptions:
        kw = {k.split(".", 1)[1]: v for k, v in self.explicit.items() if k.startswith("solver.")}
        try:
            return SolverOptions(**kw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        merged = dict(self.explicit)
        for k, v in overrides.items():
            if k not in SCHEMA:
                raise ConfigError(f"unknown key {k}")
            merged[k] = v
        return RunConfig(merged, self.source)

    def snapshot(self) -> dict[str, Any]:
        return {k: self.explicit[k] for k in sorted(self.explicit)}


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"{source}:{lineno}: empty value for {key!r}")
        try:
            values[key] = SCHEMA[key].parse(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from exc
    cfg = RunConfig(values, source)
    validate(cfg)
    return cfg


def from_mapping(mapping: dict[str, Any], source: str = "<manifest>") -> RunConfig:
    """Rebuild a config from a stored snapshot (values already typed)."""
    for k in mapping:
        if k not in SCHEMA:
            raise ConfigError(f"{source}: unknown key {k!r}")
    cfg = RunConfig(dict(mapping), source)
    validate(cfg)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path))


def _power_of_two(n: int) -> bool:
    return n >= 32 and n & (n - 1) == 0


def validate(cfg: RunConfig) -> None:
    """Range checks that do not depend on the subcommand."""
    dim = cfg["grid.dim"]
    if dim not in (1, 2, 3):
        raise ConfigError("grid.dim must be 1, 2 or 3")
    L, n = cfg["grid.L"], cfg["grid.n"]
    if (L is None) != (n is None):
        raise ConfigError("grid.L and grid.n must be given together")
    if L is not None and not L > 0:
        raise ConfigError("grid.L must be positive")
    if n is not None and not _power_of_two(n):
        raise ConfigError("grid.n must be a power of two, at least 32")
    if not cfg["problem.sigma"] > 0:
        raise ConfigError("problem.sigma must be positive")
    for key in ("problem.c", "problem.m", "functionals.tau", "functionals.eps",
                "functionals.delta", "ineq.delta", "ineq.R", "constants.R"):
        v = cfg[key]
        if v is not None and not v > 0:
            raise ConfigError(f"{key} must be positive")
    vals = cfg["problem.values"]
    if vals is not None and any(not v > 0 for v in vals):
        raise ConfigError("problem.values must be positive")
    if cfg["ineq.instances"] < 1:
        raise ConfigError("ineq.instances must be at least 1")
    size = cfg["ineq.size"]
    if size is not None and not 1 <= size <= 16:
        raise ConfigError("ineq.size must lie between 1 and 16")
    if not 1.0 <= cfg["ineq.q"] < 2.0:
        raise ConfigError("ineq.q must lie in [1, 2)")
    cfg.solver_options()
