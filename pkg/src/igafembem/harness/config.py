"""Experiment configuration: defaults, flat key/value files and CLI flags."""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace

PROBLEMS = ("interface-square", "machine", "machine-linear")
MIN_DEGREE = {"interface-square": 1, "machine": 2, "machine-linear": 2}

# square half-widths of the interface problem paths and the gap circle
SQUARE_PATHS = (("path1", 1.0), ("path2", 0.35), ("path3", 0.26))
MACHINE_PATH = ("gap", 0.395)


class ConfigError(ValueError):
    pass


def parse_levels(text: str) -> list:
    """``"a..b"`` (inclusive), ``"a..b:s"`` (step) or ``"a,b,c"``."""
    text = str(text).strip()
    if not text:
        return []
    m = re.fullmatch(r"(\d+)\.\.(\d+)(?::(\d+))?", text)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        step = int(m.group(3) or 1)
        if step < 1:
            raise ConfigError("level step must be positive")
        return list(range(a, b + 1, step))
    try:
        levels = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError("bad level range %r" % text) from exc
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels must be strictly increasing")
    return levels


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError("not a boolean: %r" % text)


@dataclass
class ExperimentConfig:
    problem: str = "interface-square"
    degree: int = 2
    levels: list = field(default_factory=lambda: list(range(7, 24)))
    n_gauss: int = 25
    near_depth: int = 4
    tol: float = 1e-10
    max_iter: int = 100
    output: str = "results"
    n_points: int = 20
    aitken: bool = True
    plot: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError("unknown problem %r (choose from %s)"
                              % (self.problem, ", ".join(PROBLEMS)))
        if self.degree < MIN_DEGREE[self.problem]:
            raise ConfigError("degree %d below the geometry degree %d"
                              % (self.degree, MIN_DEGREE[self.problem]))
        if any(lv < 0 for lv in self.levels):
            raise ConfigError("levels must be non-negative")
        if self.n_gauss < 1 or self.n_points < 1 or self.max_iter < 1:
            raise ConfigError("n_gauss, n_points and max_iter must be positive")
        if self.tol <= 0:
            raise ConfigError("tol must be positive")
        return self

    def paths(self):
        from ..postprocess import EvaluationPath
        if self.problem == "interface-square":
            return [EvaluationPath("square", a, self.n_points, name) for name, a in SQUARE_PATHS]
        return [EvaluationPath("circle", MACHINE_PATH[1], self.n_points, MACHINE_PATH[0])]


_CASTS = {"degree": int, "n_gauss": int, "near_depth": int, "max_iter": int,
          "n_points": int, "tol": float, "levels": parse_levels,
          "aitken": _bool, "plot": _bool, "problem": str, "output": str}


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; keys match the long CLI flags."""
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_string("[run]\n" + fh.read())
    out = {}
    for key, value in parser["run"].items():
        key = key.replace("-", "_")
        if key not in _CASTS:
            raise ConfigError("unknown config key %r" % key)
        out[key] = _CASTS[key](value)
    return out


def build_config(file_values: dict | None = None, flag_values: dict | None = None) -> ExperimentConfig:
    """Defaults, overridden by the file, overridden by explicit flags."""
    cfg = ExperimentConfig()
    names = {f.name for f in fields(cfg)}
    for source in (file_values or {}, flag_values or {}):
        upd = {k: v for k, v in source.items() if k in names and v is not None}
        cfg = replace(cfg, **upd)
    return cfg.validate()
