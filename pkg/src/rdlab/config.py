"""Flat ``key = value`` experiment configuration with dotted keys.

Example::

    experiment = gap-sweep
    source.name = gaussian
    source.variance = 1
    distortion.p = 2
    distortion.r = 2
    distortion.D = 0.1, 0.01, 0.001
    seed = 7
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

EXPERIMENTS = ("slb", "gap-sweep", "ba-curve", "quantize", "infodim", "lemma1",
               "pathological", "converse-check", "validate")

# Per-experiment defaults for keys outside source.* / distortion.*
DEFAULTS = {
    "slb": {},
    "gap-sweep": {"estimator.knn_samples": "100000", "estimator.k": "3"},
    "ba-curve": {"ba.n": "1024", "ba.m": "1024", "ba.tol": "1e-4", "ba.max_iter": "2000"},
    "quantize": {"quantize.delta": "0.1, 0.01, 0.001", "ba.n": "1024", "ba.tol": "1e-4",
                 "ba.max_iter": "2000"},
    "infodim": {"estimator.n": "1000000",
                "estimator.m_grid": ", ".join(str(2**k) for k in range(17))},
    "lemma1": {"estimator.n": "1000000", "estimator.eps": "1, 0.1, 0.01"},
    "pathological": {"estimator.M": "100, 1000, 10000, 100000, 1000000"},
    "converse-check": {"estimator.trials": "100", "estimator.points": "20"},
    "validate": {},
}

SOURCE_DEFAULTS = {
    "lemma1": "gaussian",
    "infodim": "gaussian",
    "pathological": "pathological",
}


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def parse_float(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity", "max"):
        return math.inf
    return float(t)


def parse_list(text: str) -> list:
    return [parse_float(t) for t in text.split(",") if t.strip()]


@dataclass
class ExperimentConfig:
    experiment: str
    source_name: str = "gaussian"
    source_params: dict = field(default_factory=dict)
    p: float = 2.0
    r: float = 2.0
    D_grid: list = field(default_factory=lambda: [0.1, 0.01, 0.001])
    settings: dict = field(default_factory=dict)  # remaining dotted keys, as text
    seed: int = 0

    def get(self, key: str, cast=str):
        text = self.settings.get(key, DEFAULTS.get(self.experiment, {}).get(key))
        if text is None:
            raise KeyError(key)
        return cast(text)

    def get_list(self, key: str) -> list:
        return self.get(key, parse_list)

    def to_items(self) -> list:
        """Canonical ``(key, value)`` pairs; parsing them back gives an equal config."""
        items = [("experiment", self.experiment), ("seed", str(self.seed)),
                 ("source.name", self.source_name)]
        items += [(f"source.{k}", _fmt(v)) for k, v in sorted(self.source_params.items())]
        items += [("distortion.p", _fmt(self.p)), ("distortion.r", _fmt(self.r)),
                  ("distortion.D", ", ".join(_fmt(D) for D in self.D_grid))]
        items += sorted(self.settings.items())
        return items

    def to_lines(self) -> list:
        return [f"{k} = {v}" for k, v in self.to_items()]


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def _coerce_param(text: str):
    try:
        v = float(text)
    except ValueError:
        return text
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


def parse_lines(lines, experiment: str | None = None, overrides: dict | None = None
                ) -> ExperimentConfig:
    raw = {}
    problems = []
    for no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {no}: expected 'key = value', got {line!r}")
            continue
        key, value = (t.strip() for t in line.split("=", 1))
        raw[key] = value
    raw.update(overrides or {})
    if experiment is not None:
        if "experiment" in raw and raw["experiment"] != experiment:
            problems.append(f"config experiment {raw['experiment']!r} does not match "
                            f"subcommand {experiment!r}")
        raw["experiment"] = experiment
    exp = raw.pop("experiment", None)
    if exp not in EXPERIMENTS:
        problems.append(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        raise ConfigError(problems)
    cfg = ExperimentConfig(exp, source_name=SOURCE_DEFAULTS.get(exp, "gaussian"))
    if "seed" in raw:
        try:
            cfg.seed = int(raw.pop("seed"))
            if not 0 <= cfg.seed < 2**64:
                problems.append("seed must be a 64-bit unsigned integer")
        except ValueError:
            problems.append("seed must be an integer")
    for key, value in raw.items():
        try:
            if key == "source.name":
                cfg.source_name = value
            elif key.startswith("source."):
                cfg.source_params[key[len("source."):]] = _coerce_param(value)
            elif key == "distortion.p":
                cfg.p = parse_float(value)
                if not cfg.p >= 1:
                    problems.append("distortion.p must be >= 1")
            elif key == "distortion.r":
                cfg.r = parse_float(value)
                if not cfg.r > 0:
                    problems.append("distortion.r must be positive")
            elif key == "distortion.D":
                cfg.D_grid = parse_list(value)
                if not cfg.D_grid or any(not D > 0 for D in cfg.D_grid):
                    problems.append("distortion.D must be a non-empty list of positive values")
            elif "." in key:
                cfg.settings[key] = value
            else:
                problems.append(f"unknown key {key!r}")
        except ValueError as exc:
            problems.append(f"{key}: {exc}")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, experiment=None, overrides=None) -> ExperimentConfig:
    lines = []
    if path is not None:
        with open(path) as fh:
            lines = fh.read().splitlines()
    return parse_lines(lines, experiment, overrides)


def config_from_csv(path) -> ExperimentConfig:
    """Recover the configuration echoed into a result file's metadata block."""
    lines = []
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# config: "):
                lines.append(line[len("# config: "):].rstrip("\n"))
    return parse_lines(lines)
