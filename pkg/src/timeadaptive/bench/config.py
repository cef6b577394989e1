"""Declarative experiment configuration, read from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

TASKS = ("lorenz_sweep", "mg_sweep", "classify", "predict")
VALIDATION = ("holdout", "temporal_cv")
FAMILIES = ("reservoir", "gated")

DEFAULT_RESERVOIR_GRID = {
    "alpha": [round(0.1 * k, 1) for k in range(1, 11)],
    "radius": [round(0.6 + 0.1 * k, 1) for k in range(9)],
    "lambda": [10.0 ** -k for k in range(8, 1, -1)],
    "input_scaling": [0.1, 0.5, 1.0],
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """One experiment: task, model family, search grid, validation and seeds.

    ``options`` carries task-specific settings (sizes, horizons, epochs);
    each runner documents the keys it reads and fills in defaults.
    """

    task: str
    family: str = "reservoir"
    variant: str = "taesn"
    transform: str = "linear"
    grid: dict = field(default_factory=lambda: dict(DEFAULT_RESERVOIR_GRID))
    validation: str = "holdout"
    seeds: list = field(default_factory=lambda: [0])
    data: dict = field(default_factory=dict)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.transform not in ("linear", "exp"):
            raise ConfigError(f"transform must be 'linear' or 'exp', got {self.transform!r}")
        if self.validation not in VALIDATION:
            raise ConfigError(f"validation must be one of {VALIDATION}, got {self.validation!r}")
        if not isinstance(self.grid, dict):
            raise ConfigError("grid must map axis names to lists")
        for k, v in self.grid.items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"grid axis {k!r} must be a non-empty list")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        self.seeds = [int(s) for s in self.seeds]

    def option(self, key, default):
        return self.options.get(key, default)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "task" not in d:
            raise ConfigError("config needs a 'task'")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(d)
