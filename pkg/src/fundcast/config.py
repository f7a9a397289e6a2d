"""Run configuration: one JSON file, full defaulting, strict fields.

The file is the source of truth for an experiment; command-line flags
override individual values. Unknown keys are rejected by name so typos
fail loudly instead of silently falling back to defaults.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .generator import GeneratorConfig


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass
class NetworkConfig:
    hidden_dim: int = 64
    head_hidden: int = 64
    static_proj: int = 16


@dataclass
class WeightConfig:
    past_error: float = 100.0
    monotonic: float = 1.0
    termination: float = 1.0
    gamma: float = 0.95


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class EpsilonConfig:
    start: float = 0.5
    floor: float = 0.05
    decay: float = 0.995


@dataclass
class PathConfig:
    dataset: str = "campaigns.jsonl"
    checkpoint: str = "checkpoint.json"
    train_log: str = "training_log.csv"
    report_dir: str = "reports"


@dataclass
class RunConfig:
    seed: int = 0
    mode: str = "options"
    options: int = 2
    horizons: list = field(default_factory=lambda: [6, 7, 8, 9, 10])
    eval_horizon: int = 6
    epochs: int = 60
    batch_size: int = 8
    replay_capacity: int = 500
    target_mix: float = 0.01
    rollouts_per_epoch: int = 100
    updates_per_epoch: int = 25
    grad_clip: float = 10.0
    test_fraction: float = 0.1
    reward_sigma: float = 0.1
    reward_ma_window: int = 1
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    network: NetworkConfig = field(default_factory=NetworkConfig)
    weights: WeightConfig = field(default_factory=WeightConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epsilon: EpsilonConfig = field(default_factory=EpsilonConfig)
    paths: PathConfig = field(default_factory=PathConfig)

    def validate(self):
        if self.mode not in ("tc3", "options"):
            raise ConfigError(f"mode: must be 'tc3' or 'options', got {self.mode!r}")
        if self.options < 1:
            raise ConfigError(f"options: must be >= 1, got {self.options}")
        if self.mode == "tc3" and self.options != 1:
            raise ConfigError(f"options: tc3 mode requires options=1, got {self.options}")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ConfigError(f"horizons: need positive day counts, got {self.horizons}")
        if self.eval_horizon < 1:
            raise ConfigError(f"eval_horizon: must be >= 1, got {self.eval_horizon}")
        if self.epochs < 1:
            raise ConfigError(f"epochs: must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size: must be >= 1, got {self.batch_size}")
        if self.replay_capacity < 1:
            raise ConfigError(f"replay_capacity: must be >= 1, got {self.replay_capacity}")
        if not 0.0 < self.target_mix <= 1.0:
            raise ConfigError(f"target_mix: must be in (0, 1], got {self.target_mix}")
        if self.rollouts_per_epoch < 1 or self.updates_per_epoch < 0:
            raise ConfigError("rollouts_per_epoch / updates_per_epoch out of range")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction: must be in [0, 1), got {self.test_fraction}")
        if self.reward_sigma <= 0:
            raise ConfigError(f"reward_sigma: must be positive, got {self.reward_sigma}")
        if self.reward_ma_window < 1:
            raise ConfigError(f"reward_ma_window: must be >= 1, got {self.reward_ma_window}")
        try:
            self.generator.validate()
        except ValueError as exc:
            raise ConfigError(f"generator: {exc}") from exc
        return self


_SECTIONS = {
    "generator": GeneratorConfig,
    "network": NetworkConfig,
    "weights": WeightConfig,
    "optimizer": OptimizerConfig,
    "epsilon": EpsilonConfig,
    "paths": PathConfig,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{where}: unknown config field {sorted(unknown)[0]!r}")
    return data


def config_from_dict(data):
    data = dict(_build(RunConfig, data, "config"))
    kwargs = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            section = _build(cls, data.pop(name), name)
            kwargs[name] = cls(**section)
    kwargs.update(data)
    cfg = RunConfig(**kwargs)
    return cfg.validate()


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)


def save_config(path, cfg):
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2)
