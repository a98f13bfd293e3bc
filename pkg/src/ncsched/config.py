"""Experiment configuration: schema, validation, hashing, packaged benchmarks.

Config files are YAML with this layout (matrices are row-major nested
arrays; every matrix field of a subsystem is required):

    name: experiment1
    env:
      channels: 1              # M, the number of shared channels
      horizon: 500             # T, stages per episode/epoch
      reward_mode: error_penalty   # or full_cost
      subsystems:              # N entries, each a full loop definition
        - name: loop1
          A: [[1.2, 1.0], [0.0, 0.8]]
          B: [[0.0], [1.0]]
          C: [[1.0, 0.0]]
          W: [[0.01, 0.0], [0.0, 0.01]]
          V: [[0.01]]
          x0_mean: [0.0, 0.0]
          X0: [[0.1, 0.0], [0.0, 0.1]]
          Q: [[1.0, 0.0], [0.0, 1.0]]
          R: [[1.0]]
          Qf: [[1.0, 0.0], [0.0, 1.0]]
    dqn:                       # all optional, defaults below
      hidden_units: 1024
      replay_capacity: 20000
      minibatch_size: 32
      warmup_transitions: 1000
      discount: 0.95
      learning_rate: 1.0e-4
      lr_decay: 0.001          # lr(epoch) = learning_rate / (1 + lr_decay * epoch)
      epsilon_rate: 0.9        # epsilon(epoch) = max(floor, rate^epoch)
      epsilon_floor: 0.001
    training:
      epochs: 200
      monte_carlo_runs: 30
      checkpoint_every: 0      # 0 = final checkpoint only
      master_seed: 20260810
    output_dir: runs/experiment1   # optional; NCSCHED_OUTPUT_DIR overrides

`load_experiment` accepts a filesystem path or the name of a packaged
benchmark (experiment1, experiment2, experiment3).
"""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .env import REWARD_MODES, EnvConfig
from .errors import ConfigError
from .plants import SubsystemSpec

PACKAGED_CONFIGS = ("experiment1", "experiment2", "experiment3")

_REQUIRED = object()


def _fetch(section, key, path, kind=None, default=_REQUIRED):
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected a mapping")
    if key not in section:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = section[key]
    if value is None and default is not _REQUIRED:
        return default
    if kind is int and isinstance(value, bool):
        raise ConfigError(f"{path}.{key}: expected an integer, got a boolean")
    if kind is int and not isinstance(value, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {type(value).__name__}")
    if kind is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}.{key}: expected a number, got {type(value).__name__}")
        value = float(value)
    if kind is str and not isinstance(value, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {type(value).__name__}")
    return value


@dataclass(eq=False)
class DqnConfig:
    hidden_units: int = 1024
    replay_capacity: int = 20_000
    minibatch_size: int = 32
    warmup_transitions: int = 1_000
    discount: float = 0.95
    learning_rate: float = 1e-4
    lr_decay: float = 0.001
    epsilon_rate: float = 0.9
    epsilon_floor: float = 0.001
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if not 0.0 < self.discount < 1.0:
            raise ConfigError(f"dqn.discount: must be in (0, 1), got {self.discount}")
        if self.hidden_units < 1:
            raise ConfigError(f"dqn.hidden_units: must be >= 1, got {self.hidden_units}")
        if self.minibatch_size < 1:
            raise ConfigError(f"dqn.minibatch_size: must be >= 1, got {self.minibatch_size}")
        if self.replay_capacity < self.minibatch_size:
            raise ConfigError(
                "dqn.replay_capacity: must be >= dqn.minibatch_size, got "
                f"{self.replay_capacity} < {self.minibatch_size}"
            )
        if self.warmup_transitions < self.minibatch_size:
            raise ConfigError(
                "dqn.warmup_transitions: must be >= dqn.minibatch_size, got "
                f"{self.warmup_transitions}"
            )
        if self.learning_rate <= 0.0:
            raise ConfigError(f"dqn.learning_rate: must be > 0, got {self.learning_rate}")
        if self.lr_decay < 0.0:
            raise ConfigError(f"dqn.lr_decay: must be >= 0, got {self.lr_decay}")
        if not 0.0 < self.epsilon_rate < 1.0:
            raise ConfigError(f"dqn.epsilon_rate: must be in (0, 1), got {self.epsilon_rate}")
        if not 0.0 <= self.epsilon_floor <= 1.0:
            raise ConfigError(f"dqn.epsilon_floor: must be in [0, 1], got {self.epsilon_floor}")


@dataclass(eq=False)
class ExperimentConfig:
    name: str
    env: EnvConfig
    dqn: DqnConfig
    epochs: int
    monte_carlo_runs: int
    master_seed: int
    checkpoint_every: int = 0
    output_dir: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"training.epochs: must be >= 1, got {self.epochs}")
        if self.monte_carlo_runs < 1:
            raise ConfigError(
                f"training.monte_carlo_runs: must be >= 1, got {self.monte_carlo_runs}"
            )
        if self.checkpoint_every < 0:
            raise ConfigError(
                f"training.checkpoint_every: must be >= 0, got {self.checkpoint_every}"
            )
        if self.master_seed < 0:
            raise ConfigError(f"training.master_seed: must be >= 0, got {self.master_seed}")


_SPEC_MATRIX_FIELDS = ("A", "B", "C", "W", "V", "X0", "Q", "R", "Qf")


def subsystem_from_dict(data, path):
    kwargs = {"name": _fetch(data, "name", path, str, default="")}
    for key in _SPEC_MATRIX_FIELDS:
        kwargs[key] = _fetch(data, key, path)
    kwargs["x0_mean"] = _fetch(data, "x0_mean", path)
    try:
        return SubsystemSpec(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def env_from_dict(data, path="env"):
    subs = _fetch(data, "subsystems", path)
    if not isinstance(subs, list) or not subs:
        raise ConfigError(f"{path}.subsystems: expected a non-empty list")
    specs = [
        subsystem_from_dict(entry, f"{path}.subsystems[{i}]") for i, entry in enumerate(subs)
    ]
    reward_mode = _fetch(data, "reward_mode", path, str, default="error_penalty")
    if reward_mode not in REWARD_MODES:
        raise ConfigError(
            f"{path}.reward_mode: expected one of {REWARD_MODES}, got {reward_mode!r}"
        )
    return EnvConfig(
        specs=tuple(specs),
        n_channels=_fetch(data, "channels", path, int),
        horizon=_fetch(data, "horizon", path, int),
        reward_mode=reward_mode,
    )


def dqn_from_dict(data, path="dqn"):
    if data is None:
        data = {}
    defaults = DqnConfig()
    kwargs = {}
    for name in (
        "hidden_units",
        "replay_capacity",
        "minibatch_size",
        "warmup_transitions",
    ):
        kwargs[name] = _fetch(data, name, path, int, default=getattr(defaults, name))
    for name in (
        "discount",
        "learning_rate",
        "lr_decay",
        "epsilon_rate",
        "epsilon_floor",
        "adam_beta1",
        "adam_beta2",
        "adam_eps",
    ):
        kwargs[name] = _fetch(data, name, path, float, default=getattr(defaults, name))
    return DqnConfig(**kwargs)


def experiment_from_dict(data, source="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    env = env_from_dict(_fetch(data, "env", source), "env")
    dqn_cfg = dqn_from_dict(data.get("dqn"), "dqn")
    training = _fetch(data, "training", source)
    return ExperimentConfig(
        name=_fetch(data, "name", source, str, default="experiment"),
        env=env,
        dqn=dqn_cfg,
        epochs=_fetch(training, "epochs", "training", int),
        monte_carlo_runs=_fetch(training, "monte_carlo_runs", "training", int, default=30),
        master_seed=_fetch(training, "master_seed", "training", int),
        checkpoint_every=_fetch(training, "checkpoint_every", "training", int, default=0),
        output_dir=_fetch(data, "output_dir", source, str, default=None),
    )


def experiment_to_dict(cfg):
    """Canonical dict form (used for hashing and the run manifest)."""
    return {
        "name": cfg.name,
        "env": {
            "channels": cfg.env.n_channels,
            "horizon": cfg.env.horizon,
            "reward_mode": cfg.env.reward_mode,
            "subsystems": [
                {
                    "name": spec.name,
                    **{key: getattr(spec, key).tolist() for key in _SPEC_MATRIX_FIELDS},
                    "x0_mean": spec.x0_mean.tolist(),
                }
                for spec in cfg.env.specs
            ],
        },
        "dqn": {
            name: getattr(cfg.dqn, name)
            for name in (
                "hidden_units",
                "replay_capacity",
                "minibatch_size",
                "warmup_transitions",
                "discount",
                "learning_rate",
                "lr_decay",
                "epsilon_rate",
                "epsilon_floor",
                "adam_beta1",
                "adam_beta2",
                "adam_eps",
            )
        },
        "training": {
            "epochs": cfg.epochs,
            "monte_carlo_runs": cfg.monte_carlo_runs,
            "checkpoint_every": cfg.checkpoint_every,
            "master_seed": cfg.master_seed,
        },
        "output_dir": cfg.output_dir,
    }


def config_hash(cfg):
    canonical = json.dumps(experiment_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def apply_overrides(data, overrides):
    """Apply `path.to.field=value` overrides (values parsed as YAML)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r}: expected key.path=value")
        dotted, raw = item.split("=", 1)
        keys = dotted.strip().split(".")
        target = data
        for key in keys[:-1]:
            nxt = target.setdefault(key, {})
            if not isinstance(nxt, dict):
                raise ConfigError(f"override {item!r}: {key} is not a mapping")
            target = nxt
        target[keys[-1]] = yaml.safe_load(raw)
    return data


def load_experiment(path_or_name, overrides=()):
    """Load a config from a YAML file path or a packaged benchmark name."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text()
        source = str(path)
    elif str(path_or_name) in PACKAGED_CONFIGS:
        text = (
            resources.files("ncsched").joinpath(f"configs/{path_or_name}.yaml").read_text()
        )
        source = f"packaged:{path_or_name}"
    else:
        raise ConfigError(
            f"config {path_or_name!r}: no such file and not one of the packaged "
            f"benchmarks {PACKAGED_CONFIGS}"
        )
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML ({exc})") from exc
    if overrides:
        data = apply_overrides(data, overrides)
    return experiment_from_dict(data, source)
