"""Layered run configuration: defaults, optional JSON file, CLI overrides.

Every tunable lives in a dataclass section; unknown keys are rejected with
the offending name so typos fail loudly instead of silently running the
defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .ddpg import AgentConfig
from .environment import EnvParams
from .errors import ConfigError


@dataclass
class TrainingParams:
    total_steps: int = 50_000
    max_stage_steps: int = 15_000   # force-promotion budget per stage
    updates_per_step: int = 2       # gradient updates per environment step
    eval_every: int = 50            # episodes between eval snapshots
    flush_buffer_on_stage: bool = True
    checkpoint_name: str = "policy"


@dataclass
class EstimationParams:
    rate: float = 50.0
    window: float = 2.0
    hidden_sizes: tuple[int, ...] = (64, 32)
    head_sizes: tuple[int, ...] = (16,)
    lr: float = 2e-3
    epochs: int = 12
    batch_size: int = 128
    val_fraction: float = 0.1
    dataset_n: int = 20_000
    slip_bias: float = 0.8

    def regressor_kwargs(self, seed: int) -> dict:
        return {
            "hidden_sizes": tuple(self.hidden_sizes),
            "head_sizes": tuple(self.head_sizes),
            "rate": self.rate,
            "window": self.window,
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "val_fraction": self.val_fraction,
            "seed": seed,
        }


@dataclass
class HarnessParams:
    surfaces: tuple[float, ...] = (0.16, 0.24, 0.32)
    mu_e_grid: tuple[float, float, float] = (0.04, 0.32, 0.02)  # lo, hi, step
    distances: tuple[float, float, float] = (0.02, 0.2, 0.02)
    offsets: tuple[float, ...] = (-0.05, 0.0, 0.05)
    estimator_offsets: tuple[float, ...] = (0.07, 0.09, 0.11, 0.13, 0.15)
    deadzone_m: float = 0.001
    closed_loop_episodes: int = 20
    closed_loop_mu_k: float = 0.24
    closed_loop_mu_e: float = 0.13


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs"
    agent: AgentConfig = field(default_factory=AgentConfig)
    env: EnvParams = field(default_factory=EnvParams)
    training: TrainingParams = field(default_factory=TrainingParams)
    estimation: EstimationParams = field(default_factory=EstimationParams)
    harness: HarnessParams = field(default_factory=HarnessParams)


_SECTIONS = {
    "agent": AgentConfig,
    "env": EnvParams,
    "training": TrainingParams,
    "estimation": EstimationParams,
    "harness": HarnessParams,
}


def _fill_dataclass(cls, data: dict, path: str):
    names = {f.name: f for f in dataclasses.fields(cls)}
    obj = cls()
    for key, value in data.items():
        if key not in names:
            raise ConfigError(f"unknown config key {path}{key!r}")
        current = getattr(obj, key)
        if isinstance(current, tuple) and isinstance(value, (list, tuple)):
            value = tuple(value)
        setattr(obj, key, value)
    return obj


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    cfg = RunConfig()
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            setattr(cfg, key, _fill_dataclass(_SECTIONS[key], value, f"{key}."))
        elif key in ("seed", "out_dir"):
            setattr(cfg, key, value)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    def plain(value):
        if isinstance(value, tuple):
            return [plain(v) for v in value]
        return value

    out = {"seed": cfg.seed, "out_dir": cfg.out_dir}
    for section, _ in _SECTIONS.items():
        out[section] = {k: plain(v) for k, v in dataclasses.asdict(getattr(cfg, section)).items()}
    return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file (if any), then explicit overrides."""
    data: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if overrides:
        for dotted, value in overrides.items():
            node = data
            *parents, leaf = dotted.split(".")
            for p in parents:
                node = node.setdefault(p, {})
            node[leaf] = value
    return config_from_dict(data)


def print_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), indent=2, sort_keys=True)
