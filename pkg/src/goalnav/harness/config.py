"""Run configuration: dataclass schema, YAML loading, strict validation.

Every run directory gets the fully-resolved config written back out, so a
run is reproducible from (config.yaml, seed, code version) alone.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..backbone import BackboneConfig
from ..gridsim.world import RewardConfig
from ..model import ModelConfig
from ..policy import PpoConfig

ABLATION_KEYS = {"sca_spatial", "sca_channel", "wdm_a", "wdm_x", "wdm_b"}


class ConfigError(ValueError):
    pass


@dataclass
class MapConfig:
    size: int = 9
    n_rooms: int = 2
    n_objects_min: int = 1
    n_objects_max: int = 3
    success_threshold: int = 1
    max_episode_steps: int = 100
    reward: RewardConfig = field(default_factory=RewardConfig)


@dataclass
class RunConfig:
    seed: int = 0
    total_steps: int = 2_000_000
    num_envs: int = 128
    rollout_len: int = 125
    out_dir: str = "runs/default"
    eval_every: int = 250_000
    eval_episodes: int = 20
    final_eval_episodes: int = 100
    heldout_seed_base: int = 10_000_000
    rolling_window: int = 100
    torch_threads: int = 0  # 0 = leave torch defaults
    map: MapConfig = field(default_factory=MapConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)

    def validate(self):
        if self.rollout_len < 1 or self.num_envs < 1:
            raise ConfigError("rollout_len and num_envs must be positive")
        if self.total_steps % (self.rollout_len * self.num_envs):
            raise ConfigError(
                f"total_steps ({self.total_steps}) must be a multiple of "
                f"rollout_len * num_envs ({self.rollout_len * self.num_envs})")
        if self.ppo.minibatches > self.num_envs:
            raise ConfigError("more minibatches than environments")
        if self.map.n_objects_min < 1 or self.map.n_objects_min > self.map.n_objects_max:
            raise ConfigError("need 1 <= n_objects_min <= n_objects_max")
        if self.map.size < 5:
            raise ConfigError("map size must be >= 5")
        bad = set(self.model.backbone.ablation) - ABLATION_KEYS
        if bad:
            raise ConfigError(f"unknown ablation flags: {sorted(bad)}")
        self.model.backbone.validate()
        return self


def _coerce(value, ftype, path):
    if dataclasses.is_dataclass(ftype):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected mapping, got {type(value).__name__}")
        return _from_dict(ftype, value, path)
    if ftype is tuple or getattr(ftype, "__origin__", None) is tuple:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{path}: expected list")
        return tuple(value)
    if ftype is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected bool, got {value!r}")
        return value
    if ftype is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected int, got {value!r}")
        return value
    if ftype is float:
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ConfigError(f"{path}: expected number, got {value!r}")
        return float(value)
    if ftype is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected string, got {value!r}")
        return value
    if ftype is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected mapping")
        return dict(value)
    return value


def _from_dict(cls, data, path=""):
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(
            f"{path or cls.__name__}: unknown keys {sorted(unknown)}; "
            f"valid keys: {sorted(known)}")
    kwargs = {}
    for name, value in data.items():
        f = known[name]
        ftype = f.type if not isinstance(f.type, str) else _resolve_type(cls, f.name)
        kwargs[name] = _coerce(value, ftype, f"{path}.{name}" if path else name)
    return cls(**kwargs)


def _resolve_type(cls, name):
    # dataclass field types may be strings under `from __future__ import annotations`
    import typing
    hints = typing.get_type_hints(cls)
    return hints[name]


def _to_dict(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return list(obj)
    if isinstance(obj, dict):
        return {k: _to_dict(v) for k, v in obj.items()}
    return obj


def config_to_dict(cfg):
    return _to_dict(cfg)


def config_from_dict(data):
    return _from_dict(RunConfig, data).validate()


def load_config(path):
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def save_config(cfg, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(cfg), f, sort_keys=False)


def smoke_config(seed=0, out_dir="runs/smoke", total_steps=2_000_000):
    """Desk-scale training config: tiny maps, small model, fast to train.

    Wall-clock-driven deviations from the library defaults: one fusion
    insertion point and a 2-epoch / 2-minibatch PPO schedule.
    """
    backbone = BackboneConfig(resolution=32, widths=(8, 16, 32, 64),
                              feat_dim=128, fusion_points=(3,))
    model = ModelConfig(backbone=backbone, sg_gcn_dims=(64, 32, 16),
                        sg_slot_hidden=16, sg_slot_dim=8, gru_hidden=128)
    run = RunConfig(seed=seed, total_steps=total_steps, num_envs=128,
                    rollout_len=25, out_dir=out_dir,
                    map=MapConfig(size=6, n_rooms=1, n_objects_min=1,
                                  n_objects_max=3),
                    model=model,
                    ppo=PpoConfig(epochs=2, minibatches=2, learning_rate=7e-4))
    return run.validate()
