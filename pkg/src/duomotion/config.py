"""Run configuration: nested key/value config with strict key checking.

Unknown keys in a config file are a hard error so typos never silently
fall back to defaults. The fingerprint (hash of the canonical dict form)
ties checkpoints to the configuration that produced them.
"""
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml


@dataclass
class ModelConfig:
    latent_dim: int = 64
    text_dim: int = 64
    stage1_layers: int = 2
    graph_layers: int = 2
    stage3_layers: int = 3
    segment_count: int = 3
    lambda_stage2: float = 0.1
    lambda_stage3: float = 0.1
    share_person_weights: bool = False
    graph_mask_mode: str = "hadamard"
    pe_scale: float = 6.0


@dataclass
class DiffusionConfig:
    timesteps: int = 1000
    beta_start: float = 0.0001
    beta_end: float = 0.02
    guidance_scale: float = 1.8
    sample_steps: int = 50  # strided sampling steps; set to timesteps for full


@dataclass
class TrainConfig:
    steps: int = 20000
    batch_size: int = 8
    lr_start: float = 0.0002
    lr_end: float = 0.00002
    lambda_distance: float = 0.5
    condition_dropout: float = 0.1
    grad_clip: float = 1.0
    seed: int = 0
    checkpoint_every: int = 5000
    normalize_features: bool = True
    num_threads: int = 1  # tiny tensors: intra-op threading costs more than it saves


@dataclass
class DataConfig:
    joint_count: int = 5
    frame_count: int = 60
    fps: float = 20.0


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    diffusion: DiffusionConfig = field(default_factory=DiffusionConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def validate(self) -> "RunConfig":
        m, d, t, dd = self.model, self.diffusion, self.train, self.data
        if dd.joint_count < 1:
            raise ValueError("data.joint_count must be >= 1")
        if dd.frame_count < 1:
            raise ValueError("data.frame_count must be >= 1")
        if not 1 <= m.segment_count <= dd.frame_count:
            raise ValueError("model.segment_count must be in [1, frame_count]")
        if min(m.stage1_layers, m.graph_layers, m.stage3_layers) < 1:
            raise ValueError("layer counts must be >= 1")
        if m.graph_mask_mode not in ("hadamard", "matmul"):
            raise ValueError(f"unknown graph_mask_mode {m.graph_mask_mode!r}")
        if m.pe_scale <= 0:
            raise ValueError("model.pe_scale must be positive")
        if d.timesteps < 1:
            raise ValueError("diffusion.timesteps must be >= 1")
        if not (0.0 < d.beta_start <= d.beta_end < 1.0):
            raise ValueError("need 0 < beta_start <= beta_end < 1")
        if d.guidance_scale < 0:
            raise ValueError("guidance_scale must be >= 0")
        if not 1 <= d.sample_steps <= d.timesteps:
            raise ValueError("sample_steps must be in [1, timesteps]")
        if t.lambda_distance < 0:
            raise ValueError("lambda_distance must be >= 0")
        if not 0.0 <= t.condition_dropout <= 1.0:
            raise ValueError("condition_dropout must be in [0, 1]")
        if t.steps < 1 or t.batch_size < 1:
            raise ValueError("train.steps and train.batch_size must be >= 1")
        if t.lr_start <= 0 or t.lr_end <= 0:
            raise ValueError("learning rates must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _from_mapping(cls, mapping: dict, path: str):
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(mapping) - set(fields)
    if unknown:
        raise ValueError(f"unknown config key(s) at {path}: {sorted(unknown)}")
    kwargs = {}
    for name, value in mapping.items():
        f = fields[name]
        if dataclasses.is_dataclass(f.type):
            if not isinstance(value, dict):
                raise ValueError(f"{path}.{name} must be a mapping")
            kwargs[name] = _from_mapping(f.type, value, f"{path}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(mapping: dict) -> RunConfig:
    if not isinstance(mapping, dict):
        raise ValueError("config root must be a mapping")
    return _from_mapping(RunConfig, mapping, "config").validate()


def load_config(path: str | Path) -> RunConfig:
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if raw is None:
        raw = {}
    return config_from_dict(raw)


def save_config(path: str | Path, config: RunConfig) -> None:
    Path(path).write_text(
        yaml.safe_dump(config.to_dict(), sort_keys=True), encoding="utf-8"
    )
