"""Model/training configuration, flat TOML loading, and config hashing.

The config file is a flat key-value TOML document; every key must name a
field of ``ModelConfig`` or ``TrainConfig`` and unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError

ABLATIONS = ("no_graph", "no_multi_scale", "no_strip_vit", "no_ftc")


@dataclass
class ModelConfig:
    """Architecture hyperparameters plus ablation switches."""

    lookback: int = 96
    horizon: int = 96
    n_vars: int = 1
    d_model: int = 32
    patch_len: int = 16
    patch_stride: int = 8
    n_experts: int = 4
    top_k: int = 2
    n_blocks: int = 2
    ftc_blocks: tuple[int, ...] | None = None  # None = every block carries FTC experts
    alpha_init: float = 0.5
    freq_dim: int | None = None  # None = d_model // 2
    n_heads: int = 1
    router_shares_expert_ftc: bool = False
    image_depth: int = 2
    chart_height: int = 64
    past_window: int = 2
    future_window: int = 2
    graph_layers: int = 2
    head_scales: tuple[int, ...] = (30, 50, 100)
    weight_mlp_hidden: int = 32
    rms_eps: float = 1e-6
    ablation: tuple[str, ...] = ()

    @property
    def n_patches(self) -> int:
        return (self.lookback - self.patch_len) // self.patch_stride + 1

    @property
    def freq_width(self) -> int:
        return self.freq_dim if self.freq_dim is not None else self.d_model // 2

    def ftc_block_set(self) -> frozenset[int]:
        if "no_ftc" in self.ablation:
            return frozenset()
        if self.ftc_blocks is None:
            return frozenset(range(self.n_blocks))
        return frozenset(self.ftc_blocks)

    def validate(self) -> None:
        if self.lookback < 1 or self.horizon < 1:
            raise ConfigError("lookback and horizon must be >= 1")
        if self.n_vars < 1:
            raise ConfigError("n_vars must be >= 1")
        if self.patch_len < 1 or self.patch_stride < 1:
            raise ConfigError("patch_len and patch_stride must be >= 1")
        if self.patch_len > self.lookback:
            raise ConfigError(f"patch_len {self.patch_len} exceeds lookback {self.lookback}")
        if (self.lookback - self.patch_len) % self.patch_stride != 0:
            raise ConfigError(
                f"(lookback - patch_len) = {self.lookback - self.patch_len} "
                f"not divisible by patch_stride {self.patch_stride}")
        if not 1 <= self.top_k <= self.n_experts:
            raise ConfigError(f"top_k {self.top_k} outside [1, {self.n_experts}]")
        if self.n_blocks < 0:
            raise ConfigError("n_blocks must be >= 0")
        if self.ftc_blocks is not None:
            bad = [b for b in self.ftc_blocks if not 0 <= b < self.n_blocks]
            if bad:
                raise ConfigError(f"ftc_blocks {bad} outside [0, {self.n_blocks})")
        if not 0.0 < self.alpha_init < 1.0:
            raise ConfigError("alpha_init must lie in (0, 1)")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.chart_height < 2:
            raise ConfigError("chart_height must be >= 2")
        if self.past_window < 0 or self.future_window < 0 or self.graph_layers < 0:
            raise ConfigError("graph windows and layers must be >= 0")
        if len(self.head_scales) != 3:
            raise ConfigError("head_scales must list exactly three per-iteration horizons")
        if any(s < 1 for s in self.head_scales):
            raise ConfigError("head_scales entries must be >= 1")
        if self.weight_mlp_hidden < 1:
            raise ConfigError("weight_mlp_hidden must be >= 1")
        unknown = [a for a in self.ablation if a not in ABLATIONS]
        if unknown:
            raise ConfigError(f"unknown ablation flags {unknown}; valid: {list(ABLATIONS)}")


@dataclass
class TrainConfig:
    """Optimization protocol: Adam with per-epoch halving and early stopping."""

    batch_size: int = 32
    max_epochs: int = 10
    initial_lr: float = 1e-3
    lr_halving: bool = True
    early_stop_patience: int = 3
    seed: int = 0
    few_shot_fraction: float | None = None
    train_ratio: float = 0.7
    val_ratio: float = 0.1
    window_stride: int = 1

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be >= 1")
        if self.initial_lr <= 0:
            raise ConfigError("initial_lr must be positive")
        if self.early_stop_patience < 1:
            raise ConfigError("early_stop_patience must be >= 1")
        if self.few_shot_fraction is not None and not 0.0 < self.few_shot_fraction <= 1.0:
            raise ConfigError("few_shot_fraction must lie in (0, 1]")
        if not 0.0 < self.train_ratio < 1.0 or not 0.0 <= self.val_ratio < 1.0:
            raise ConfigError("split ratios must lie in (0, 1)")
        if self.train_ratio + self.val_ratio >= 1.0:
            raise ConfigError("train_ratio + val_ratio must leave room for a test split")
        if self.window_stride < 1:
            raise ConfigError("window_stride must be >= 1")


_MODEL_FIELDS = {f.name: f for f in dataclasses.fields(ModelConfig)}
_TRAIN_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_TUPLE_FIELDS = {"ftc_blocks", "head_scales", "ablation"}


def configs_from_dict(raw: dict) -> tuple[ModelConfig, TrainConfig]:
    model_kwargs, train_kwargs = {}, {}
    for key, value in raw.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        if key in _MODEL_FIELDS:
            model_kwargs[key] = value
        elif key in _TRAIN_FIELDS:
            train_kwargs[key] = value
        else:
            raise ConfigError(f"unknown config key: {key!r}")
    try:
        model_cfg = ModelConfig(**model_kwargs)
        train_cfg = TrainConfig(**train_kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    model_cfg.validate()
    train_cfg.validate()
    return model_cfg, train_cfg


def load_config(path) -> tuple[ModelConfig, TrainConfig]:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}") from exc
    for key, value in raw.items():
        if isinstance(value, dict):
            raise ConfigError(f"config must be flat key-value; found table {key!r}")
    return configs_from_dict(raw)


def config_dict(model_cfg: ModelConfig, train_cfg: TrainConfig | None = None) -> dict:
    out = dataclasses.asdict(model_cfg)
    if train_cfg is not None:
        out.update(dataclasses.asdict(train_cfg))
    return out


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig | None = None) -> str:
    canonical = json.dumps(config_dict(model_cfg, train_cfg), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()
