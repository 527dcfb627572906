"""Flat key=value run configuration with two profiles.

Effective values are resolved as profile defaults <- config file <- overrides;
`profile` itself may appear in either source and the override wins.
"""
import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from vinp.data.corrupt import CorruptionSpec
from vinp.enums import SHAPE_CATEGORIES, CorruptionKind, Precision, Profile, ShapeCategory, Stage, ViewDirection
from vinp.errors import ConfigError, ContractError
from vinp.nets.config import EDGanConfig, LrcnConfig


@dataclass(frozen=True)
class StageConfig:
    stage: Stage
    epochs: int
    lr: float
    batch: int
    lr_d: float = None


@dataclass(frozen=True)
class TrainConfig:
    """Field defaults are the desk profile.

    Desk learning rates sit well above the full profile's (stage 1a 1e-3
    against 1e-5, stage 2 1e-3 against 1e-4) so the small networks converge
    within a few epochs; `profile=full` restores the original settings.
    """
    profile: Profile = Profile.DESK
    seed: int = 0
    precision: Precision = Precision.FLOAT32

    d_l: int = 16
    d_h: int = 64
    c: int = 5
    channels: tuple[int, ...] = (8, 16, 32)
    lrcn_channels: tuple[int, ...] = (8, 16, 32)
    feature_dim: int = 200
    hidden_dim: int = 200
    seed_channels: int = 8
    mid_channels: int = 4
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    alpha1: float = 0.001
    alpha2: float = 0.999
    alpha3: float = 0.5
    alpha4: float = 0.5
    gate_threshold: float = 0.8
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    threshold: float = 0.5

    stage1a_epochs: int = 20
    stage1a_lr: float = 1e-3
    stage1a_batch: int = 4
    stage1b_epochs: int = 30
    stage1b_lr: float = 1e-3
    stage1b_lr_d: float = 1e-5
    stage1b_batch: int = 4
    stage2_epochs: int = 30
    stage2_lr: float = 1e-3
    stage2_batch: int = 4
    stage3_epochs: int = 10
    stage3_lr: float = 1e-4
    stage3_lr_d: float = 1e-5
    stage3_batch: int = 1
    ablation_epochs: int = 30
    ablation_lr: float = 1e-4
    ablation_batch: int = 4

    n_samples: int = 100
    categories: tuple[ShapeCategory, ...] = tuple(SHAPE_CATEGORIES)
    corruption: CorruptionKind = CorruptionKind.SINGLE_VIEW_SCAN
    noise_fraction: float = 0.5
    view_direction: ViewDirection = ViewDirection.POS_X
    data_seed: int = 0
    split_seed: int = 0
    noise_fractions: tuple[float, ...] = (0.0, 0.2, 0.4, 0.6)
    gammas: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    probe_per_category: int = 40
    probe_seed: int = 0

    def __post_init__(self):
        if not np.isclose(self.alpha1 + self.alpha2, 1.0, rtol=0, atol=1e-9):
            raise ConfigError(f"alpha1 + alpha2 must be 1, got {self.alpha1 + self.alpha2}", key="alpha1")
        for f in dataclasses.fields(self):
            if f.name.endswith(("_lr", "_lr_d")) and getattr(self, f.name) <= 0:
                raise ConfigError("learning rate must be positive", key=f.name)
            if f.name.endswith(("_epochs", "_batch")) and getattr(self, f.name) < 1:
                raise ConfigError("must be >= 1", key=f.name)
        if not 0 < self.gate_threshold <= 1:
            raise ConfigError("must be in (0, 1]", key="gate_threshold")
        if not 0 < self.threshold < 1:
            raise ConfigError("must be in (0, 1)", key="threshold")
        if list(self.noise_fractions) != sorted(self.noise_fractions):
            raise ConfigError("must be ascending", key="noise_fractions")
        if any(not 0 <= g <= 1 for g in self.gammas):
            raise ConfigError("values must lie in [0, 1]", key="gammas")
        if not 0 <= self.noise_fraction <= 1:
            raise ConfigError("must be in [0, 1]", key="noise_fraction")

    @property
    def dtype(self):
        return np.float64 if self.precision == Precision.FLOAT64 else np.float32

    def edgan_config(self) -> EDGanConfig:
        try:
            return EDGanConfig(self.d_l, self.channels, self.bn_momentum, self.bn_eps)
        except ContractError as e:
            raise ConfigError(e.detail, key="d_l")

    def lrcn_config(self) -> LrcnConfig:
        try:
            return LrcnConfig(self.d_l, self.d_h, self.c, self.lrcn_channels, self.feature_dim, self.hidden_dim,
                              self.seed_channels, self.mid_channels, self.bn_momentum, self.bn_eps)
        except ContractError as e:
            raise ConfigError(e.detail, key="d_h")

    def stage(self, stage: Stage) -> StageConfig:
        stage = Stage(stage)
        prefix = {Stage.STAGE_1A: "stage1a", Stage.STAGE_1B: "stage1b", Stage.STAGE_2: "stage2",
                  Stage.STAGE_3: "stage3", Stage.ABLATION: "ablation"}[stage]
        return StageConfig(stage, getattr(self, f"{prefix}_epochs"), getattr(self, f"{prefix}_lr"),
                           getattr(self, f"{prefix}_batch"), getattr(self, f"{prefix}_lr_d", None))

    def corruption_spec(self) -> CorruptionSpec:
        return CorruptionSpec(self.corruption, self.noise_fraction, self.view_direction, self.data_seed)


PROFILES: dict[Profile, dict[str, object]] = {
    Profile.DESK: {},
    Profile.FULL: {
        "d_l": 32, "d_h": 128,
        "channels": (64, 128, 256), "lrcn_channels": (64, 128, 256),
        "seed_channels": 32, "mid_channels": 16,
        "stage1a_epochs": 20, "stage1a_lr": 1e-5,
        "stage1b_epochs": 100, "stage1b_lr": 1e-4, "stage1b_lr_d": 1e-6,
        "stage2_epochs": 100, "stage2_lr": 1e-4,
        "stage3_epochs": 20, "stage3_lr": 1e-6, "stage3_lr_d": 1e-7,
        "ablation_epochs": 100, "ablation_lr": 1e-5,
    },
}

_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}
_TUPLE_ITEM = {
    "channels": int, "lrcn_channels": int, "categories": ShapeCategory,
    "noise_fractions": float, "gammas": float,
}
_ENUMS = {
    "profile": Profile, "precision": Precision, "corruption": CorruptionKind, "view_direction": ViewDirection,
}


def _convert(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError("unknown key", key=key)
    raw = raw.strip()
    try:
        if key in _ENUMS:
            return _ENUMS[key](raw)
        if key in _TUPLE_ITEM:
            item = _TUPLE_ITEM[key]
            return tuple(item(v.strip()) for v in raw.split(",") if v.strip())
        kind = type(getattr(TrainConfig, key))
        if kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r}", key=key)


def parse_lines(text: str) -> dict[str, str]:
    """Reads key=value lines; `#` comments and blank lines are skipped.

    Raises:
        ConfigError: For a line without `=` (with its number) or an unknown key.
    """
    table = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key=value, got {body!r}", line=lineno)
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", key=key, line=lineno)
        table[key] = value
    return table


def parse_overrides(items: Sequence[str]) -> dict[str, str]:
    table = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError("unknown key", key=key)
        table[key] = value
    return table


def parse_config(path: str | Path = None, overrides: Mapping[str, str] | Sequence[str] = (),
                 text: str = None) -> TrainConfig:
    """Resolves the effective configuration.

    Args:
        path: Optional config file.
        overrides: `key=value` strings or a mapping, applied last.
        text: Config file contents, used instead of reading `path`.

    Raises:
        ConfigError: For an unreadable file, malformed line, unknown key,
            unparsable value or violated invariant.
    """
    if text is None and path is not None:
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"unreadable config file {path}: {e}")
    file_table = parse_lines(text or "")
    over = dict(overrides) if isinstance(overrides, Mapping) else parse_overrides(overrides)

    profile = _convert("profile", over.get("profile", file_table.get("profile", Profile.DESK.value)))
    values: dict[str, object] = dict(PROFILES[profile])
    for key, raw in list(file_table.items()) + list(over.items()):
        values[key] = _convert(key, raw)
    values["profile"] = profile
    config = TrainConfig(**values)
    logging.debug(f"vinp: effective config profile={profile.value} ({len(file_table)} file keys, {len(over)} overrides)")
    return config


def _format(value) -> str:
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: TrainConfig) -> str:
    """Serializes every key, sorted; `parse_config(text=dump_config(c))` reproduces `c`."""
    return "".join(f"{name}={_format(getattr(config, name))}\n" for name in sorted(_FIELDS))
