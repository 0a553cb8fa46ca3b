from __future__ import annotations

from dataclasses import dataclass, field, replace

from semicon.errors import ConfigError
from .enums import AttentionMode, Variant


@dataclass(frozen=True)
class StageConfig:
    m: int = 3
    alpha: float = 0.3
    std_floor: float = 1e-12
    mode: AttentionMode = AttentionMode.SEM
    erase_threshold: float = 0.5

    def validate(self) -> None:
        if self.m < 1:
            raise ConfigError(f"stage.m must be >= 1, got {self.m}")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"stage.alpha must lie in (0, 1], got {self.alpha}")
        if self.std_floor <= 0.0:
            raise ConfigError(f"stage.std_floor must be positive, got {self.std_floor}")
        if not 0.0 < self.erase_threshold <= 1.0:
            raise ConfigError(f"stage.erase_threshold must lie in (0, 1], got {self.erase_threshold}")


@dataclass(frozen=True)
class IconConfig:
    portions: int = 4
    delta: float = 1e-5
    grouped: bool = True

    def validate(self, channels: int | None = None) -> None:
        if self.portions < 1:
            raise ConfigError(f"icon.portions must be >= 1, got {self.portions}")
        if self.delta <= 0.0:
            raise ConfigError(f"icon.delta must be positive, got {self.delta}")
        if channels is not None and channels % self.portions != 0:
            raise ConfigError(
                f"icon.portions={self.portions} does not divide the channel count {channels}"
            )


@dataclass(frozen=True)
class ModelConfig:
    in_channels: int = 3
    hidden_channels: int = 8
    feature_channels: int = 16
    code_bits: int = 48
    variant: Variant = Variant.FULL

    def validate(self) -> None:
        for name in ("in_channels", "hidden_channels", "feature_channels", "code_bits"):
            if getattr(self, name) < 1:
                raise ConfigError(f"model.{name} must be >= 1, got {getattr(self, name)}")


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 1.0
    gamma: float = 200.0
    epochs: int = 30
    iterations: int = 40
    sample_size: int = 240
    batch_size: int = 16
    lr: float = 2.5e-4
    momentum: float = 0.91
    weight_decay: float = 1e-4
    soft_constraint: bool = False

    def validate(self) -> None:
        if self.beta <= 0.0 or self.gamma <= 0.0:
            raise ConfigError(f"train.beta and train.gamma must be positive, got {self.beta}, {self.gamma}")
        for name in ("epochs", "iterations", "sample_size", "batch_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be >= 1, got {getattr(self, name)}")
        if self.lr <= 0.0:
            raise ConfigError(f"train.lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"train.momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0.0:
            raise ConfigError(f"train.weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True)
class SyntheticDatasetSpec:
    classes: int = 8
    samples_per_class: int = 30
    channels: int = 3
    height: int = 32
    width: int = 32
    parts_per_class: int = 2
    part_amplitude: float = 2.0
    noise_sigma: float = 0.3
    database_fraction: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        if self.classes < 2:
            raise ConfigError(f"data.classes must be >= 2, got {self.classes}")
        if self.samples_per_class < 2:
            raise ConfigError(f"data.samples_per_class must be >= 2, got {self.samples_per_class}")
        if self.channels < 1 or self.parts_per_class < 1:
            raise ConfigError("data.channels and data.parts_per_class must be >= 1")
        if self.height % 4 or self.width % 4 or self.height < 8 or self.width < 8:
            raise ConfigError(
                f"data.height/width must be multiples of 4 and >= 8, got {self.height}x{self.width}"
            )
        if self.noise_sigma < 0.0:
            raise ConfigError(f"data.noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 < self.database_fraction < 1.0:
            raise ConfigError(f"data.database_fraction must lie in (0, 1), got {self.database_fraction}")


@dataclass(frozen=True)
class RunConfig:
    stage: StageConfig = field(default_factory=StageConfig)
    icon: IconConfig = field(default_factory=IconConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: SyntheticDatasetSpec = field(default_factory=SyntheticDatasetSpec)
    seed: int = 0
    dataset_path: str = ""

    def validate(self) -> None:
        self.stage.validate()
        self.icon.validate(self.model.feature_channels)
        self.model.validate()
        self.train.validate()
        self.data.validate()
        if self.data.channels != self.model.in_channels:
            raise ConfigError(
                f"data.channels={self.data.channels} does not match model.in_channels={self.model.in_channels}"
            )

    def with_variant(self, variant: Variant) -> "RunConfig":
        """Settings of one ablation variant; the stage mode follows the variant."""
        stage = self.stage
        if variant is Variant.PLAIN_STAGES:
            stage = replace(stage, mode=AttentionMode.NONE)
        elif variant in (Variant.NO_ICON, Variant.FULL) and stage.mode is AttentionMode.NONE:
            stage = replace(stage, mode=AttentionMode.SEM)
        return replace(self, stage=stage, model=replace(self.model, variant=variant))
