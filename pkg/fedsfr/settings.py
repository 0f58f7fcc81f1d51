# SPDX-License-Identifier: Apache-2.0

"""Run configuration: YAML sections validated by pydantic, with env and CLI overrides."""

from __future__ import annotations

from abc import ABC
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing_extensions import Literal

from fedsfr.jscc import ARCHITECTURES
from fedsfr.utils import deep_merge


class StrictSettings(BaseModel, ABC):
    """Defines common configuration for config sections; unknown keys are errors."""

    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSettings(StrictSettings):
    source: Literal["synthetic", "idx", "image-dir"] = "synthetic"
    path: Optional[str] = None
    format: Optional[Literal["pgm", "ppm"]] = None

    kind: Literal["gaussian-blobs", "stripes"] = "gaussian-blobs"
    size: int = Field(default=1000, ge=1)
    image_shape: List[int] = Field(default_factory=lambda: [1, 8, 8], min_length=3, max_length=3)

    client_size: int = Field(default=80, ge=1)
    public_size: int = Field(default=16, ge=0)
    test_size: int = Field(default=200, ge=1)
    strategy: Literal["iid"] = "iid"

    @model_validator(mode="after")
    def check_sources(self) -> "DataSettings":
        if self.source != "synthetic" and not self.path:
            raise ValueError(f"data.path is required for source {self.source!r}")
        if self.public_size > self.client_size:
            raise ValueError(
                f"data.public_size ({self.public_size}) must not exceed data.client_size ({self.client_size})"
            )
        return self


class ModelSettings(StrictSettings):
    architecture: Literal["desk", "paper-analog", "custom"] = "desk"
    image_shape: Optional[List[int]] = Field(default=None, min_length=3, max_length=3)
    channels: Optional[List[int]] = Field(default=None, min_length=2)
    encoder_kernel: Literal[3, 4] = 4

    @model_validator(mode="after")
    def check_custom(self) -> "ModelSettings":
        if self.architecture == "custom" and (self.image_shape is None or self.channels is None):
            raise ValueError("model.image_shape and model.channels are required for the custom architecture")
        return self

    def resolved(self) -> Dict[str, Any]:
        if self.architecture == "custom":
            return {"image_shape": self.image_shape, "channels": self.channels, "encoder_kernel": self.encoder_kernel}
        return dict(ARCHITECTURES[self.architecture])


class ChannelSettings(StrictSettings):
    snr_db: float = 20.0


class FederationSettings(StrictSettings):
    algorithm: Literal["fedsfr", "dsgd"] = "fedsfr"
    k: int = Field(default=10, ge=1)
    k_m: int = Field(default=3, ge=0)
    k_o: int = Field(default=3, ge=0)
    s_m_ratio: float = Field(default=0.4, gt=0.0, le=1.0)
    s_o_ratio: float = Field(default=0.1, ge=0.0, le=1.0)
    grouping: Literal["capacity", "random"] = "capacity"
    capacity_distribution: Literal["uniform", "rayleigh"] = "uniform"

    @model_validator(mode="after")
    def check_counts(self) -> "FederationSettings":
        if self.k_m + self.k_o > self.k:
            raise ValueError(f"federation.k_m + federation.k_o ({self.k_m} + {self.k_o}) exceeds federation.k ({self.k})")
        if self.k_m + self.k_o == 0:
            raise ValueError("federation.k_m and federation.k_o cannot both be 0")
        if self.k_o and self.s_o_ratio >= self.s_m_ratio:
            raise ValueError(
                f"federation.s_o_ratio ({self.s_o_ratio}) must be below federation.s_m_ratio ({self.s_m_ratio})"
            )
        return self


class TrainingSettings(StrictSettings):
    rounds: int = Field(default=50, ge=1)
    client_epochs: int = Field(default=1, ge=1)
    server_epochs: int = Field(default=1, ge=0)
    client_batch_size: int = Field(default=16, ge=1)
    server_batch_size: int = Field(default=16, ge=1)
    eta_c0: float = Field(default=0.1, ge=0.0)
    eta_s0: float = Field(default=0.01, ge=0.0)
    schedule: Literal["staircase", "theory"] = "staircase"
    decay: float = Field(default=0.8, gt=0.0, le=1.0)
    decay_every: int = Field(default=10, ge=1)
    alpha0: float = Field(default=1.0, gt=0.0)
    theory_horizon: Optional[int] = Field(default=None, ge=1)


class EvaluationSettings(StrictSettings):
    noise_passes: int = Field(default=1, ge=1)
    grad_norm_budget: int = Field(default=64, ge=1)
    # assumed smoothness constant of the client loss, only used by the convergence-bound diagnostic
    smoothness: float = Field(default=1.0, gt=0.0)
    record_wall_time: bool = False


class OutputSettings(StrictSettings):
    dir: str = "runs/desk"
    dump_updates: bool = False


class SweepSettings(StrictSettings):
    eta_s0_factors: List[float] = Field(default_factory=lambda: [10.0, 1.0, 0.1, 0.01], min_length=1)
    splits: List[List[int]] = Field(default_factory=lambda: [[2, 7], [3, 3], [4, 1]], min_length=1)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2], min_length=1)

    @model_validator(mode="after")
    def check_splits(self) -> "SweepSettings":
        for split in self.splits:
            if len(split) != 2 or min(split) < 0:
                raise ValueError(f"sweep.splits entries must be [k_m, k_o] pairs, got {split}")
        return self


class RunConfig(StrictSettings):
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    data: DataSettings = Field(default_factory=DataSettings)
    model: ModelSettings = Field(default_factory=ModelSettings)
    channel: ChannelSettings = Field(default_factory=ChannelSettings)
    federation: FederationSettings = Field(default_factory=FederationSettings)
    training: TrainingSettings = Field(default_factory=TrainingSettings)
    evaluation: EvaluationSettings = Field(default_factory=EvaluationSettings)
    output: OutputSettings = Field(default_factory=OutputSettings)
    sweep: SweepSettings = Field(default_factory=SweepSettings)

    @model_validator(mode="after")
    def check_consistency(self) -> "RunConfig":
        needed = self.federation.k * self.data.client_size + self.data.test_size
        if self.data.source == "synthetic" and needed > self.data.size:
            raise ValueError(
                f"federation.k * data.client_size + data.test_size ({needed}) exceeds data.size ({self.data.size})"
            )
        federation = self.federation
        if federation.algorithm == "fedsfr" and federation.k_o and self.data.public_size < 1:
            raise ValueError(
                f"data.public_size must be at least 1 when federation.k_o ({federation.k_o}) clients send features"
            )
        image_shape = list(self.model.resolved()["image_shape"])
        if self.data.source == "synthetic" and self.data.image_shape != image_shape:
            raise ValueError(
                f"data.image_shape {self.data.image_shape} does not match model image shape {image_shape}"
            )
        return self


class EnvSettings(BaseSettings):
    """Environment overrides, e.g. FEDSFR_OUTPUT_DIR and FEDSFR_THREADS."""

    model_config = SettingsConfigDict(env_prefix="FEDSFR_", case_sensitive=False, extra="ignore")

    output_dir: Optional[str] = None
    threads: Optional[int] = Field(default=None, ge=1)

    def as_overrides(self) -> Dict[str, Any]:
        overrides: Dict[str, Any] = {}
        if self.output_dir:
            overrides["output"] = {"dir": self.output_dir}
        if self.threads:
            overrides["threads"] = self.threads
        return overrides


def load_config(path: Optional[Union[str, Path]], overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Reads a YAML config and layers environment then CLI overrides on top

    Args:
        path (Optional[str]): Config file, defaults only when None
        overrides (Optional[dict]): Nested overrides, e.g. {"seed": 3}

    Returns:
        RunConfig: Validated configuration
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        with open(path) as file:
            raw = yaml.safe_load(file) or {}
    merged = deep_merge(raw, EnvSettings().as_overrides(), overrides or {})
    return RunConfig.model_validate(merged)


def dump_config(config: RunConfig, path: Union[str, Path]) -> None:
    with open(path, "w") as file:
        yaml.safe_dump(config.model_dump(), file, sort_keys=False)
