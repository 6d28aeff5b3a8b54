"""Experiment configuration documents (YAML or JSON)."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .core import SchemaError
from .harness.groups import DEFAULT_GAMMA, GroupPredicate
from .harness.splits import CF_GRID_TABULAR, SplitSpec
from .harness.sweep import MethodSpec, method_grid
from .hjz import HjzConfig
from .io import FORMATS, _read_doc


class SplitConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    calibration_fractions: list[float] = Field(default_factory=lambda: list(CF_GRID_TABULAR))
    seed: int = 0
    n_splits: int = Field(5, ge=1)
    reuse_training_data: bool = False

    @field_validator("calibration_fractions")
    @classmethod
    def _cf_range(cls, v: list[float]) -> list[float]:
        if not v:
            raise ValueError("at least one calibration fraction is required")
        if any(not (0.0 <= x <= 1.0) for x in v):
            raise ValueError("calibration fractions must lie in [0, 1]")
        return v

    @model_validator(mode="after")
    def _ratios(self):
        SplitSpec(self.ratios)  # raises on bad ratios
        return self

    def to_spec(self) -> SplitSpec:
        return SplitSpec(self.ratios, 0.0, self.seed, self.n_splits, self.reuse_training_data)


class MethodConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Literal["erm", "platt", "isotonic", "temperature", "hkrr", "hjz"]
    alphas: list[float] | None = None
    configs: list[dict[str, Any]] | None = None

    @model_validator(mode="after")
    def _applicable(self):
        if self.alphas is not None and self.name != "hkrr":
            raise ValueError("'alphas' only applies to hkrr")
        if self.configs is not None and self.name != "hjz":
            raise ValueError("'configs' only applies to hjz")
        if self.configs is not None:
            for c in self.configs:
                HjzConfig(**c)
        return self

    def expand(self) -> list[MethodSpec]:
        if self.name == "hkrr" and self.alphas is not None:
            return method_grid("hkrr", alphas=self.alphas)
        if self.name == "hjz" and self.configs is not None:
            return method_grid("hjz", configs=[HjzConfig(**c) for c in self.configs])
        return method_grid(self.name)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dataset: str
    groups: list[dict[str, Any]] | str
    gamma: float = Field(DEFAULT_GAMMA, ge=0.0, le=1.0)
    split: SplitConfig = Field(default_factory=SplitConfig)
    methods: list[MethodConfig]
    output_dir: str = "results"
    formats: list[Literal["table", "json", "plot"]] = Field(default_factory=lambda: list(FORMATS))
    workers: int = Field(1, ge=1)

    @field_validator("methods")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one method is required")
        return v

    @field_validator("groups")
    @classmethod
    def _groups(cls, v):
        if isinstance(v, list):
            for d in v:
                GroupPredicate.from_dict(d)
        return v

    def method_specs(self) -> list[MethodSpec]:
        specs: list[MethodSpec] = []
        for m in self.methods:
            for s in m.expand():
                if s not in specs:
                    specs.append(s)
        return specs


def load_experiment_config(path: str | Path) -> tuple[ExperimentConfig, Path]:
    """Validate a config file; returns it with the directory relative paths resolve against."""
    path = Path(path)
    try:
        cfg = ExperimentConfig.model_validate(_read_doc(path))
    except ValidationError as exc:
        raise SchemaError(f"{path}: invalid experiment config\n{exc}") from None
    return cfg, path.parent
