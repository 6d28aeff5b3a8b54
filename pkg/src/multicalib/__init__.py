"""Multicalibration metrics, post-processing algorithms and benchmark harness."""

from .calibrators import (
    CalibrationFitError,
    IsotonicMap,
    PlattParams,
    TemperatureParams,
    isotonic_fit,
    platt_fit,
    temperature_fit,
)
from .core import (
    ConfigurationError,
    GroupCollection,
    Patch,
    PatchedPredictor,
    SchemaError,
    ScoredDataset,
    ScoredSample,
    apply_patches,
    bin_index,
)
from .hjz import HjzConfig, event_payoffs, hjz_fit, online_update
from .hkrr import HkrrConfig, hkrr_fit
from .metrics import SmECEConfig, binned_ece, brier, cross_entropy, group_metric, smece

__version__ = "0.1.0"

__all__ = [
    "CalibrationFitError",
    "ConfigurationError",
    "GroupCollection",
    "HjzConfig",
    "HkrrConfig",
    "IsotonicMap",
    "Patch",
    "PatchedPredictor",
    "PlattParams",
    "SchemaError",
    "ScoredDataset",
    "ScoredSample",
    "SmECEConfig",
    "TemperatureParams",
    "apply_patches",
    "bin_index",
    "binned_ece",
    "brier",
    "cross_entropy",
    "event_payoffs",
    "group_metric",
    "hjz_fit",
    "hkrr_fit",
    "isotonic_fit",
    "online_update",
    "platt_fit",
    "smece",
    "temperature_fit",
]
