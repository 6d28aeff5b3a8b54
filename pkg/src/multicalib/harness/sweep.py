"""Grid execution over methods x calibration fractions x seeded splits."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..calibrators import CalibrationFitError, isotonic_fit, platt_fit, temperature_fit
from ..core import ConfigurationError, GroupCollection, ScoredDataset
from ..hjz import HjzConfig, hjz_fit, hjz_grid
from ..hkrr import ALPHA_GRID, HkrrConfig, hkrr_fit
from ..metrics import accuracy, binned_ece, group_metric_arrays, smece
from .splits import SplitSpec, make_splits

log = logging.getLogger(__name__)

METHODS = ("erm", "platt", "isotonic", "temperature", "hkrr", "hjz")
METRIC_KEYS = ("ece", "max_ece", "smece", "max_smece", "accuracy")


def _fmt(v: Any) -> str:
    return repr(v) if isinstance(v, float) else str(v)


@dataclass(frozen=True)
class MethodSpec:
    method: str
    params: tuple[tuple[str, Any], ...] = ()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}")
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))

    @property
    def config_id(self) -> str:
        if not self.params:
            return self.method
        return self.method + "[" + ",".join(f"{k}={_fmt(v)}" for k, v in self.params) + "]"

    def as_dict(self) -> dict:
        return {"method": self.method, "params": dict(self.params)}


def method_grid(method: str, **overrides) -> list[MethodSpec]:
    """Hyperparameter grid for one method family.

    ``hkrr`` expands over ``alphas`` (default the four-point grid); ``hjz``
    over the deduplicated learner/adversary/decay grid. Other methods have a
    single configuration.
    """
    if method == "hkrr":
        alphas = overrides.get("alphas", ALPHA_GRID)
        return [MethodSpec("hkrr", (("alpha", float(a)),)) for a in alphas]
    if method == "hjz":
        cfgs = overrides.get("configs") or hjz_grid()
        out = []
        for c in cfgs:
            params = {k: v for k, v in c.params().items() if k not in ("lambda", "rounds", "eta0_learner", "eta0_adversary")}
            out.append(MethodSpec("hjz", tuple(params.items())))
        return out
    return [MethodSpec(method)]


class Fitted:
    """Uniform wrapper around a fitted post-processor."""

    def __init__(self, spec: MethodSpec, model=None, note: str = ""):
        self.spec = spec
        self.model = model
        self.note = note

    @property
    def n_patches(self) -> int:
        return getattr(self.model, "n_patches", 0)

    def transform(self, data: ScoredDataset) -> np.ndarray:
        if self.model is None:
            return data.scores
        if self.spec.method in ("hkrr", "hjz"):
            return self.model.predict_dataset(data)
        return self.model.predict(data.scores, data.logits)


def fit_method(spec: MethodSpec, calib: ScoredDataset, groups: GroupCollection) -> Fitted:
    p = dict(spec.params)
    if spec.method == "erm":
        return Fitted(spec)
    if spec.method in ("platt", "temperature"):
        fit = platt_fit if spec.method == "platt" else temperature_fit
        try:
            return Fitted(spec, fit(calib))
        except CalibrationFitError as exc:
            return Fitted(spec, None, note=f"identity fallback: {exc}")
    if spec.method == "isotonic":
        return Fitted(spec, isotonic_fit(calib))
    if spec.method == "hkrr":
        return Fitted(spec, hkrr_fit(calib, groups, HkrrConfig(**p)))
    if spec.method == "hjz":
        return Fitted(spec, hjz_fit(calib, groups, HjzConfig(**p)))
    raise ConfigurationError(f"unknown method {spec.method!r}")


@dataclass(frozen=True)
class MetricsReport:
    ece: float
    max_ece: float
    smece: float
    max_smece: float
    accuracy: float
    group_ece: Mapping[str, float] = field(default_factory=dict)
    group_smece: Mapping[str, float] = field(default_factory=dict)
    group_counts: Mapping[str, int] = field(default_factory=dict)

    def get(self, key: str) -> float:
        return float(getattr(self, key))

    def to_dict(self) -> dict:
        return {
            "ece": self.ece,
            "max_ece": self.max_ece,
            "smece": self.smece,
            "max_smece": self.max_smece,
            "accuracy": self.accuracy,
            "groups": {
                name: {"ece": self.group_ece[name], "smece": self.group_smece[name], "count": self.group_counts[name]}
                for name in self.group_ece
            },
        }


def evaluate(scores: np.ndarray, labels: np.ndarray, groups: GroupCollection) -> MetricsReport:
    ece_rep = group_metric_arrays("ece", scores, labels, groups.masks, groups.names)
    sm_rep = group_metric_arrays("smece", scores, labels, groups.masks, groups.names)
    return MetricsReport(
        ece=binned_ece(scores, labels),
        max_ece=ece_rep.max_value,
        smece=smece(scores, labels),
        max_smece=sm_rep.max_value,
        accuracy=accuracy(scores, labels),
        group_ece={g.name: g.value for g in ece_rep.per_group},
        group_smece={g.name: g.value for g in sm_rep.per_group},
        group_counts={g.name: g.count for g in ece_rep.per_group},
    )


@dataclass(frozen=True)
class RunResult:
    spec: MethodSpec
    cf: float
    seed: int
    val: MetricsReport | None
    test: MetricsReport | None
    n_patches: int = 0
    wall_time: float = 0.0
    error: str = ""
    note: str = ""

    @property
    def ok(self) -> bool:
        return not self.error

    @property
    def point_id(self) -> str:
        return f"{self.spec.config_id}@cf={_fmt(float(self.cf))}"

    def to_dict(self) -> dict:
        """Serializable form; wall time is left out so reports stay byte-stable."""
        return {
            "config_id": self.spec.config_id,
            **self.spec.as_dict(),
            "cf": self.cf,
            "seed": self.seed,
            "status": "ok" if self.ok else "failed",
            "error": self.error,
            "note": self.note,
            "n_patches": self.n_patches,
            "val": None if self.val is None else self.val.to_dict(),
            "test": None if self.test is None else self.test.to_dict(),
        }


def run_single(
    dataset: ScoredDataset,
    groups: GroupCollection,
    spec: MethodSpec,
    cf: float,
    seed: int,
    split: SplitSpec = SplitSpec(),
) -> RunResult:
    """Fit ``spec`` on one seeded split and score it on validation and test.

    Failures are captured in ``RunResult.error``; nothing is raised.
    """
    t0 = time.perf_counter()
    try:
        sp = SplitSpec(split.ratios, cf, seed, 1, split.reuse_training_data)
        splits = make_splits(dataset.n, sp)
        base = dataset
        if splits.constant_base:
            base = dataset.with_scores(np.full(dataset.n, 0.5), np.zeros(dataset.n))
        if spec.method == "erm":
            fitted = Fitted(spec)
        else:
            if splits.calib.size == 0:
                raise ValueError("empty calibration set")
            fitted = fit_method(spec, base.subset(splits.calib), groups.subset(splits.calib))
        reports = []
        for idx in (splits.val, splits.test):
            part = base.subset(idx)
            reports.append(evaluate(fitted.transform(part), part.labels, groups.subset(idx)))
        return RunResult(spec, cf, seed, reports[0], reports[1], fitted.n_patches, time.perf_counter() - t0, note=fitted.note)
    except Exception as exc:  # record-and-continue
        log.warning("run %s cf=%s seed=%s failed: %s", spec.config_id, cf, seed, exc)
        return RunResult(spec, cf, seed, None, None, 0, time.perf_counter() - t0, error=f"{type(exc).__name__}: {exc}")


def aggregate(values: Sequence[float]) -> tuple[float, float]:
    """Mean and unbiased sample standard deviation (0 for a single value)."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("nothing to aggregate")
    std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), std


@dataclass(frozen=True)
class PointSummary:
    spec: MethodSpec
    cf: float
    n_ok: int
    n_failed: int
    val: Mapping[str, tuple[float, float]]
    test: Mapping[str, tuple[float, float]]
    mean_patches: float

    @property
    def point_id(self) -> str:
        return f"{self.spec.config_id}@cf={_fmt(float(self.cf))}"

    def to_dict(self) -> dict:
        return {
            "point_id": self.point_id,
            "config_id": self.spec.config_id,
            **self.spec.as_dict(),
            "cf": self.cf,
            "n_ok": self.n_ok,
            "n_failed": self.n_failed,
            "mean_patches": self.mean_patches,
            "val": {k: {"mean": m, "std": s} for k, (m, s) in self.val.items()},
            "test": {k: {"mean": m, "std": s} for k, (m, s) in self.test.items()},
        }


def summarize(results: Iterable[RunResult]) -> list[PointSummary]:
    by_point: dict[str, list[RunResult]] = {}
    for r in results:
        by_point.setdefault(r.point_id, []).append(r)
    out = []
    for pid in sorted(by_point):
        runs = by_point[pid]
        ok = [r for r in runs if r.ok]
        if not ok:
            out.append(PointSummary(runs[0].spec, runs[0].cf, 0, len(runs), {}, {}, 0.0))
            continue
        val = {k: aggregate([r.val.get(k) for r in ok]) for k in METRIC_KEYS}
        test = {k: aggregate([r.test.get(k) for r in ok]) for k in METRIC_KEYS}
        patches = float(np.mean([r.n_patches for r in ok]))
        out.append(PointSummary(ok[0].spec, ok[0].cf, len(ok), len(runs) - len(ok), val, test, patches))
    return out


def select_best(points: Sequence[PointSummary]) -> PointSummary | None:
    """Lowest mean validation max smECE; ties -> fewer patches -> point id.

    Only validation aggregates are read.
    """
    eligible = [p for p in points if p.n_ok > 0]
    if not eligible:
        return None
    return min(eligible, key=lambda p: (p.val["max_smece"][0], p.mean_patches, p.point_id))


@dataclass
class SweepResult:
    results: list[RunResult]
    points: list[PointSummary]
    best: PointSummary | None
    best_by_method: dict[str, PointSummary]


def expand_grid(methods: Sequence[MethodSpec], cf_values: Sequence[float]) -> list[tuple[MethodSpec, float]]:
    """Grid points; post-processors need a calibration set, so they skip CF = 0."""
    grid = []
    for spec in methods:
        for cf in cf_values:
            if spec.method != "erm" and cf == 0:
                continue
            grid.append((spec, float(cf)))
    return grid


def _run_task(args):
    return run_single(*args)


def run_sweep(
    dataset: ScoredDataset,
    groups: GroupCollection,
    methods: Sequence[MethodSpec],
    cf_values: Sequence[float],
    split: SplitSpec = SplitSpec(),
    workers: int = 1,
) -> SweepResult:
    grid = expand_grid(methods, cf_values)
    if not grid:
        raise ConfigurationError("sweep grid is empty")
    tasks = [(dataset, groups, spec, cf, seed, split) for spec, cf in grid for seed in split.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_task, tasks))
    else:
        results = [_run_task(t) for t in tasks]
    results.sort(key=lambda r: (r.point_id, r.seed))
    points = summarize(results)
    by_method: dict[str, PointSummary] = {}
    for method in METHODS:
        best = select_best([p for p in points if p.spec.method == method])
        if best is not None:
            by_method[method] = best
    return SweepResult(results, points, select_best(points), by_method)
