"""Calibration and accuracy metrics with worst-group aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PROB_EPS, GroupCollection, ScoredDataset, num_bins


def _check_pair(scores, labels):
    v = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("metrics need at least one sample")
    if v.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    return v, y


def binned_ece(scores, labels, lam: float = 0.1) -> float:
    """Bin-mass weighted mean |label mean - score mean| over equal-width bins."""
    v, y = _check_pair(scores, labels)
    nb = num_bins(lam)
    bins = np.minimum(np.floor(v * nb).astype(np.int64), nb - 1)
    resid = np.bincount(bins, weights=y - v, minlength=nb)
    # n_b/n * |mean(y) - mean(v)| == |sum_b(y - v)| / n
    return float(np.abs(resid).sum() / v.size)


def cross_entropy(scores, labels) -> float:
    v, y = _check_pair(scores, labels)
    p = np.clip(v, PROB_EPS, 1 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def brier(scores, labels) -> float:
    v, y = _check_pair(scores, labels)
    return float(np.mean((v - y) ** 2))


def accuracy(scores, labels) -> float:
    """Fraction correct when predicting 1 for scores strictly above 1/2."""
    v, y = _check_pair(scores, labels)
    return float(np.mean((v > 0.5) == (y == 1)))


@dataclass(frozen=True)
class SmECEConfig:
    grid_points: int = 513
    fixpoint_tolerance: float = 1e-4
    sigma_bounds: tuple[float, float] = (1e-3, 1.0)

    def __post_init__(self):
        if self.grid_points < 3:
            raise ValueError("grid_points must be >= 3")
        lo, hi = self.sigma_bounds
        if not (0 < lo < hi):
            raise ValueError("sigma_bounds must satisfy 0 < lo < hi")
        if self.fixpoint_tolerance <= 0:
            raise ValueError("fixpoint_tolerance must be positive")


@dataclass(frozen=True)
class SmECEResult:
    value: float
    sigma: float
    converged: bool


class _Smoother:
    """Residual field on the grid, smoothed by a reflected Gaussian.

    The grid on [0, 1] is mirrored to a circle of length 2 so that circular
    convolution equals convolution with the kernel reflected at both ends.
    Samples are linearly split between their two neighbouring grid nodes.
    """

    def __init__(self, v: np.ndarray, r: np.ndarray, grid_points: int):
        m = grid_points - 1
        self.n = v.size
        self.m = m
        pos = v * m
        j = np.minimum(np.floor(pos).astype(np.int64), m - 1)
        frac = pos - j
        mass = np.bincount(j, weights=(1 - frac) * r, minlength=m + 1)
        mass += np.bincount(j + 1, weights=frac * r, minlength=m + 1)
        # even extension: node k and its mirror 2m-k each carry the full mass,
        # so the circle holds the symmetric measure of total 2 * sum(r)
        circle = np.empty(2 * m)
        circle[: m + 1] = mass
        circle[m + 1 :] = mass[m - 1 : 0 : -1]
        circle[0] *= 2
        circle[m] *= 2
        self.spectrum = np.fft.rfft(circle)
        self.offsets = np.arange(2 * m) / m

    def error(self, sigma: float) -> float:
        # wrapped Gaussian: every image at distance d + 2k on the circle
        reach = int(np.ceil(6 * sigma / 2.0)) + 1
        k = sum(np.exp(-0.5 * ((self.offsets + 2.0 * j) / sigma) ** 2) for j in range(-reach, reach + 1))
        k /= k.sum()
        smoothed = np.fft.irfft(self.spectrum * np.fft.rfft(k), n=2 * self.m)
        # trapezoid over [0, 1] of |density| == half the circle's absolute mass
        return float(0.5 * np.abs(smoothed).sum() / self.n)


def smece_detail(scores, labels, config: SmECEConfig | None = None) -> SmECEResult:
    """smECE with the bandwidth at its fixed point, plus convergence info."""
    cfg = config or SmECEConfig()
    v, y = _check_pair(scores, labels)
    sm = _Smoother(v, y - v, cfg.grid_points)
    lo, hi = cfg.sigma_bounds
    f_lo = sm.error(lo)
    if f_lo <= lo:
        return SmECEResult(f_lo, lo, False)
    f_hi = sm.error(hi)
    if f_hi >= hi:
        return SmECEResult(f_hi, hi, False)
    while hi - lo > cfg.fixpoint_tolerance:
        mid = 0.5 * (lo + hi)
        if sm.error(mid) > mid:
            lo = mid
        else:
            hi = mid
    sigma = 0.5 * (lo + hi)
    return SmECEResult(sm.error(sigma), sigma, True)


def smece(scores, labels, config: SmECEConfig | None = None) -> float:
    return smece_detail(scores, labels, config).value


def smece_at(scores, labels, sigma: float, grid_points: int = 513) -> float:
    """Smoothed calibration error at a fixed bandwidth."""
    v, y = _check_pair(scores, labels)
    return _Smoother(v, y - v, grid_points).error(sigma)


METRICS = {
    "ece": binned_ece,
    "smece": smece,
    "accuracy": accuracy,
    "brier": brier,
    "cross_entropy": cross_entropy,
}


@dataclass(frozen=True)
class GroupValue:
    name: str
    value: float
    count: int


@dataclass(frozen=True)
class GroupMetricReport:
    metric: str
    per_group: tuple[GroupValue, ...]
    overall: float
    max_value: float
    argmax_group: str

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "overall": self.overall,
            "max": self.max_value,
            "argmax_group": self.argmax_group,
            "groups": [{"name": g.name, "value": g.value, "count": g.count} for g in self.per_group],
        }


def group_metric_arrays(metric: str, scores, labels, masks, names) -> GroupMetricReport:
    try:
        fn = METRICS[metric]
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}") from None
    v, y = _check_pair(scores, labels)
    masks = np.asarray(masks, dtype=bool)
    if masks.shape[1] == 0:
        raise ValueError("group collection is empty")
    per_group = []
    for g, name in enumerate(names):
        sel = masks[:, g]
        cnt = int(sel.sum())
        if cnt == 0:
            raise ValueError(f"group {name!r} has no samples in this dataset")
        per_group.append(GroupValue(name, fn(v[sel], y[sel]), cnt))
    best = max(per_group, key=lambda gv: gv.value)
    return GroupMetricReport(metric, tuple(per_group), fn(v, y), best.value, best.name)


def group_metric(metric: str, dataset: ScoredDataset, groups: GroupCollection | None = None) -> GroupMetricReport:
    """Evaluate ``metric`` on every group; the full population is reported
    as ``overall`` but never enters the maximum."""
    if groups is None:
        groups = dataset.groups()
    if groups.n != dataset.n:
        raise ValueError("group collection length differs from dataset")
    return group_metric_arrays(metric, dataset.scores, dataset.labels, groups.masks, groups.names)
