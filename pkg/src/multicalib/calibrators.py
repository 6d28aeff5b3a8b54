"""Platt scaling, isotonic regression and temperature scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ScoredDataset, logit, sigmoid
from .metrics import cross_entropy


class CalibrationFitError(ValueError):
    """The calibration set cannot identify the calibrator (e.g. one class only)."""


def _require_both_classes(labels: np.ndarray) -> None:
    if labels.min() == labels.max():
        raise CalibrationFitError("calibration labels contain a single class")


def _logits(data: ScoredDataset) -> np.ndarray:
    return data.logits_or_derived()


@dataclass(frozen=True)
class PlattParams:
    a: float = 1.0
    b: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("Platt parameters must be finite")

    def predict_logits(self, z: np.ndarray) -> np.ndarray:
        return sigmoid(self.a * np.asarray(z, dtype=float) + self.b)

    def predict(self, scores: np.ndarray, logits: np.ndarray | None = None) -> np.ndarray:
        z = logit(scores) if logits is None else logits
        return self.predict_logits(z)

    def to_dict(self) -> dict:
        return {"kind": "platt", "a": self.a, "b": self.b}


def _log_loss(z, y, a, b):
    # mean binary cross-entropy in logit form, stable for large |t|
    t = a * z + b
    return float(np.mean(np.logaddexp(0.0, t) - y * t))


def platt_fit(calib: ScoredDataset, tol: float = 1e-8, max_iter: int = 100) -> PlattParams:
    """Fit ``sigmoid(a * logit + b)`` by damped Newton on the mean log-loss."""
    y = calib.labels.astype(float)
    _require_both_classes(y)
    z = _logits(calib)
    a, b = 1.0, 0.0
    loss = _log_loss(z, y, a, b)
    for _ in range(max_iter):
        p = sigmoid(a * z + b)
        r = p - y
        grad = np.array([np.mean(r * z), np.mean(r)])
        if np.linalg.norm(grad) <= tol:
            break
        w = p * (1 - p)
        hess = np.array(
            [[np.mean(w * z * z), np.mean(w * z)], [np.mean(w * z), np.mean(w)]]
        )
        hess += 1e-12 * np.eye(2)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad
        t = 1.0
        while t > 1e-10:
            a_new, b_new = a - t * step[0], b - t * step[1]
            new_loss = _log_loss(z, y, a_new, b_new)
            if new_loss <= loss:
                break
            t *= 0.5
        else:
            break
        a, b, loss = a_new, b_new, new_loss
    return PlattParams(float(a), float(b))


@dataclass(frozen=True)
class IsotonicMap:
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values) or not self.values:
            raise ValueError("isotonic map needs equal-length, nonempty breakpoints and values")
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(np.diff(vals) < 0) or vals.min() < 0 or vals.max() > 1:
            raise ValueError("values must be non-decreasing within [0, 1]")

    def __repr__(self) -> str:
        return f"IsotonicMap(<{len(self.values)} steps, {self.values[0]:.3g}..{self.values[-1]:.3g}>)"

    def predict(self, scores: np.ndarray, logits: np.ndarray | None = None) -> np.ndarray:
        bp = np.asarray(self.breakpoints)
        idx = np.searchsorted(bp, np.asarray(scores, dtype=float), side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, bp.size - 1)]

    def to_dict(self) -> dict:
        return {"kind": "isotonic", "breakpoints": list(self.breakpoints), "values": list(self.values)}


def pool_adjacent_violators(sums: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Weighted PAV: non-decreasing fit minimising sum w_i (x_i - sums_i/w_i)^2.

    Blocks keep exact running sums so every fitted value is a single division.
    """
    blk_sum: list[float] = []
    blk_w: list[float] = []
    blk_len: list[int] = []
    for s, w in zip(sums.tolist(), weights.tolist()):
        blk_sum.append(s)
        blk_w.append(w)
        blk_len.append(1)
        while len(blk_sum) > 1 and blk_sum[-2] * blk_w[-1] > blk_sum[-1] * blk_w[-2]:
            s2, w2, l2 = blk_sum.pop(), blk_w.pop(), blk_len.pop()
            blk_sum[-1] += s2
            blk_w[-1] += w2
            blk_len[-1] += l2
    out = np.empty(len(sums))
    pos = 0
    for s, w, ln in zip(blk_sum, blk_w, blk_len):
        out[pos : pos + ln] = s / w
        pos += ln
    return out


def isotonic_fit(calib: ScoredDataset) -> IsotonicMap:
    xs, inverse = np.unique(calib.scores, return_inverse=True)
    sums = np.bincount(inverse, weights=calib.labels.astype(float), minlength=xs.size)
    counts = np.bincount(inverse, minlength=xs.size).astype(float)
    fitted = pool_adjacent_violators(sums, counts)
    return IsotonicMap(tuple(xs.tolist()), tuple(fitted.tolist()))


TEMPERATURE_GRID = tuple(round(0.2 * k, 10) for k in range(1, 21))


@dataclass(frozen=True)
class TemperatureParams:
    t: float = 1.0

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError("temperature must be positive and finite")

    def predict_logits(self, z: np.ndarray) -> np.ndarray:
        return sigmoid(np.asarray(z, dtype=float) / self.t)

    def predict(self, scores: np.ndarray, logits: np.ndarray | None = None) -> np.ndarray:
        z = logit(scores) if logits is None else logits
        return self.predict_logits(z)

    def to_dict(self) -> dict:
        return {"kind": "temperature", "t": self.t}


def golden_section_min(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Minimise a unimodal ``f`` on [lo, hi] to bracket width ``tol``."""
    inv_phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2


def _temp_loss(z, y, t):
    return _log_loss(z, y, 1.0 / t, 0.0)


def temperature_fit(calib: ScoredDataset, grid=TEMPERATURE_GRID) -> TemperatureParams:
    """Best of the fixed grid and the continuous cross-entropy minimiser."""
    y = calib.labels.astype(float)
    _require_both_classes(y)
    z = _logits(calib)
    # a bracket of width 1e-6 in log T is a 1e-6 relative tolerance on T
    log_t = golden_section_min(lambda u: _temp_loss(z, y, math.exp(u)), math.log(0.01), math.log(100.0))
    candidates = list(grid) + [math.exp(log_t)]
    # ties go to the earlier candidate
    best = min(candidates, key=lambda t: _temp_loss(z, y, t))
    return TemperatureParams(float(best))


def calibrated_cross_entropy(params, calib: ScoredDataset) -> float:
    return cross_entropy(params.predict(calib.scores, calib.logits), calib.labels)
