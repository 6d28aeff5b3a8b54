"""Train / calibration / validation / test partitioning."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..rng import shuffle

CF_GRID_TABULAR = (0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
CF_GRID_LARGE = (0.0, 0.2, 0.4)

# The test permutation depends on n only, never on the split seed.
TEST_SEED = 0x5EED_7E57


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)
    calibration_fraction: float = 0.0
    seed: int = 0
    n_splits: int = 5
    reuse_training_data: bool = False

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios):
            raise ValueError("ratios must be three nonnegative numbers")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("ratios must sum to 1")
        if not (0.0 <= self.calibration_fraction <= 1.0):
            raise ValueError("calibration fraction must lie in [0, 1]")
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + k for k in range(self.n_splits)]


@dataclass(frozen=True, eq=False)
class Splits:
    train: np.ndarray
    calib: np.ndarray
    val: np.ndarray
    test: np.ndarray
    constant_base: bool = False

    def sizes(self) -> tuple[int, int, int, int]:
        return (self.train.size, self.calib.size, self.val.size, self.test.size)


def _count(frac: float, n: int, up: bool = False) -> int:
    # round away float noise such as 0.1 * 60 = 6.000000000000001
    x = round(frac * n, 9)
    return math.ceil(x) if up else math.floor(x)


def make_splits(n: int, spec: SplitSpec) -> Splits:
    """Index sets for one seeded split.

    The test set is a fixed function of ``n``. The remaining indices are
    shuffled with ``spec.seed``; validation takes the head of that order, and
    the calibration set is the first ``ceil(CF * |train|)`` indices of the
    shuffled training pool. With ``reuse_training_data`` the calibration set
    is the whole training pool.
    """
    if n < 10:
        raise ValueError("need at least 10 samples to split")
    _, r_val, r_test = spec.ratios
    n_test = _count(r_test, n)
    n_val = _count(r_val, n)
    n_pool = n - n_test - n_val
    if min(n_test, n_val, n_pool) < 1:
        raise ValueError(f"ratios {spec.ratios} leave an empty split at n={n}")

    fixed = shuffle(range(n), TEST_SEED)
    test = sorted(fixed[:n_test])
    rest = shuffle(sorted(fixed[n_test:]), spec.seed)
    val = sorted(rest[:n_val])
    pool = rest[n_val:]
    if spec.reuse_training_data:
        calib, train = sorted(pool), sorted(pool)
    else:
        k = _count(spec.calibration_fraction, len(pool), up=True)
        calib, train = sorted(pool[:k]), sorted(pool[k:])
    as_idx = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return Splits(
        as_idx(train),
        as_idx(calib),
        as_idx(val),
        as_idx(test),
        constant_base=spec.calibration_fraction == 1.0 and not spec.reuse_training_data,
    )
