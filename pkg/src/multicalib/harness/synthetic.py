"""Synthetic scored data with known true probabilities and planted group shifts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..core import ScoredDataset, sigmoid
from .groups import DEFAULT_GAMMA, GroupPredicate, build_groups

REGIONS = ("north", "south", "east", "west")
EDUCATION = ("HS", "BA", "MS", "PhD")
EDUCATION_P = (0.4, 0.35, 0.17, 0.08)


class SyntheticGenerationError(ValueError):
    pass


def default_predicates() -> tuple[GroupPredicate, ...]:
    """Eight overlapping groups over the generated attributes."""
    P = GroupPredicate
    return (
        P("threshold_gt", "x1", 0.0, name="x1_pos"),
        P("threshold_lt", "x2", -0.5, name="x2_low"),
        P("equals", "region", "north", name="north"),
        P("threshold_gt", "age", 60, name="senior"),
        P("equals", "education", "HS", name="hs"),
        P("conjunction", clauses=(P("threshold_gt", "x1", 0.0), P("threshold_gt", "age", 40)), name="x1_pos_over40"),
        P("threshold_lt", "age", 32, name="young"),
        P("threshold_gt", "x3", 0.8, name="x3_high"),
    )


DEFAULT_SHIFTS = {
    "x1_pos": 0.0,
    "x2_low": -0.1,
    "north": 0.15,
    "senior": -0.2,
    "hs": 0.05,
    "x1_pos_over40": 0.2,
    "young": 0.1,
    "x3_high": -0.15,
}


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 10_000
    seed: int = 0
    predicates: tuple[GroupPredicate, ...] = field(default_factory=default_predicates)
    shifts: Mapping[str, float] = field(default_factory=dict)
    # true logit = intercept + w . (x1, x2, x3) + age_weight * (age - 45) / 15 + region offsets
    intercept: float = -0.2
    weights: tuple[float, float, float] = (1.0, -0.7, 0.5)
    age_weight: float = 0.4
    region_offsets: tuple[float, float, float, float] = (0.3, -0.2, 0.0, 0.1)
    gamma: float = DEFAULT_GAMMA

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "seed": self.seed,
            "predicates": [p.to_dict() for p in self.predicates],
            "shifts": dict(self.shifts),
            "intercept": self.intercept,
            "weights": list(self.weights),
            "age_weight": self.age_weight,
            "region_offsets": list(self.region_offsets),
            "gamma": self.gamma,
        }


def gen_attributes(n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    x = rng.standard_normal((n, 3))
    return {
        "x1": x[:, 0],
        "x2": x[:, 1],
        "x3": x[:, 2],
        "age": rng.integers(18, 80, size=n).astype(float),
        "region": np.asarray(REGIONS, dtype=object)[rng.integers(0, len(REGIONS), size=n)].astype(str),
        "education": np.asarray(EDUCATION)[rng.choice(len(EDUCATION), size=n, p=EDUCATION_P)],
    }


def gen_synthetic(spec: SyntheticSpec) -> ScoredDataset:
    """Draw attributes, true probabilities and labels; score = clip(p + sum of member shifts)."""
    rng = np.random.default_rng(spec.seed)
    attrs = gen_attributes(spec.n, rng)
    region_idx = np.searchsorted(np.asarray(sorted(REGIONS)), attrs["region"])
    offsets = dict(zip(REGIONS, spec.region_offsets))
    region_off = np.asarray([offsets[r] for r in sorted(REGIONS)])[region_idx]
    z = (
        spec.intercept
        + np.column_stack([attrs["x1"], attrs["x2"], attrs["x3"]]) @ np.asarray(spec.weights)
        + spec.age_weight * (attrs["age"] - 45.0) / 15.0
        + region_off
    )
    p = sigmoid(z)
    y = (rng.random(spec.n) < p).astype(np.int8)

    groups = build_groups(spec.predicates, attrs, gamma=spec.gamma)
    if groups.dropped:
        raise SyntheticGenerationError(
            f"groups at or below gamma={spec.gamma} at n={spec.n}: {', '.join(groups.dropped)}"
        )
    unknown = set(spec.shifts) - set(groups.names)
    if unknown:
        raise SyntheticGenerationError(f"shifts name unknown groups: {sorted(unknown)}")
    delta = np.asarray([spec.shifts.get(name, 0.0) for name in groups.names])
    score = np.clip(p + groups.masks @ delta, 0.0, 1.0)
    return ScoredDataset(
        scores=score,
        labels=y,
        group_masks=groups.masks,
        group_names=groups.names,
        attributes=attrs,
        true_prob=p,
        sample_ids=np.arange(spec.n),
    )
