"""Shared domain types, score binning and patch-replay inference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

PROB_EPS = 1e-6


class ConfigurationError(ValueError):
    """Raised for invalid hyperparameters (bad bin width, unknown method, ...)."""


class SchemaError(ValueError):
    """Input data or configuration does not match the expected schema."""


def num_bins(lam: float) -> int:
    """Number of bins for width ``lam``; ``1/lam`` must be an integer."""
    if not (0 < lam <= 1):
        raise ConfigurationError(f"bin width must lie in (0, 1], got {lam}")
    k = round(1.0 / lam)
    if abs(k * lam - 1.0) > 1e-9:
        raise ConfigurationError(f"bin width {lam} does not divide 1")
    return k


def bin_index(score: float, lam: float = 0.1) -> int:
    """Bin of ``score`` for bins [0, lam), ..., [1 - lam, 1] (last bin closed)."""
    nb = num_bins(lam)
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"score {score} outside [0, 1]")
    return min(int(math.floor(score * nb)), nb - 1)


def bin_indices(scores: np.ndarray, lam: float = 0.1) -> np.ndarray:
    nb = num_bins(lam)
    idx = np.floor(np.asarray(scores, dtype=float) * nb).astype(np.int64)
    return np.clip(idx, 0, nb - 1)


def clamp_prob(p):
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def logit(p):
    p = clamp_prob(np.asarray(p, dtype=float))
    return np.log(p) - np.log1p(-p)


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class ScoredSample:
    score: float
    label: int
    logit: float | None = None
    group_mask: int = 0

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.label not in (0, 1):
            raise ValueError(f"label {self.label} not in {{0, 1}}")
        if self.logit is not None:
            if abs(float(sigmoid(np.array([self.logit]))[0]) - self.score) > 1e-6:
                raise ValueError("score is not sigmoid(logit)")

    def in_group(self, g: int) -> bool:
        return bool(self.group_mask >> g & 1)


@dataclass(frozen=True, eq=False)
class ScoredDataset:
    """Columnar store of scores, labels and optional logits / group masks.

    ``group_masks`` is an ``(n, G)`` boolean matrix whose columns follow
    ``group_names``. ``attributes`` holds raw feature columns used to evaluate
    group predicates; ``true_prob`` is only set by the synthetic generator.
    """

    scores: np.ndarray
    labels: np.ndarray
    logits: np.ndarray | None = None
    group_masks: np.ndarray | None = None
    group_names: tuple[str, ...] = ()
    attributes: Mapping[str, np.ndarray] = field(default_factory=dict)
    true_prob: np.ndarray | None = None
    sample_ids: np.ndarray | None = None

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        labels = np.asarray(self.labels)
        if scores.ndim != 1 or scores.size < 1:
            raise ValueError("dataset needs at least one sample")
        if labels.shape != scores.shape:
            raise ValueError("scores and labels differ in length")
        if np.any(~np.isfinite(scores)) or scores.min() < 0 or scores.max() > 1:
            raise ValueError("scores must lie in [0, 1]")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels.astype(np.int8))
        if self.logits is not None:
            logits = np.asarray(self.logits, dtype=float)
            if logits.shape != scores.shape:
                raise ValueError("logits and scores differ in length")
            object.__setattr__(self, "logits", logits)
        masks = self.group_masks
        if masks is None:
            masks = np.zeros((scores.size, 0), dtype=bool)
        masks = np.asarray(masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[0] != scores.size:
            raise ValueError("group_masks must have shape (n, G)")
        if masks.shape[1] != len(self.group_names):
            raise ValueError("group_names does not match the mask width")
        object.__setattr__(self, "group_masks", masks)
        object.__setattr__(self, "group_names", tuple(self.group_names))

    @property
    def n(self) -> int:
        return self.scores.size

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i: int) -> ScoredSample:
        bits = 0
        for g in np.flatnonzero(self.group_masks[i]):
            bits |= 1 << int(g)
        z = None if self.logits is None else float(self.logits[i])
        return ScoredSample(float(self.scores[i]), int(self.labels[i]), z, bits)

    def samples(self) -> list[ScoredSample]:
        return [self[i] for i in range(self.n)]

    def logits_or_derived(self) -> np.ndarray:
        if self.logits is not None:
            return self.logits
        return logit(self.scores)

    def subset(self, idx: Sequence[int] | np.ndarray) -> "ScoredDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return ScoredDataset(
            scores=self.scores[idx],
            labels=self.labels[idx],
            logits=None if self.logits is None else self.logits[idx],
            group_masks=self.group_masks[idx],
            group_names=self.group_names,
            attributes={k: np.asarray(v)[idx] for k, v in self.attributes.items()},
            true_prob=None if self.true_prob is None else self.true_prob[idx],
            sample_ids=None if self.sample_ids is None else self.sample_ids[idx],
        )

    def with_scores(self, scores: np.ndarray, logits: np.ndarray | None = None) -> "ScoredDataset":
        return ScoredDataset(
            scores=scores,
            labels=self.labels,
            logits=logits,
            group_masks=self.group_masks,
            group_names=self.group_names,
            attributes=self.attributes,
            true_prob=self.true_prob,
            sample_ids=self.sample_ids,
        )

    def with_groups(self, groups: "GroupCollection") -> "ScoredDataset":
        if groups.n != self.n:
            raise ValueError("group collection length differs from dataset")
        return ScoredDataset(
            scores=self.scores,
            labels=self.labels,
            logits=self.logits,
            group_masks=groups.masks,
            group_names=groups.names,
            attributes=self.attributes,
            true_prob=self.true_prob,
            sample_ids=self.sample_ids,
        )

    def groups(self, min_fraction: float = 0.0) -> "GroupCollection":
        return GroupCollection(
            names=self.group_names,
            masks=self.group_masks,
            descriptions=self.group_names,
            min_fraction=min_fraction,
        )


@dataclass(frozen=True, eq=False)
class GroupCollection:
    """Named, possibly overlapping subgroups as boolean membership columns."""

    names: tuple[str, ...]
    masks: np.ndarray
    descriptions: tuple[str, ...] = ()
    min_fraction: float = 0.0
    dropped: tuple[str, ...] = ()

    def __post_init__(self):
        masks = np.asarray(self.masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[1] != len(self.names):
            raise ValueError("masks must have shape (n, len(names))")
        if not (0.0 <= self.min_fraction <= 1.0):
            raise ValueError("min_fraction must lie in [0, 1]")
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "names", tuple(self.names))
        desc = tuple(self.descriptions) or tuple(self.names)
        if len(desc) != len(self.names):
            raise ValueError("one description per group required")
        object.__setattr__(self, "descriptions", desc)
        object.__setattr__(self, "dropped", tuple(self.dropped))

    @property
    def n(self) -> int:
        return self.masks.shape[0]

    def __len__(self) -> int:
        return len(self.names)

    def sizes(self) -> np.ndarray:
        return self.masks.sum(axis=0)

    def fractions(self) -> np.ndarray:
        return self.sizes() / max(self.n, 1)

    def subset(self, idx) -> "GroupCollection":
        idx = np.asarray(idx, dtype=np.int64)
        return GroupCollection(self.names, self.masks[idx], self.descriptions, self.min_fraction, self.dropped)


@dataclass(frozen=True)
class Patch:
    group_index: int
    bin_index: int
    shift: float

    def to_list(self) -> list:
        return [self.group_index, self.bin_index, self.shift]


def score_bins(scores: np.ndarray, nb: int) -> np.ndarray:
    return np.minimum(np.floor(scores * nb).astype(np.int64), nb - 1)


def apply_patch(scores: np.ndarray, masks: np.ndarray, patch: Patch, nb: int, bins: np.ndarray | None = None) -> int:
    """Apply one patch in place to ``scores``; returns the number of samples moved.

    Fitting and replay both go through this function so that calibration-set
    replay is bit-identical to the fitted scores. ``bins``, when given, must
    equal ``score_bins(scores, nb)`` and is kept in sync.
    """
    if bins is None:
        bins = score_bins(scores, nb)
    sel = np.flatnonzero(masks[:, patch.group_index] & (bins == patch.bin_index))
    if sel.size:
        scores[sel] = np.clip(scores[sel] + patch.shift, 0.0, 1.0)
        bins[sel] = score_bins(scores[sel], nb)
    return int(sel.size)


@dataclass(frozen=True)
class PatchedPredictor:
    """Base scores plus an ordered log of category corrections."""

    lam: float = 0.1
    patches: tuple[Patch, ...] = ()
    provenance: Mapping[str, Any] = field(default_factory=dict)
    group_names: tuple[str, ...] = ()
    converged: bool = True

    def __post_init__(self):
        nb = num_bins(self.lam)
        for p in self.patches:
            if not (0 <= p.bin_index < nb):
                raise ValueError(f"patch bin {p.bin_index} outside [0, {nb})")
            if not (-1.0 <= p.shift <= 1.0):
                raise ValueError(f"patch shift {p.shift} outside [-1, 1]")
        object.__setattr__(self, "patches", tuple(self.patches))
        object.__setattr__(self, "group_names", tuple(self.group_names))

    @property
    def n_patches(self) -> int:
        return len(self.patches)

    def predict(self, scores: np.ndarray, masks: np.ndarray) -> np.ndarray:
        """Replay the patch log on a batch of base scores."""
        v = np.array(scores, dtype=float, copy=True)
        masks = np.asfortranarray(masks, dtype=bool)
        if masks.ndim != 2 or masks.shape[0] != v.size:
            raise ValueError("masks must have shape (n, G)")
        if self.patches and masks.shape[1] <= max(p.group_index for p in self.patches):
            raise ValueError("mask has fewer groups than the patch log references")
        nb = num_bins(self.lam)
        bins = score_bins(v, nb)
        for p in self.patches:
            apply_patch(v, masks, p, nb, bins)
        return v

    def predict_dataset(self, data: ScoredDataset) -> np.ndarray:
        return self.predict(data.scores, data.group_masks)

    def to_dict(self) -> dict:
        return {
            "kind": "patched_predictor",
            "lambda": self.lam,
            "group_names": list(self.group_names),
            "converged": self.converged,
            "provenance": dict(self.provenance),
            "patches": [p.to_list() for p in self.patches],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PatchedPredictor":
        if doc.get("kind") != "patched_predictor":
            raise ValueError("document is not a serialized patched predictor")
        return cls(
            lam=float(doc["lambda"]),
            patches=tuple(Patch(int(g), int(b), float(s)) for g, b, s in doc["patches"]),
            provenance=dict(doc.get("provenance", {})),
            group_names=tuple(doc.get("group_names", ())),
            converged=bool(doc.get("converged", True)),
        )


def _mask_bits(group_mask: int | Iterable[int] | Iterable[bool]) -> int:
    if isinstance(group_mask, (int, np.integer)):
        return int(group_mask)
    items = list(group_mask)
    if items and all(isinstance(x, (bool, np.bool_)) for x in items):
        return sum(1 << i for i, x in enumerate(items) if x)
    return sum(1 << int(i) for i in set(items))


def apply_patches(model: PatchedPredictor, base_score: float, group_mask) -> float:
    """Replay ``model``'s patch log on a single point.

    ``group_mask`` is an integer bitset, a sequence of booleans, or an
    iterable of group indices. Bin membership is tested on the partially
    patched value, exactly as during fitting.
    """
    if not (0.0 <= base_score <= 1.0):
        raise ValueError(f"score {base_score} outside [0, 1]")
    bits = _mask_bits(group_mask)
    nb = num_bins(model.lam)
    v = float(base_score)
    for p in model.patches:
        if bits >> p.group_index & 1 and min(int(math.floor(v * nb)), nb - 1) == p.bin_index:
            v = min(max(v + p.shift, 0.0), 1.0)
    return v
