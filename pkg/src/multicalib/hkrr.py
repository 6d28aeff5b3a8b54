"""Iterative multicalibration by patching violating (group, bin) categories."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ConfigurationError,
    GroupCollection,
    Patch,
    PatchedPredictor,
    ScoredDataset,
    apply_patch,
    num_bins,
    score_bins,
)

ALPHA_GRID = (0.1, 0.05, 0.025, 0.0125)


@dataclass(frozen=True)
class HkrrConfig:
    alpha: float = 0.05
    lam: float = 0.1
    max_sweeps: int = 500
    shuffle_seed: int | None = None

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        num_bins(self.lam)
        if self.max_sweeps < 1:
            raise ConfigurationError("max_sweeps must be >= 1")

    def params(self) -> dict:
        out = {"alpha": self.alpha, "lambda": self.lam, "max_sweeps": self.max_sweeps}
        if self.shuffle_seed is not None:
            out["shuffle_seed"] = self.shuffle_seed
        return out


def hkrr_fit(
    calib: ScoredDataset,
    groups: GroupCollection,
    cfg: HkrrConfig = HkrrConfig(),
    return_scores: bool = False,
):
    """Fit the patch log on ``calib``.

    Each sweep visits groups in declaration order and bins in ascending order
    (or a per-sweep shuffled order when ``cfg.shuffle_seed`` is set). A
    category with more than ``lam * alpha * |g|`` members whose mean residual
    exceeds ``alpha`` in magnitude is shifted by that residual. The fit stops
    after a sweep without updates; hitting ``max_sweeps`` sets
    ``converged=False`` instead of raising.
    """
    if groups.n != calib.n:
        raise ValueError("group collection length differs from calibration set")
    nb = num_bins(cfg.lam)
    v = calib.scores.copy()
    y = calib.labels.astype(float)
    masks = np.asfortranarray(groups.masks)
    sizes = masks.sum(axis=0)
    thresholds = cfg.lam * cfg.alpha * sizes
    categories = [(g, b) for g in range(len(groups)) for b in range(nb)]
    rng = np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle_seed is not None else None

    patches: list[Patch] = []
    converged = False
    for _ in range(cfg.max_sweeps):
        order = categories if rng is None else [categories[i] for i in rng.permutation(len(categories))]
        updated = False
        bins = score_bins(v, nb)
        for g, b in order:
            if sizes[g] == 0:
                continue
            sel = masks[:, g] & (bins == b)
            cnt = int(sel.sum())
            if cnt <= thresholds[g]:
                continue
            delta = float(np.mean(y[sel]) - np.mean(v[sel]))
            if abs(delta) > cfg.alpha:
                patch = Patch(g, b, delta)
                apply_patch(v, masks, patch, nb, bins)
                patches.append(patch)
                updated = True
        if not updated:
            converged = True
            break

    model = PatchedPredictor(
        lam=cfg.lam,
        patches=tuple(patches),
        provenance={"method": "hkrr", **cfg.params()},
        group_names=groups.names,
        converged=converged,
    )
    if return_scores:
        return model, v
    return model
