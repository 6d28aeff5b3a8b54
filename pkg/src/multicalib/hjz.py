"""Multicalibration as a game between a no-regret learner and a violation-seeking adversary.

The adversary plays over signed events ``(group, bin, sign)``; an event's
payoff is ``sign * sum_{i in g, bin(v_i) = b} (y_i - v_i) / n``. The learner
answers with one correction per (group, bin) category. Gradient descent moves
the category by ``eta * q`` where ``q`` is the adversary's net signed mass on
the category; the multiplicative learners keep a distribution over the value
grid ``{lam/2, 3lam/2, ...}`` per category and move the category by the change
in that distribution's mean. Every move is recorded as a ``Patch`` and applied
with the same replay routine used at inference time.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

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

LEARNERS = ("hedge", "prod", "optimistic_hedge", "gradient_descent")
ADVERSARIES = ("best_response", "hedge", "optimistic_hedge")
PAIRS = (
    ("hedge", "best_response"),
    ("prod", "best_response"),
    ("optimistic_hedge", "best_response"),
    ("gradient_descent", "best_response"),
    ("hedge", "hedge"),
    ("optimistic_hedge", "optimistic_hedge"),
)
LEARNER_DECAYS = (0.9, 0.95)
ADVERSARY_DECAYS = (0.9, 0.95, 0.98)

SIMPLEX_TOL = 1e-9
# payoffs are means over n samples; anything this small is summation round-off
PAYOFF_TOL = 1e-12


@dataclass(frozen=True)
class HjzConfig:
    learner: str = "hedge"
    adversary: str = "best_response"
    learner_decay: float = 0.9
    adversary_decay: float = 0.9
    rounds: int = 30
    lam: float = 0.1
    eta0_learner: float = 1.0
    eta0_adversary: float = 1.0

    def __post_init__(self):
        if (self.learner, self.adversary) not in PAIRS:
            raise ConfigurationError(f"unsupported learner/adversary pair ({self.learner}, {self.adversary})")
        num_bins(self.lam)
        if self.rounds < 1:
            raise ConfigurationError("rounds must be >= 1")
        if self.eta0_learner <= 0 or self.eta0_adversary <= 0:
            raise ConfigurationError("initial learning rates must be positive")
        for d in (self.learner_decay, self.adversary_decay):
            if not (0 < d <= 1):
                raise ConfigurationError(f"decay {d} outside (0, 1]")

    def params(self) -> dict:
        out = {
            "learner": self.learner,
            "adversary": self.adversary,
            "learner_decay": self.learner_decay,
            "rounds": self.rounds,
            "lambda": self.lam,
            "eta0_learner": self.eta0_learner,
        }
        if self.adversary != "best_response":
            out["adversary_decay"] = self.adversary_decay
            out["eta0_adversary"] = self.eta0_adversary
        return out


def hjz_grid(dedup: bool = True) -> list[HjzConfig]:
    """All (pair, learner decay, adversary decay) combinations.

    Best-response adversaries have no learning rate, so with ``dedup`` their
    adversary-decay variants collapse to one run.
    """
    out: list[HjzConfig] = []
    seen = set()
    for (learner, adversary), ld, ad in itertools.product(PAIRS, LEARNER_DECAYS, ADVERSARY_DECAYS):
        cfg = HjzConfig(learner, adversary, ld, ad)
        key = tuple(sorted(cfg.params().items()))
        if dedup and key in seen:
            continue
        seen.add(key)
        out.append(cfg)
    return out


@dataclass(frozen=True)
class EventSpace:
    n_groups: int
    n_bins: int

    def __len__(self) -> int:
        return 2 * self.n_groups * self.n_bins

    def index(self, group: int, bin_: int, sign: int) -> int:
        return (group * self.n_bins + bin_) * 2 + (0 if sign > 0 else 1)

    @property
    def events(self) -> list[tuple[int, int, int]]:
        return [(g, b, s) for g in range(self.n_groups) for b in range(self.n_bins) for s in (1, -1)]


def _category_residuals(v, y, masks, nb):
    n = v.size
    bins = score_bins(v, nb)
    r = y - v
    out = np.empty((masks.shape[1], nb))
    for g in range(masks.shape[1]):
        sel = masks[:, g]
        out[g] = np.bincount(bins[sel], weights=r[sel], minlength=nb)
    return out / n


def event_payoffs(scores, labels, masks, lam: float = 0.1) -> np.ndarray:
    """Payoff of every signed event, ordered as ``EventSpace.events``."""
    v = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    masks = np.asarray(masks, dtype=bool)
    cat = _category_residuals(v, y, masks, num_bins(lam))
    return np.stack([cat, -cat], axis=-1).ravel()


def _check_simplex(w: np.ndarray) -> None:
    if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError("weights must be a probability vector")


def online_update(state, feedback, alg: str, eta: float, prev_feedback=None) -> np.ndarray:
    """One step of a no-regret algorithm that maximises reward ``feedback``.

    Weight-based algorithms take and return a probability vector;
    ``gradient_descent`` takes a score vector and returns clipped scores.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    state = np.asarray(state, dtype=float)
    fb = np.asarray(feedback, dtype=float)
    if alg == "gradient_descent":
        return np.clip(state + eta * fb, 0.0, 1.0)
    _check_simplex(state)
    if alg == "optimistic_hedge":
        prev = np.zeros_like(fb) if prev_feedback is None else np.asarray(prev_feedback, dtype=float)
        fb = 2.0 * fb - prev
        alg = "hedge"
    if alg == "hedge":
        x = eta * fb
        w = state * np.exp(x - x.max())
    elif alg == "prod":
        w = state * (1.0 + eta * np.maximum(fb, -1.0 / (2.0 * eta)))
    else:
        raise ValueError(f"unknown online algorithm {alg!r}")
    return w / w.sum()


def _best_response(payoffs: np.ndarray) -> np.ndarray:
    p = np.zeros_like(payoffs)
    e = int(np.argmax(payoffs))  # first maximum == lowest index
    if payoffs[e] > PAYOFF_TOL:
        p[e] = 1.0
    return p


RoundCallback = Callable[[int, np.ndarray, np.ndarray, np.ndarray, "np.ndarray | None"], None]


def hjz_fit(
    calib: ScoredDataset,
    groups: GroupCollection,
    cfg: HjzConfig = HjzConfig(),
    callback: RoundCallback | None = None,
    return_scores: bool = False,
):
    """Run ``cfg.rounds`` rounds of the game starting from the base scores.

    Each round the adversary observes payoffs on the pre-update scores and
    picks a distribution over events (a best response abstains when no event
    has payoff above ``PAYOFF_TOL``). The learner then updates every category
    with nonzero net adversary mass, in (group, bin) order, each update
    applied as a patch.
    ``callback(round, payoffs, adversary_distribution, scores_before,
    learner_weights)`` is invoked once per round, after the learner update;
    ``learner_weights`` is the ``(G, nb, nb)`` array of per-category
    distributions, or None for gradient descent.
    """
    if groups.n != calib.n:
        raise ValueError("group collection length differs from calibration set")
    nb = num_bins(cfg.lam)
    G = len(groups)
    masks = np.asfortranarray(groups.masks)
    v = calib.scores.copy()
    y = calib.labels.astype(float)
    space = EventSpace(G, nb)

    adv_w = np.full(len(space), 1.0 / len(space)) if cfg.adversary != "best_response" else None
    prev_payoffs = np.zeros(len(space))
    values = (np.arange(nb) + 0.5) * cfg.lam
    learner_w = np.full((G, nb, nb), 1.0 / nb)
    learner_prev = np.zeros((G, nb, nb))

    patches: list[Patch] = []
    for t in range(1, cfg.rounds + 1):
        eta_l = cfg.eta0_learner * cfg.learner_decay**t
        eta_a = cfg.eta0_adversary * cfg.adversary_decay**t
        payoffs = event_payoffs(v, y, masks, cfg.lam)
        if cfg.adversary == "best_response":
            p = _best_response(payoffs)
        else:
            p = online_update(adv_w, payoffs, cfg.adversary, eta_a, prev_payoffs)
            adv_w = p
            prev_payoffs = payoffs
        v_before = v.copy() if callback is not None else None

        net = (p[0::2] - p[1::2]).reshape(G, nb)
        bins = score_bins(v, nb)
        for g, b in zip(*np.nonzero(net)):
            q = float(net[g, b])
            if not np.any(masks[:, g] & (bins == b)):
                continue
            if cfg.learner == "gradient_descent":
                shift = eta_l * q
            else:
                w = learner_w[g, b].copy()
                fb = q * values
                new_w = online_update(w, fb, cfg.learner, eta_l, learner_prev[g, b])
                learner_prev[g, b] = fb
                learner_w[g, b] = new_w
                shift = float(new_w @ values - w @ values)
            shift = min(max(shift, -1.0), 1.0)
            if shift == 0.0:
                continue
            patch = Patch(int(g), int(b), shift)
            apply_patch(v, masks, patch, nb, bins)
            patches.append(patch)
        if callback is not None:
            w = None if cfg.learner == "gradient_descent" else learner_w.copy()
            callback(t, payoffs, p, v_before, w)

    model = PatchedPredictor(
        lam=cfg.lam,
        patches=tuple(patches),
        provenance={"method": "hjz", **cfg.params()},
        group_names=groups.names,
        converged=True,
    )
    if return_scores:
        return model, v
    return model
