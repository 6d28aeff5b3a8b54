import math

import numpy as np
import pytest
from conftest import make_data

from multicalib import ConfigurationError, HjzConfig, PatchedPredictor, event_payoffs, hjz_fit, online_update
from multicalib.hjz import PAIRS, EventSpace, hjz_grid


def test_payoff_example():
    masks = np.ones((4, 1), bool)
    pay = event_payoffs([0.32] * 4, [1, 1, 1, 0], masks)
    space = EventSpace(1, 10)
    assert pay[space.index(0, 3, +1)] == pytest.approx(0.43, abs=1e-12)
    assert pay[space.index(0, 3, -1)] == pytest.approx(-0.43, abs=1e-12)
    assert np.count_nonzero(pay) == 2


def test_payoffs_zero_when_perfect():
    masks = np.ones((4, 2), bool)
    assert not np.any(event_payoffs([0, 1, 1, 0], [0, 1, 1, 0], masks))


def test_event_space_order():
    space = EventSpace(2, 10)
    assert len(space) == 40
    assert [space.index(*e) for e in space.events] == list(range(40))


def test_online_update_examples():
    w = np.array([0.25, 0.25, 0.5])
    assert np.allclose(online_update(w, [0.7, 0.7, 0.7], "hedge", 0.5), w)
    assert np.allclose(online_update([0.5, 0.5], [1, 0], "hedge", math.log(2)), [2 / 3, 1 / 3])
    assert online_update([0.98], [1.0], "gradient_descent", 0.1).tolist() == [1.0]
    # prod: feedback -10 is clipped to -1 / (2 * 0.5) = -1, so w ~ [0.5 * 0.5, 0.5]
    out = online_update([0.5, 0.5], [-10.0, 0.0], "prod", 0.5)
    assert np.allclose(out, [1 / 3, 2 / 3])
    # optimistic hedge uses 2 fb_t - fb_{t-1}
    a = online_update([0.5, 0.5], [1, 0], "optimistic_hedge", 0.3, prev_feedback=[0.5, 0])
    b = online_update([0.5, 0.5], [1.5, 0], "hedge", 0.3)
    assert np.allclose(a, b)


def test_online_update_rejects_non_simplex():
    with pytest.raises(ValueError):
        online_update([0.5, 0.6], [0, 0], "hedge", 0.1)
    with pytest.raises(ValueError):
        online_update([1.2, -0.2], [0, 0], "prod", 0.1)
    with pytest.raises(ValueError):
        online_update([0.5, 0.5], [0, 0], "hedge", 0.0)


def test_grid_sizes():
    assert len(hjz_grid(dedup=False)) == 36
    grid = hjz_grid()
    assert len(grid) == 20
    assert sum(c.adversary == "best_response" for c in grid) == 8
    assert {(c.learner, c.adversary) for c in grid} == set(PAIRS)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        HjzConfig(learner="prod", adversary="hedge")
    with pytest.raises(ConfigurationError):
        HjzConfig(rounds=0)
    with pytest.raises(ConfigurationError):
        HjzConfig(learner_decay=1.5)


def scalar_recurrence(v, ybar, eta0, decay, rounds):
    for t in range(1, rounds + 1):
        r = ybar - v
        if r == 0:
            continue
        v = min(max(v + eta0 * decay**t * math.copysign(1.0, r), 0.0), 1.0)
    return v


@pytest.mark.parametrize("v0,k,decay", [(0.2, 7, 0.9), (0.81, 3, 0.95), (0.5, 5, 0.9), (0.6, 6, 0.95)])
def test_gradient_descent_scalar_recurrence(v0, k, decay):
    labels = [1] * k + [0] * (10 - k)
    data, groups = make_data([v0] * 10, labels)
    cfg = HjzConfig("gradient_descent", "best_response", learner_decay=decay, rounds=30)
    _, v = hjz_fit(data, groups, cfg, return_scores=True)
    expected = scalar_recurrence(v0, k / 10, 1.0, decay, 30)
    assert np.all(v == v[0])
    assert abs((k / 10 - v[0]) - (k / 10 - expected)) <= 1e-9


@pytest.mark.parametrize("pair", PAIRS)
def test_zero_violation_fixed_point(pair):
    masks = np.array([[1, 0], [1, 1], [0, 1], [1, 1]], bool)
    data, groups = make_data([0, 1, 1, 0], [0, 1, 1, 0], masks)
    model, v = hjz_fit(data, groups, HjzConfig(*pair), return_scores=True)
    assert model.patches == ()
    assert v.tolist() == [0, 1, 1, 0]


def test_simplex_preserved_every_round(rng):
    n = 600
    masks = rng.random((n, 3)) < 0.5
    v = rng.random(n)
    y = (rng.random(n) < np.clip(v + 0.2 * masks[:, 0], 0, 1)).astype(int)
    data, groups = make_data(v, y, masks)
    for pair in PAIRS:
        seen = []

        def cb(t, payoffs, p, before, w):
            seen.append(t)
            if pair[1] == "best_response":
                assert p.sum() in (0.0, 1.0) and np.count_nonzero(p) <= 1
            else:
                assert abs(p.sum() - 1) < 1e-9 and p.min() >= 0
            if w is not None:
                assert np.allclose(w.sum(axis=-1), 1, atol=1e-9) and w.min() >= 0

        hjz_fit(data, groups, HjzConfig(*pair), callback=cb)
        assert seen == list(range(1, 31))


def test_best_response_ties_pick_lowest_index():
    masks = np.ones((2, 2), bool)
    seen = []
    data, groups = make_data([0.35, 0.35], [1, 1], masks)
    hjz_fit(data, groups, HjzConfig(rounds=1), callback=lambda t, pay, p, v, w: seen.append(int(np.argmax(p))))
    assert seen == [EventSpace(2, 10).index(0, 3, +1)]


@pytest.mark.parametrize("pair", PAIRS)
def test_replay_exact(pair, rng):
    n = 1000
    masks = rng.random((n, 3)) < 0.5
    v = rng.random(n)
    y = (rng.random(n) < np.clip(v - 0.2 * masks[:, 1], 0, 1)).astype(int)
    data, groups = make_data(v, y, masks)
    model, fitted = hjz_fit(data, groups, HjzConfig(*pair), return_scores=True)
    again = PatchedPredictor.from_dict(model.to_dict())
    assert again.predict_dataset(data).tobytes() == fitted.tobytes()


def test_best_response_reduces_violation(rng):
    from multicalib.metrics import group_metric_arrays

    n = 5000
    masks = rng.random((n, 2)) < 0.5
    p = rng.random(n)
    y = (rng.random(n) < p).astype(int)
    v = np.clip(p + 0.2 * masks[:, 0], 0, 1)
    data, groups = make_data(v, y, masks)
    _, out = hjz_fit(data, groups, HjzConfig("hedge", "best_response"), return_scores=True)
    before = group_metric_arrays("ece", v, y, masks, groups.names).max_value
    after = group_metric_arrays("ece", out, y, masks, groups.names).max_value
    assert after < before


def test_best_response_picks_maximal_event_exhaustively(rng):
    n = 60
    masks = rng.random((n, 2)) < 0.6
    v = rng.random(n)
    y = rng.integers(0, 2, n)
    data, groups = make_data(v, y, masks)

    def cb(t, payoffs, p, before, w):
        recomputed = event_payoffs(before, y, masks)
        assert np.array_equal(recomputed, payoffs)
        if p.any():
            e = int(np.flatnonzero(p)[0])
            assert all(payoffs[e] >= payoffs[j] for j in range(len(payoffs)))
            assert all(payoffs[j] < payoffs[e] for j in range(e))
        else:
            assert payoffs.max() <= 0

    hjz_fit(data, groups, HjzConfig("hedge", "best_response"), callback=cb)


@pytest.mark.parametrize("learner", ["hedge", "prod", "optimistic_hedge", "gradient_descent"])
def test_single_category_toy_does_not_diverge(learner):
    data, groups = make_data([0.32] * 10, [1] * 7 + [0] * 3)
    seen = []
    _, v = hjz_fit(
        data, groups, HjzConfig(learner, "best_response"), callback=lambda t, pay, p, b, w: seen.append(pay.max()),
        return_scores=True,
    )
    final = event_payoffs(v, data.labels, groups.masks).max()
    assert final <= seen[0]
    assert np.all((v >= 0) & (v <= 1))
