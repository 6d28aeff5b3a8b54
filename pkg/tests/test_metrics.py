import math

import numpy as np
import pytest
from conftest import make_data
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import binned_ece_loop, smece_oracle

from multicalib import SmECEConfig, binned_ece, brier, cross_entropy, group_metric, smece
from multicalib.metrics import accuracy, group_metric_arrays, smece_at, smece_detail


def test_ece_examples():
    assert binned_ece([0.5] * 4, [1, 0, 1, 0]) == 0.0
    assert binned_ece([0.05, 0.05, 0.95, 0.95], [0, 1, 1, 1]) == pytest.approx(0.25, abs=1e-12)
    assert binned_ece([0, 1, 1, 0], [0, 1, 1, 0]) == 0.0


def test_ece_matches_loop_oracle(rng):
    for _ in range(50):
        n = int(rng.integers(1, 300))
        v = rng.random(n)
        y = (rng.random(n) < rng.random()).astype(int)
        assert binned_ece(v, y) == pytest.approx(binned_ece_loop(v.tolist(), y.tolist()), abs=1e-12)


@pytest.mark.parametrize("fn", [binned_ece, smece, brier, cross_entropy, accuracy])
def test_empty_input_rejected(fn):
    with pytest.raises(ValueError):
        fn([], [])


def test_simple_losses():
    assert cross_entropy([0.5] * 3, [1, 0, 1]) == pytest.approx(math.log(2))
    assert brier([0, 1, 1], [0, 1, 1]) == 0.0
    assert cross_entropy([0.0], [1]) == pytest.approx(-math.log(1e-6), abs=1e-9)
    assert cross_entropy([0.0], [1]) == pytest.approx(13.8155, abs=1e-4)
    assert accuracy([0.5, 0.51, 0.2], [1, 1, 0]) == pytest.approx(2 / 3)


def test_smece_constant_closed_form():
    assert smece([0.5] * 4, [1, 1, 1, 0]) == pytest.approx(0.25, abs=1e-6)
    # the smoothed field of a constant residual is constant for every bandwidth
    for s in (0.01, 0.1, 0.5):
        assert smece_at([0.5] * 4, [1, 1, 1, 0], s) == pytest.approx(0.25, abs=1e-9)


def test_smece_perfect_predictor():
    r = smece_detail([0, 1, 1, 0, 1], [0, 1, 1, 0, 1])
    assert r.value <= SmECEConfig().fixpoint_tolerance


def test_smece_fixed_point():
    rng = np.random.default_rng(3)
    v = rng.random(300)
    y = (rng.random(300) < v**2).astype(int)
    r = smece_detail(v, y)
    assert r.converged
    assert abs(r.value - r.sigma) < 2e-4


def test_smece_matches_dense_grid_oracle():
    rng = np.random.default_rng(11)
    for _ in range(4):
        v = rng.random(200)
        y = (rng.random(200) < np.clip(v + rng.normal(0, 0.2), 0, 1)).astype(float)
        assert smece(v, y) == pytest.approx(smece_oracle(v, y), abs=1e-3)


def test_smece_kernel_at_fixed_bandwidth_matches_oracle():
    from oracles import smoothed_error

    rng = np.random.default_rng(5)
    v = rng.random(100)
    y = (rng.random(100) < 0.3).astype(float)
    for s in (0.02, 0.1, 0.4):
        assert smece_at(v, y, s) == pytest.approx(smoothed_error(v, y, s), abs=2e-4)


def test_smece_boundary_case_flagged():
    # zero residual: error 0 at the smallest bandwidth, the fixed point sits on the boundary
    r = smece_detail([0.0, 1.0], [0, 1])
    assert not r.converged and r.sigma == SmECEConfig().sigma_bounds[0]


def test_smece_config_validation():
    with pytest.raises(ValueError):
        SmECEConfig(grid_points=2)
    with pytest.raises(ValueError):
        SmECEConfig(sigma_bounds=(0.5, 0.1))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_smece_bounded(pairs):
    v = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    s = smece(v, y)
    assert 0.0 <= s <= 1.0
    # smoothing never increases absolute residual mass beyond the unsmoothed mean |y - v|
    assert s <= np.mean(np.abs(np.subtract(y, v))) + 1e-9


def test_group_metric_examples():
    data, _ = make_data([0.3, 0.7, 0.5, 0.5], [0, 1, 1, 0])
    rep = group_metric("ece", data)
    assert rep.max_value == rep.overall

    # group a perfectly calibrated, group b constant residual 0.2
    scores = [0.5, 0.5, 0.5, 0.5, 0.6, 0.6, 0.6, 0.6, 0.6]
    labels = [1, 0, 1, 0, 1, 1, 1, 1, 0]
    masks = np.array([[1, 0]] * 4 + [[0, 1]] * 5, dtype=bool)
    data, groups = make_data(scores, labels, masks, ("a", "b"))
    rep = group_metric("ece", data, groups)
    assert rep.max_value == pytest.approx(0.2)
    assert rep.argmax_group == "b"
    rep = group_metric("smece", data, groups)
    assert rep.max_value == pytest.approx(0.2, abs=1e-6) and rep.argmax_group == "b"


def test_group_metric_overlapping_groups():
    scores = np.array([0.2, 0.4, 0.6])
    labels = np.array([1, 0, 1])
    masks = np.array([[1, 1], [1, 0], [0, 1]], dtype=bool)
    rep = group_metric_arrays("brier", scores, labels, masks, ("a", "b"))
    assert rep.per_group[0].value == pytest.approx(brier(scores[:2], labels[:2]))
    assert rep.per_group[1].value == pytest.approx(brier(scores[[0, 2]], labels[[0, 2]]))
    assert [g.count for g in rep.per_group] == [2, 2]


def test_group_metric_empty_group():
    with pytest.raises(ValueError):
        group_metric_arrays("ece", np.array([0.5]), np.array([1]), np.zeros((1, 1), bool), ("a",))


def test_unknown_metric():
    with pytest.raises(ValueError):
        group_metric_arrays("auc", np.array([0.5]), np.array([1]), np.ones((1, 1), bool), ("a",))
