import math

import numpy as np
import pytest

from patchqnn.algorithms.optim.adam import AdamState, adam_step
from patchqnn.algorithms.optim.schedule import LrSchedule, lr_at
from patchqnn.utils.exceptions import NumericalError


def test_zero_gradient_keeps_params():
    params = np.array([1.0, -2.0, 3.0])
    new, state = adam_step(AdamState.zeros(3), params, np.zeros(3), 0.1)
    np.testing.assert_array_equal(new, params)
    assert state.t == 1


def test_first_step_is_signed_lr():
    params = np.array([0.5, 0.5])
    new, _ = adam_step(AdamState.zeros(2), params, np.array([3.0, -0.02]), 0.01)
    np.testing.assert_allclose(new - params, [-0.01, 0.01], rtol=1e-5)


def test_zero_lr_updates_moments_only():
    params = np.array([1.0])
    new, state = adam_step(AdamState.zeros(1), params, np.array([2.0]), 0.0)
    np.testing.assert_array_equal(new, params)
    assert state.m[0] == pytest.approx(0.2)
    assert state.v[0] == pytest.approx(0.004)


def test_matches_reference_recursion():
    rng = np.random.default_rng(0)
    theta = rng.normal(size=4)
    m = np.zeros(4)
    v = np.zeros(4)
    state = AdamState.zeros(4)
    ours = theta.copy()
    for t in range(1, 6):
        g = rng.normal(size=4)
        m = 0.9 * m + (1 - 0.9) * g
        v = 0.999 * v + (1 - 0.999) * g * g
        theta = theta - 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
        ours, state = adam_step(state, ours, g, 0.05)
    np.testing.assert_allclose(ours, theta, rtol=1e-13, atol=1e-15)
    assert state.t == 5


def test_concatenated_blocks_equal_separate_runs():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=3), rng.normal(size=2)
    sa, sb, s = AdamState.zeros(3), AdamState.zeros(2), AdamState.zeros(5)
    joint = np.concatenate([a, b])
    for _ in range(4):
        ga, gb = rng.normal(size=3), rng.normal(size=2)
        a, sa = adam_step(sa, a, ga, 0.01)
        b, sb = adam_step(sb, b, gb, 0.01)
        joint, s = adam_step(s, joint, np.concatenate([ga, gb]), 0.01)
    np.testing.assert_array_equal(joint, np.concatenate([a, b]))


def test_adam_errors():
    with pytest.raises(NumericalError):
        adam_step(AdamState.zeros(2), np.zeros(2), np.array([np.nan, 0.0]), 0.1)
    with pytest.raises(ValueError):
        adam_step(AdamState.zeros(2), np.zeros(3), np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        adam_step(AdamState.zeros(2), np.zeros(2), np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        AdamState(np.zeros(2), np.zeros(3))


def test_cosine_schedule_endpoints():
    s = LrSchedule(1e-2, epochs=50)
    assert lr_at(s, 0) == pytest.approx(1e-2)
    assert lr_at(s, 25) == pytest.approx(5e-3)
    assert lr_at(s, 50) == pytest.approx(0.0, abs=1e-18)
    assert lr_at(s, 80) == pytest.approx(0.0, abs=1e-18)
    rates = [lr_at(s, e) for e in range(51)]
    assert all(x >= y for x, y in zip(rates, rates[1:]))


def test_cosine_schedule_with_floor_and_restarts():
    s = LrSchedule(1e-2, lr_min=1e-3, epochs=50)
    assert lr_at(s, 50) == pytest.approx(1e-3)
    r = LrSchedule(1e-2, epochs=50, restart_period=10)
    assert lr_at(r, 10) == pytest.approx(1e-2)
    assert lr_at(r, 15) == pytest.approx(lr_at(r, 5))
    assert lr_at(r, 5) == pytest.approx(0.5e-2 * (1 + math.cos(math.pi / 2)))


def test_schedule_validation():
    with pytest.raises(ValueError):
        LrSchedule(1e-3, lr_min=1e-3)
    with pytest.raises(ValueError):
        LrSchedule(1e-3, restart_period=0)
    with pytest.raises(ValueError):
        lr_at(LrSchedule(1e-3), -1)
