import itertools

import numpy as np
import pytest

from atlaslab import (FirstOrderParams, InputError, MarketHistory,
                      SecondOrderParams, compute_weights,
                      validate_first_order, validate_second_order)

from conftest import history_from_log_caps, weights_from_log_caps


def test_equal_caps_give_equal_weights():
    w = weights_from_log_caps(np.log([[1.0, 1.0], [1.0, 1.0]]))
    assert np.allclose(np.exp(w.log_weights), 0.5, atol=1e-15)


def test_three_to_one_caps():
    w = weights_from_log_caps(np.log([[3.0, 1.0], [3.0, 1.0]]))
    assert np.allclose(np.exp(w.log_weights), [[0.75, 0.25]] * 2, atol=1e-15)


def test_weights_sum_to_one_on_random_input():
    rng = np.random.default_rng(1)
    w = weights_from_log_caps(rng.normal(scale=5.0, size=(40, 7)))
    sums = np.exp(w.log_weights).sum(axis=1)
    assert np.abs(sums - 1.0).max() < 1e-12


def test_weights_stable_for_extreme_caps():
    w = weights_from_log_caps([[800.0, 0.0], [0.0, -800.0]])
    assert np.all(np.isfinite(w.log_weights))
    assert np.abs(np.exp(w.log_weights).sum(axis=1) - 1.0).max() < 1e-12


def test_non_finite_cap_rejected_with_location():
    log_caps = np.zeros((3, 2))
    log_caps[1, 1] = np.nan
    with pytest.raises(InputError, match=r"t=1.*i=1"):
        history_from_log_caps(log_caps)


def test_history_needs_two_steps_and_two_assets():
    with pytest.raises(InputError, match="2 time steps"):
        history_from_log_caps(np.zeros((1, 3)))
    with pytest.raises(InputError, match="2 assets"):
        history_from_log_caps(np.zeros((3, 1)))


def test_history_rejects_irregular_times():
    with pytest.raises(InputError, match="uniform"):
        MarketHistory(times=np.array([0.0, 1.0, 3.0]),
                      log_caps=np.zeros((3, 2)), names=("a", "b"))
    with pytest.raises(InputError, match="increasing"):
        MarketHistory(times=np.array([0.0, 2.0, 1.0]),
                      log_caps=np.zeros((3, 2)), names=("a", "b"))


def test_validate_first_order_examples():
    ok = validate_first_order(FirstOrderParams(g=[-1.0, 1.0], sigma=[1, 1]))
    assert ok.valid and not ok.failures

    bad = validate_first_order(FirstOrderParams(g=[1.0, -1.0], sigma=[1, 1]))
    assert not bad.valid
    assert any("rank 1" in f for f in bad.failures)

    ok3 = validate_first_order(
        FirstOrderParams(g=[-2.0, 1.0, 1.0], sigma=[1, 1, 1]))
    assert ok3.valid


def test_validate_first_order_flags_all_conditions():
    report = validate_first_order(
        FirstOrderParams(g=[0.5, 1.0], sigma=[1.0, 0.0]))
    assert not report.valid
    assert len(report.failures) == 3  # zero sum, partial sum, sigma


def test_params_reject_length_mismatch():
    with pytest.raises(InputError):
        FirstOrderParams(g=[-1.0, 1.0], sigma=[1.0])
    with pytest.raises(InputError):
        SecondOrderParams(gamma=[0.0], g=[-1.0, 1.0], sigma=[1.0, 1.0])


def test_validate_second_order_examples():
    n = 3
    atlas = SecondOrderParams(gamma=np.zeros(n), g=[-2.0, 0.5, 1.5],
                              sigma=np.ones(n))
    assert validate_second_order(atlas).valid

    bad = SecondOrderParams(gamma=[2.0, -2.0], g=[-1.0, 1.0],
                            sigma=[1.0, 1.0])
    report = validate_second_order(bad)
    assert not report.valid
    assert any("rank 1" in f for f in report.failures)

    ok = SecondOrderParams(gamma=[0.5, 0.0, -0.5], g=[-3.0, 1.0, 2.0],
                           sigma=np.ones(3))
    assert validate_second_order(ok).valid


def _stable_under_every_permutation(gamma, g) -> bool:
    n = len(g)
    for perm in itertools.permutations(range(n)):
        partial = 0.0
        for m in range(n - 1):
            partial += g[m] + gamma[perm[m]]
            if partial >= 0:
                return False
    return True


def test_second_order_matches_enumeration_oracle():
    rng = np.random.default_rng(7)
    agree = 0
    for _ in range(300):
        n = int(rng.integers(2, 7))
        gamma = rng.normal(scale=0.5, size=n)
        gamma -= gamma.mean()
        g = rng.normal(scale=1.0, size=n)
        g -= g.mean()
        params = SecondOrderParams(gamma=gamma, g=g, sigma=np.ones(n))
        fast = validate_second_order(params).valid
        slow = _stable_under_every_permutation(gamma, g)
        assert fast == slow
        agree += fast
    assert 0 < agree < 300  # the draw actually exercises both outcomes


def test_first_order_equals_second_order_with_zero_gamma():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(2, 8))
        g = rng.normal(size=n)
        g -= g.mean()
        sigma = rng.uniform(0.1, 1.0, size=n)
        first = validate_first_order(FirstOrderParams(g=g, sigma=sigma))
        second = validate_second_order(
            SecondOrderParams(gamma=np.zeros(n), g=g, sigma=sigma))
        assert first.valid == second.valid


def test_zero_sum_tolerance_is_tight():
    report = validate_first_order(
        FirstOrderParams(g=[-1.0, 1.0 + 1e-6], sigma=[1.0, 1.0]))
    assert not report.valid
    assert any("sums to" in f for f in report.failures)


def test_weight_history_immutable(atlas2_weights):
    with pytest.raises(ValueError):
        atlas2_weights.log_weights[0, 0] = 0.0
