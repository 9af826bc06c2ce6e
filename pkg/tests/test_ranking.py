import numpy as np
import pytest

from atlaslab import (InputError, capital_distribution_curve,
                      rank_permutation, ranked_series)

from conftest import weights_from_log_caps, weights_from_log_weights


def test_rank_permutation_basic():
    rank_of, name_at = rank_permutation([3.0, 1.0, 2.0])
    assert rank_of.tolist() == [0, 2, 1]
    assert name_at.tolist() == [0, 2, 1]


def test_rank_permutation_tie_broken_by_index():
    rank_of, _ = rank_permutation([2.0, 2.0, 1.0])
    assert rank_of.tolist() == [0, 1, 2]


def test_rank_permutation_single_value():
    rank_of, name_at = rank_permutation([5.0])
    assert rank_of.tolist() == [0] and name_at.tolist() == [0]


def test_rank_permutation_rejects_non_finite():
    with pytest.raises(InputError, match="index 1"):
        rank_permutation([1.0, np.inf])


def test_permutations_mutually_inverse_random():
    rng = np.random.default_rng(2)
    for _ in range(50):
        values = rng.normal(size=int(rng.integers(1, 12)))
        rank_of, name_at = rank_permutation(values)
        n = values.size
        assert np.array_equal(name_at[rank_of], np.arange(n))
        assert np.array_equal(rank_of[name_at], np.arange(n))


def test_rank_permutation_shift_invariant():
    rng = np.random.default_rng(4)
    values = rng.normal(size=9)
    base, _ = rank_permutation(values)
    shifted, _ = rank_permutation(values + 123.456)
    assert np.array_equal(base, shifted)


def test_capital_distribution_curve_sorted():
    w = weights_from_log_caps(np.log([[0.2, 0.5, 0.3], [0.2, 0.5, 0.3]]))
    curve = capital_distribution_curve(w, 0)
    assert np.allclose(curve.ranked_weights, [0.5, 0.3, 0.2], atol=1e-15)
    assert np.allclose(curve.log_rank, np.log([1.0, 2.0, 3.0]))
    assert np.allclose(curve.log_weight, np.log(curve.ranked_weights))


def test_capital_distribution_flat_for_equal_weights():
    w = weights_from_log_caps(np.zeros((2, 3)))
    curve = capital_distribution_curve(w, 1)
    assert np.allclose(curve.ranked_weights, 1.0 / 3.0, atol=1e-15)


def test_capital_distribution_out_of_range():
    w = weights_from_log_caps(np.zeros((2, 3)))
    with pytest.raises(InputError, match="out of range"):
        capital_distribution_curve(w, 5)


def test_curve_shape_stable_across_independent_runs():
    """Kolmogorov distance between curves from two independent long runs."""
    from atlaslab import (FirstOrderParams, SimulationConfig,
                          compute_weights, simulate_first_order)

    n = 5
    g = 0.4 * (np.arange(1, n + 1) - 3.0)
    params = FirstOrderParams(g=g - g.mean(), sigma=np.full(n, 0.25))

    def final_curve(seed):
        config = SimulationConfig(n_steps=50_000, seed=seed, burn_in=5_000)
        weights = compute_weights(simulate_first_order(params, config))
        return capital_distribution_curve(weights, weights.n_steps - 1)

    a, b = final_curve(101), final_curve(202)
    ks = np.abs(np.cumsum(a.ranked_weights)
                - np.cumsum(b.ranked_weights)).max()
    assert ks < 0.05


def test_ranked_series_no_crossing_is_column_reorder():
    w = weights_from_log_caps(np.log([[1.0, 4.0, 2.0]] * 4))
    ranked = ranked_series(w)
    expected = np.sort(w.log_weights, axis=1)[:, ::-1]
    assert np.array_equal(ranked, expected)
    assert np.array_equal(w.name_at[0], [1, 2, 0])


def test_ranked_series_single_row():
    w = weights_from_log_weights(np.log([[0.7, 0.3]]))
    assert np.allclose(ranked_series(w)[0], np.log([0.7, 0.3]), atol=1e-15)


def test_ranked_series_continuous_through_swap():
    # Hand-built 3-step series where the two assets swap at the last step:
    # the ranked rows stay sorted and change smoothly even as names flip.
    lw = np.log(np.array([
        [0.60, 0.40],
        [0.51, 0.49],
        [0.45, 0.55],
    ]))
    w = weights_from_log_weights(lw)
    ranked = ranked_series(w)
    assert np.allclose(ranked[:, 0], np.log([0.60, 0.51, 0.55]), atol=1e-15)
    assert np.allclose(ranked[:, 1], np.log([0.40, 0.49, 0.45]), atol=1e-15)
    assert np.array_equal(w.name_at[:, 0], [0, 0, 1])
    # largest jump in the ranked top path is smaller than the name jump
    name_jump = abs(lw[2, 0] - lw[1, 0])
    ranked_jump = abs(ranked[2, 0] - ranked[1, 0])
    assert ranked_jump < name_jump


def test_ranked_rows_non_increasing(atlas5_weights):
    ranked = ranked_series(atlas5_weights)
    assert np.all(np.diff(ranked, axis=1) <= 0.0)
