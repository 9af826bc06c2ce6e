import numpy as np
import pytest

from atlaslab import (DEFAULT_DT, FirstOrderParams, MarketHistory,
                      SecondOrderParams, SimulationConfig, WeightHistory,
                      compute_weights, rank_permutations,
                      simulate_first_order, simulate_second_order)


def history_from_log_caps(log_caps, dt=DEFAULT_DT) -> MarketHistory:
    log_caps = np.asarray(log_caps, dtype=float)
    T, n = log_caps.shape
    times = np.arange(T) * dt * 250.0
    names = tuple(f"A{i + 1}" for i in range(n))
    return MarketHistory(times=times, log_caps=log_caps, names=names, dt=dt)


def weights_from_log_caps(log_caps, dt=DEFAULT_DT) -> WeightHistory:
    return compute_weights(history_from_log_caps(log_caps, dt=dt))


def weights_from_log_weights(log_weights, dt=DEFAULT_DT) -> WeightHistory:
    log_weights = np.asarray(log_weights, dtype=float)
    rank_of, name_at = rank_permutations(log_weights)
    return WeightHistory(log_weights=log_weights, rank_of=rank_of,
                         name_at=name_at, dt=dt)


def random_weights(n_steps, n_assets, seed, dt=DEFAULT_DT) -> WeightHistory:
    """Random-walk capitalizations; a generic irregular test input."""
    rng = np.random.default_rng(seed)
    log_caps = np.cumsum(0.02 * rng.standard_normal((n_steps, n_assets)),
                         axis=0)
    return weights_from_log_caps(log_caps, dt=dt)


@pytest.fixture(scope="session")
def atlas2_weights() -> WeightHistory:
    """Two-stock rank model, 300 years: enough for ~2% estimator accuracy."""
    params = FirstOrderParams(g=[-0.5, 0.5], sigma=[0.3, 0.3])
    config = SimulationConfig(n_steps=75_000, seed=11, burn_in=7_500)
    return compute_weights(simulate_first_order(params, config))


@pytest.fixture(scope="session")
def atlas5_weights() -> WeightHistory:
    """Five-stock rank model, 200 years."""
    n = 5
    g = 0.1 * (np.arange(1, n + 1) - (n + 1) / 2.0)
    params = FirstOrderParams(g=g - g.mean(), sigma=np.full(n, 0.3))
    config = SimulationConfig(n_steps=50_000, seed=5, burn_in=5_000)
    return compute_weights(simulate_first_order(params, config))


@pytest.fixture(scope="session")
def hybrid6_weights() -> WeightHistory:
    """Six-stock name-plus-rank model, 200 years, for closed-loop sanity."""
    n = 6
    gamma = np.linspace(-0.03, 0.03, n)
    g = np.linspace(-0.2, 0.2, n)
    sigma = np.linspace(0.25, 0.35, n)
    params = SecondOrderParams(gamma=gamma - gamma.mean(),
                               g=g - g.mean(), sigma=sigma)
    config = SimulationConfig(n_steps=50_000, seed=17, burn_in=5_000)
    return compute_weights(simulate_second_order(params, config))
