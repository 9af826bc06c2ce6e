"""Euler-Maruyama path generation for rank-based market models.

Within a step the ranks are frozen at their start-of-step values, so the
update for asset i at step t is

    dlog X_i = (gamma_i + g[rank_t(i)]) * dt + sigma[rank_t(i)] * sqrt(dt) * xi

with independent standard normal draws xi.  Paths are reproducible: the
noise matrix is drawn up front from numpy's seeded PCG64 generator and
the stepping loop is sequential, so identical (params, config) always
produce bit-identical output.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .core import (DEFAULT_DT, FirstOrderParams, MarketHistory,
                   SecondOrderParams)
from .errors import InputError

RNG_ALGORITHM = "numpy default_rng (PCG64)"


@dataclass(frozen=True)
class SimulationConfig:
    """Discretization settings for one simulated path."""

    n_steps: int
    dt: float = DEFAULT_DT
    seed: int = 0
    initial_log_caps: Optional[np.ndarray] = None
    burn_in: int = 0

    def __post_init__(self):
        if self.n_steps < 1:
            raise InputError("n_steps must be >= 1")
        if not (self.dt > 0):
            raise InputError("dt must be positive")
        if self.burn_in < 0:
            raise InputError("burn_in must be >= 0")

    @classmethod
    def stationary(cls, n_steps: int, **kwargs) -> "SimulationConfig":
        """Config with a 20% burn-in discarded before recording.

        The retained segment is treated as a draw from the stable weight
        distribution; this is an approximation noted in the run metadata.
        """
        return cls(n_steps=n_steps, burn_in=n_steps // 5, **kwargs)


@njit(cache=True)
def _euler_path(x0, gamma, g, sigma, dt, noise, out):  # pragma: no cover
    n = x0.shape[0]
    total = out.shape[0]
    sqdt = np.sqrt(dt)
    x = x0.copy()
    out[0] = x
    for t in range(total - 1):
        order = np.argsort(-x, kind="mergesort")  # stable: ties by index
        for k in range(n):
            i = order[k]
            x[i] = x[i] + (gamma[i] + g[k]) * dt + sigma[k] * sqdt * noise[t, i]
        out[t + 1] = x


def _params_digest(gamma, g, sigma, config) -> str:
    h = hashlib.sha256()
    for arr in (gamma, g, sigma):
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    h.update(f"{config.n_steps},{config.dt!r},{config.seed},{config.burn_in}".encode())
    if config.initial_log_caps is not None:
        h.update(np.ascontiguousarray(config.initial_log_caps, dtype=float).tobytes())
    return h.hexdigest()[:16]


def _reject_unusable(params: SecondOrderParams) -> None:
    """Structural parameter checks applied before any stepping.

    Zero drift sums and non-negative volatilities are required; the
    asymptotic-stability partial-sum conditions are deliberately not,
    so that degenerate sanity paths (zero noise, zero drift) can be
    integrated.  Stability remains the job of the validators.
    """
    problems = []
    for label, vec in (("g", params.g), ("gamma", params.gamma)):
        total = float(vec.sum())
        if abs(total) > 1e-9 * max(1.0, float(np.abs(vec).max())):
            problems.append(f"{label} sums to {total!r}, not 0")
    if np.any(params.sigma < 0):
        problems.append("sigma has negative entries")
    if problems:
        raise InputError("unusable parameters: " + "; ".join(problems))


def simulate_second_order(params: SecondOrderParams,
                          config: SimulationConfig) -> MarketHistory:
    """Simulate a name-plus-rank model path; burn-in steps are discarded."""
    _reject_unusable(params)
    n = params.n
    if config.initial_log_caps is None:
        x0 = np.zeros(n)
    else:
        x0 = np.asarray(config.initial_log_caps, dtype=float)
        if x0.shape != (n,):
            raise InputError("initial_log_caps length does not match n")
        if not np.all(np.isfinite(x0)):
            raise InputError("initial_log_caps contains non-finite entries")
    total = config.burn_in + config.n_steps
    if total < 2:
        raise InputError("need at least 2 recorded or burned steps")
    rng = np.random.default_rng(config.seed)
    noise = rng.standard_normal((total - 1, n))
    out = np.empty((total, n))
    _euler_path(x0, params.gamma, params.g, params.sigma,
                config.dt, noise, out)
    log_caps = out[config.burn_in:]
    if log_caps.shape[0] < 2:
        raise InputError("burn_in leaves fewer than 2 recorded steps")
    days = config.dt * 250.0
    times = np.arange(log_caps.shape[0]) * days
    names = tuple(f"A{i + 1}" for i in range(n))
    meta = {
        "seed": config.seed,
        "dt": config.dt,
        "burn_in": config.burn_in,
        "rng": RNG_ALGORITHM,
        "params_sha256_16": _params_digest(params.gamma, params.g,
                                           params.sigma, config),
        "stationary_start": "approximate (burn-in only)" if config.burn_in else "no",
    }
    return MarketHistory(times=times, log_caps=log_caps, names=names,
                         dt=config.dt, meta=meta)


def simulate_first_order(params: FirstOrderParams,
                         config: SimulationConfig) -> MarketHistory:
    """Rank-only model: the name-based drift is identically zero."""
    second = SecondOrderParams(gamma=np.zeros(params.n), g=params.g,
                               sigma=params.sigma)
    return simulate_second_order(second, config)
