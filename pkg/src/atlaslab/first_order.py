"""Estimators for rank-based variances, growth rates, local times, and
occupation rates, plus construction of the fitted rank-based model.

All estimators are pure read-only passes over a WeightHistory.  Rates are
annualized with the sample span in years, T_years = (T - 1) * dt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FirstOrderParams, OccupationMatrix, ValidityReport, WeightHistory, validate_first_order
from .errors import InputError
from .ranking import ranked_series


@dataclass(frozen=True)
class FirstOrderEstimates:
    """Per-rank estimates from one weight history.

    ``lam`` holds the n-1 local-time rates for adjacent rank boundaries;
    ``net_rank_drift`` is the per-rank endpoint drift
    (log mu_(k)(T) - log mu_(k)(0)) / T_years, which vanishes for long
    stationary samples.
    """

    sigma2: np.ndarray
    g_rank: np.ndarray
    lam: np.ndarray
    net_rank_drift: np.ndarray
    duration_years: float


def _require_increments(weights: WeightHistory) -> None:
    if weights.n_steps < 2:
        raise InputError("need at least 2 steps to form increments")


def estimate_rank_variances(weights: WeightHistory) -> np.ndarray:
    """Realized quadratic variation of each ranked log-weight path, per year."""
    _require_increments(weights)
    ranked = ranked_series(weights)
    increments = np.diff(ranked, axis=0)
    return (increments ** 2).sum(axis=0) / weights.duration_years


def estimate_rank_growth(weights: WeightHistory) -> np.ndarray:
    """Annualized growth attributed to each rank.

    Each one-step log-weight change is attributed to the rank its asset
    occupied at the start of the step, so the rank totals partition the
    per-name totals exactly.
    """
    _require_increments(weights)
    dlw = np.diff(weights.log_weights, axis=0)
    by_rank = np.take_along_axis(dlw, weights.name_at[:-1], axis=1)
    return by_rank.sum(axis=0) / weights.duration_years


def net_rank_drift(weights: WeightHistory) -> np.ndarray:
    """Endpoint drift of each ranked log-weight path, per year."""
    _require_increments(weights)
    ranked = ranked_series(weights)
    return (ranked[-1] - ranked[0]) / weights.duration_years


def estimate_local_times(weights: WeightHistory) -> np.ndarray:
    """Collision rates at the n-1 adjacent-rank boundaries, per year.

    Telescoping the ranked-path decomposition over ranks 0..k gives the
    boundary rate below rank k as twice the accumulated gap between the
    ranked endpoint change and the rank-attributed growth.  By
    construction the half-difference of adjacent boundary rates equals
    the rank growth minus the endpoint drift at machine precision.
    """
    _require_increments(weights)
    g_rank = estimate_rank_growth(weights)
    drift = net_rank_drift(weights)
    return 2.0 * np.cumsum(drift - g_rank)[:-1]


def estimate_occupation_matrix(weights: WeightHistory) -> OccupationMatrix:
    """Fraction of steps each asset spends at each rank (exactly bistochastic)."""
    T, n = weights.log_weights.shape
    counts = np.zeros((n, n), dtype=np.int64)
    for k in range(n):
        counts[k] = np.bincount(weights.name_at[:, k], minlength=n)
    return OccupationMatrix(theta=counts / float(T))


def estimate_first_order(weights: WeightHistory) -> FirstOrderEstimates:
    """Bundle of all per-rank first-order estimates for one history."""
    return FirstOrderEstimates(
        sigma2=estimate_rank_variances(weights),
        g_rank=estimate_rank_growth(weights),
        lam=estimate_local_times(weights),
        net_rank_drift=net_rank_drift(weights),
        duration_years=weights.duration_years,
    )


def smooth_by_rank(values: np.ndarray, bandwidth: float) -> np.ndarray:
    """Gaussian smoothing along the rank axis with reflecting boundaries.

    ``bandwidth`` is in rank units; the kernel is truncated at four
    bandwidths and normalized, so constants pass through unchanged.
    Presentation helper only: estimators never consume smoothed values.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise InputError("values must be a 1-d array")
    if not (bandwidth > 0):
        raise InputError("bandwidth must be positive")
    n = values.size
    radius = min(n - 1, int(np.ceil(4.0 * bandwidth)))
    if radius == 0:
        return values.copy()
    offsets = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (offsets / bandwidth) ** 2)
    kernel /= kernel.sum()
    padded = np.concatenate([values[radius - 1::-1] if radius else values[:0],
                             values,
                             values[:n - radius - 1:-1] if radius else values[:0]])
    return np.convolve(padded, kernel, mode="valid")


def build_first_order_model(
        estimates: FirstOrderEstimates) -> tuple[FirstOrderParams, ValidityReport]:
    """Fitted rank-based model: growth rates recentered to sum to zero.

    Never repairs an unstable fit; the validity report flags it instead.
    """
    g = estimates.g_rank - estimates.g_rank.mean()
    sigma2 = estimates.sigma2
    if np.any(sigma2 < 0) or not np.all(np.isfinite(sigma2)):
        raise InputError("variance estimates must be finite and non-negative")
    params = FirstOrderParams(g=g, sigma=np.sqrt(sigma2))
    return params, validate_first_order(params)
