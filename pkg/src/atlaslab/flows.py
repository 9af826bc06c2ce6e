"""Forward/backward flows, expected-rank maps, and flow-slope growth rates.

Lags are counted in steps of the underlying history (trading days at the
default step size).  Flow averages use the paper-style shared-window
convention: only start times that leave room for the largest requested
lag contribute, so every lag is averaged over the same start set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import WeightHistory
from .errors import InputError
from .ranking import rank_permutations, ranked_series


@dataclass(frozen=True)
class FlowTable:
    """Average log-weight displacement by starting rank and lag.

    phi[k, j] is the mean displacement after taus[j] steps of the asset
    that held rank k at the start; phi_rev is the same on the
    time-reversed history.
    """

    taus: np.ndarray
    phi: np.ndarray
    phi_rev: np.ndarray
    valid_window_count: int
    dt: float


@dataclass(frozen=True)
class RankMap:
    """Forward, backward, and symmetrized expected ranks at one lag."""

    tau: int
    expected_rank_fwd: np.ndarray
    expected_rank_bwd: np.ndarray
    averaged: np.ndarray


@dataclass(frozen=True)
class GrowthSlopes:
    """Annualized flow slopes at one lag: forward, backward, and their mean."""

    tau: int
    forward: np.ndarray
    backward: np.ndarray
    averaged: np.ndarray


def reverse_history(weights: WeightHistory) -> WeightHistory:
    """The same market run backwards; permutations are recomputed."""
    lw = weights.log_weights[::-1]
    rank_of, name_at = rank_permutations(lw)
    return WeightHistory(log_weights=lw, rank_of=rank_of, name_at=name_at,
                         dt=weights.dt)


def _check_taus(taus: np.ndarray, T: int) -> np.ndarray:
    taus = np.asarray(taus)
    if taus.ndim != 1 or taus.size == 0:
        raise InputError("taus must be a non-empty 1-d array of lags")
    if np.any(taus != taus.astype(int)):
        raise InputError("taus must be whole numbers of steps")
    taus = taus.astype(int)
    if np.any(taus < 0):
        raise InputError("taus must be non-negative")
    if taus.max() >= T:
        raise InputError(f"lag {int(taus.max())} exceeds the {T}-step history")
    return taus


def forward_flow(weights: WeightHistory, taus) -> np.ndarray:
    """[n x len(taus)] forward flow matrix.

    Entry (k, j) averages log mu_{p_t(k)}(t + tau_j) - log mu_(k)(t) over
    every start t with t + max(taus) in range.
    """
    T, n = weights.log_weights.shape
    taus = _check_taus(taus, T)
    n_starts = T - int(taus.max())
    starts = np.arange(n_starts)
    base = ranked_series(weights)[:n_starts]          # log mu_(k)(t)
    names = weights.name_at[:n_starts]                # p_t(k)
    phi = np.empty((n, taus.size))
    for j, tau in enumerate(taus):
        later = weights.log_weights[starts + tau]
        moved = np.take_along_axis(later, names, axis=1)
        phi[:, j] = (moved - base).mean(axis=0)
    return phi


def flow_table(weights: WeightHistory, taus) -> FlowTable:
    """Forward and backward flows over a common lag grid."""
    T = weights.n_steps
    taus = _check_taus(taus, T)
    phi = forward_flow(weights, taus)
    phi_rev = forward_flow(reverse_history(weights), taus)
    return FlowTable(taus=taus, phi=phi, phi_rev=phi_rev,
                     valid_window_count=T - int(taus.max()), dt=weights.dt)


def expected_rank(weights: WeightHistory, tau: int) -> np.ndarray:
    """Mean rank after a signed lag of the asset holding each rank now.

    Negative lags look directly backward along the forward series; this
    matches the forward computation on the reversed history exactly.
    """
    T, n = weights.log_weights.shape
    tau = int(tau)
    if abs(tau) >= T:
        raise InputError(f"lag {tau} exceeds the {T}-step history")
    if tau >= 0:
        starts = np.arange(T - tau)
    else:
        starts = np.arange(-tau, T)
    names = weights.name_at[starts]
    later = weights.rank_of[starts + tau]
    ranks = np.take_along_axis(later, names, axis=1)
    return ranks.mean(axis=0, dtype=float)


def _round_half_up(x: np.ndarray) -> np.ndarray:
    """Nearest integer with exact halves rounded up (toward larger rank)."""
    return np.floor(np.asarray(x) + 0.5).astype(int)


def averaged_rank_map(weights: WeightHistory, tau: int) -> RankMap:
    """Symmetrized rank map: nearest integer of the forward/backward mean."""
    tau = int(tau)
    if tau <= 0:
        raise InputError("tau must be a positive lag")
    fwd = expected_rank(weights, tau)
    bwd = expected_rank(weights, -tau)
    averaged = _round_half_up(0.5 * (fwd + bwd))
    return RankMap(tau=tau, expected_rank_fwd=fwd, expected_rank_bwd=bwd,
                   averaged=averaged)


def growth_slope(flow: FlowTable, tau: int, window: int,
                 g_rank: Optional[np.ndarray] = None) -> GrowthSlopes:
    """Annualized flow slope over [tau - window, tau], per rank.

    At tau = 0 the slopes are defined as the rank growth rates themselves,
    which must then be supplied via ``g_rank``.
    """
    tau = int(tau)
    window = int(window)
    if tau == 0:
        if g_rank is None:
            raise InputError("slopes at lag 0 are the rank growth rates; "
                             "pass g_rank")
        g = np.asarray(g_rank, dtype=float)
        return GrowthSlopes(tau=0, forward=g.copy(), backward=g.copy(),
                            averaged=g.copy())
    if window <= 0 or window > tau:
        raise InputError("window must satisfy 0 < window <= tau")
    taus = list(flow.taus)
    missing = [lag for lag in (tau - window, tau) if lag not in taus]
    if missing:
        raise InputError(
            "flow table is missing required lags "
            + ", ".join(str(m) for m in missing))
    j1 = taus.index(tau)
    j0 = taus.index(tau - window)
    window_years = window * flow.dt
    fwd = (flow.phi[:, j1] - flow.phi[:, j0]) / window_years
    bwd = (flow.phi_rev[:, j1] - flow.phi_rev[:, j0]) / window_years
    return GrowthSlopes(tau=tau, forward=fwd, backward=bwd,
                        averaged=0.5 * (fwd + bwd))
