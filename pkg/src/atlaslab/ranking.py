"""Ranking permutations, ranked series, and capital distribution curves.

Ranks are 0-based throughout: rank 0 is the largest value.  Ties are
broken by asset index (the lower index gets the better rank), so the
permutations are total orders even on degenerate inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import InputError

if TYPE_CHECKING:  # pragma: no cover
    from .core import WeightHistory


def rank_permutation(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending rank permutation of a single cross-section.

    Returns (rank_of, name_at): rank_of[i] is the rank of asset i and
    name_at[k] is the asset index occupying rank k.  The two arrays are
    mutually inverse permutations of 0..n-1.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or values.size < 1:
        raise InputError("rank_permutation expects a non-empty 1-d array")
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise InputError(f"non-finite value at index {bad}")
    name_at = np.argsort(-values, kind="stable")
    rank_of = np.empty_like(name_at)
    rank_of[name_at] = np.arange(values.size)
    return rank_of, name_at


def rank_permutations(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rank_permutation over the rows of a [T x n] matrix."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InputError("rank_permutations expects a [T x n] matrix")
    if not np.all(np.isfinite(values)):
        t, i = np.argwhere(~np.isfinite(values))[0]
        raise InputError(f"non-finite value at (t={int(t)}, i={int(i)})")
    name_at = np.argsort(-values, axis=1, kind="stable")
    rank_of = np.empty_like(name_at)
    rows = np.arange(values.shape[0])[:, None]
    rank_of[rows, name_at] = np.arange(values.shape[1])[None, :]
    return rank_of, name_at


@dataclass(frozen=True)
class CapitalDistributionCurve:
    """Ranked market weights at one time stamp, largest first."""

    ranked_weights: np.ndarray
    log_rank: np.ndarray    # log(1-based rank), for log-log plots
    log_weight: np.ndarray

    @property
    def n(self) -> int:
        return self.ranked_weights.size


def capital_distribution_curve(weights: "WeightHistory", t: int) -> CapitalDistributionCurve:
    """Extract the capital distribution curve at step ``t``."""
    T = weights.log_weights.shape[0]
    if not -T <= t < T:
        raise InputError(f"step index {t} out of range for T={T}")
    row = weights.log_weights[t][weights.name_at[t]]
    ranked = np.exp(row)
    ranks = np.arange(1, ranked.size + 1, dtype=float)
    return CapitalDistributionCurve(ranked_weights=ranked,
                                    log_rank=np.log(ranks),
                                    log_weight=row.copy())


def ranked_series(weights: "WeightHistory") -> np.ndarray:
    """[T x n] matrix of ranked log weights; column k is the rank-k path."""
    return np.take_along_axis(weights.log_weights, weights.name_at, axis=1)
