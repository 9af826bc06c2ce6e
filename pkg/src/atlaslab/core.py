"""Domain types, market-weight computation, and model-parameter validation.

Conventions used everywhere in this package:

* capitalizations are stored as natural logs in [T x n] matrices,
* drifts are per year and volatilities per square-root year,
* the step size ``dt`` is in years (1/250 per trading day by default),
* ranks are 0-based (rank 0 = largest), see :mod:`atlaslab.ranking`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ranking
from .errors import InputError

DAYS_PER_YEAR = 250
DEFAULT_DT = 1.0 / DAYS_PER_YEAR

ZERO_SUM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
TIME_GRID_RTOL = 1e-9


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


def _as_vector(x, name: str) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise InputError(f"{name} must be a 1-d array")
    if not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite entries")
    return v


@dataclass(frozen=True)
class MarketHistory:
    """Log-capitalizations of n named assets on a uniform time grid.

    ``times`` are trading-day stamps, ``dt`` is the step size in years.
    """

    times: np.ndarray
    log_caps: np.ndarray
    names: tuple[str, ...]
    dt: float = DEFAULT_DT
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        log_caps = np.asarray(self.log_caps, dtype=float)
        if log_caps.ndim != 2:
            raise InputError("log_caps must be a [T x n] matrix")
        T, n = log_caps.shape
        if T < 2:
            raise InputError(f"need at least 2 time steps, got {T}")
        if n < 2:
            raise InputError(f"need at least 2 assets, got {n}")
        if times.shape != (T,):
            raise InputError("times length does not match log_caps rows")
        if len(self.names) != n:
            raise InputError("names length does not match log_caps columns")
        if not np.all(np.isfinite(log_caps)):
            t, i = np.argwhere(~np.isfinite(log_caps))[0]
            raise InputError(
                f"non-finite log capitalization at (t={int(t)}, i={int(i)}) "
                f"asset {self.names[int(i)]!r}")
        steps = np.diff(times)
        if np.any(steps <= 0):
            raise InputError("times must be strictly increasing")
        if np.any(np.abs(steps - steps[0]) > TIME_GRID_RTOL * abs(steps[0])):
            raise InputError("times must be uniformly spaced")
        if not (self.dt > 0):
            raise InputError("dt must be positive")
        object.__setattr__(self, "times", _freeze(times))
        object.__setattr__(self, "log_caps", _freeze(log_caps))
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n_steps(self) -> int:
        return self.log_caps.shape[0]

    @property
    def n_assets(self) -> int:
        return self.log_caps.shape[1]

    @property
    def duration_years(self) -> float:
        """Span of the sample in years (increments, not observation count)."""
        return (self.n_steps - 1) * self.dt


@dataclass(frozen=True)
class WeightHistory:
    """Log market weights plus per-step rank/name permutations."""

    log_weights: np.ndarray
    rank_of: np.ndarray
    name_at: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        lw = np.asarray(self.log_weights, dtype=float)
        if lw.ndim != 2:
            raise InputError("log_weights must be a [T x n] matrix")
        T, n = lw.shape
        rank_of = np.asarray(self.rank_of)
        name_at = np.asarray(self.name_at)
        if rank_of.shape != (T, n) or name_at.shape != (T, n):
            raise InputError("permutation matrices must match log_weights shape")
        sums = np.exp(lw).sum(axis=1)
        worst = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[worst] - 1.0) > WEIGHT_SUM_TOL * max(1.0, np.abs(sums).max()):
            raise InputError(
                f"weights at step {worst} sum to {sums[worst]!r}, not 1")
        rows = np.arange(T)[:, None]
        if not np.array_equal(name_at[rows, rank_of], np.broadcast_to(np.arange(n), (T, n))):
            raise InputError("rank_of and name_at are not mutually inverse")
        ranked = np.take_along_axis(lw, name_at, axis=1)
        if np.any(np.diff(ranked, axis=1) > 0):
            raise InputError("name_at does not sort weights in descending order")
        if not (self.dt > 0):
            raise InputError("dt must be positive")
        object.__setattr__(self, "log_weights", _freeze(lw))
        object.__setattr__(self, "rank_of", _freeze(rank_of))
        object.__setattr__(self, "name_at", _freeze(name_at))

    @property
    def n_steps(self) -> int:
        return self.log_weights.shape[0]

    @property
    def n_assets(self) -> int:
        return self.log_weights.shape[1]

    @property
    def duration_years(self) -> float:
        return (self.n_steps - 1) * self.dt


@dataclass(frozen=True)
class FirstOrderParams:
    """Rank-based drift and volatility parameters (annualized)."""

    g: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        g = _as_vector(self.g, "g")
        sigma = _as_vector(self.sigma, "sigma")
        if g.shape != sigma.shape:
            raise InputError("g and sigma must have equal length")
        object.__setattr__(self, "g", _freeze(g))
        object.__setattr__(self, "sigma", _freeze(sigma))

    @property
    def n(self) -> int:
        return self.g.size


@dataclass(frozen=True)
class SecondOrderParams:
    """Name-based plus rank-based drifts with rank-based volatilities."""

    gamma: np.ndarray
    g: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        gamma = _as_vector(self.gamma, "gamma")
        g = _as_vector(self.g, "g")
        sigma = _as_vector(self.sigma, "sigma")
        if not (gamma.shape == g.shape == sigma.shape):
            raise InputError("gamma, g and sigma must have equal length")
        object.__setattr__(self, "gamma", _freeze(gamma))
        object.__setattr__(self, "g", _freeze(g))
        object.__setattr__(self, "sigma", _freeze(sigma))

    @property
    def n(self) -> int:
        return self.g.size


@dataclass(frozen=True)
class OccupationMatrix:
    """Bistochastic matrix theta with theta[k, i] = time share of asset i at rank k."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        if theta.ndim != 2 or theta.shape[0] != theta.shape[1]:
            raise InputError("theta must be a square matrix")
        if not np.all(np.isfinite(theta)):
            raise InputError("theta contains non-finite entries")
        if theta.min() < -1e-15 or theta.max() > 1.0 + 1e-12:
            raise InputError("theta entries must lie in [0, 1]")
        row = np.abs(theta.sum(axis=1) - 1.0).max()
        col = np.abs(theta.sum(axis=0) - 1.0).max()
        if max(row, col) > 1e-12:
            raise InputError(
                f"theta is not bistochastic (row residual {row:.2e}, "
                f"column residual {col:.2e})")
        object.__setattr__(self, "theta", _freeze(theta))

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def is_positive(self) -> bool:
        return bool(self.theta.min() > 0.0)


@dataclass(frozen=True)
class ValidityReport:
    """Outcome of a stability-condition check, one entry per failed condition."""

    valid: bool
    failures: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


def compute_weights(history: MarketHistory) -> WeightHistory:
    """Market weights and rank permutations from a capitalization history.

    log mu_i(t) = log X_i(t) - log sum_j X_j(t), computed in log space so
    that very large or very small capitalizations do not overflow.
    """
    lc = history.log_caps
    peak = lc.max(axis=1, keepdims=True)
    log_total = peak + np.log(np.exp(lc - peak).sum(axis=1, keepdims=True))
    log_weights = lc - log_total
    rank_of, name_at = ranking.rank_permutations(log_weights)
    return WeightHistory(log_weights=log_weights, rank_of=rank_of,
                         name_at=name_at, dt=history.dt)


def _check_zero_sum(v: np.ndarray, label: str, failures: list[str]) -> None:
    total = float(v.sum())
    if abs(total) > ZERO_SUM_TOL * max(1.0, np.abs(v).max()):
        failures.append(f"{label} sums to {total!r}, not 0")


def validate_first_order(params: FirstOrderParams) -> ValidityReport:
    """Stability check for rank-based parameters.

    Requires sum(g) = 0, all leading partial sums of g negative, and
    positive volatilities.
    """
    failures: list[str] = []
    _check_zero_sum(params.g, "g", failures)
    partial = np.cumsum(params.g)[:-1]
    bad = np.flatnonzero(partial >= 0)
    if bad.size:
        m = int(bad[0]) + 1
        failures.append(
            f"partial sum of g through rank {m} is {partial[m - 1]!r}, not < 0")
    nonpos = np.flatnonzero(params.sigma <= 0)
    if nonpos.size:
        failures.append(f"sigma[{int(nonpos[0])}] is not positive")
    return ValidityReport(valid=not failures, failures=tuple(failures))


def validate_second_order(params: SecondOrderParams) -> ValidityReport:
    """Stability check for name-plus-rank parameters.

    The permutation condition (every leading partial sum of g_k plus any
    m distinct gamma values stays negative) is checked at its worst case:
    the m largest gammas.
    """
    failures: list[str] = []
    _check_zero_sum(params.g, "g", failures)
    _check_zero_sum(params.gamma, "gamma", failures)
    gamma_desc = np.sort(params.gamma)[::-1]
    worst = np.cumsum(params.g)[:-1] + np.cumsum(gamma_desc)[:-1]
    bad = np.flatnonzero(worst >= 0)
    if bad.size:
        m = int(bad[0]) + 1
        failures.append(
            f"worst-case partial sum through rank {m} is {worst[m - 1]!r}, "
            "not < 0")
    nonpos = np.flatnonzero(params.sigma <= 0)
    if nonpos.size:
        failures.append(f"sigma[{int(nonpos[0])}] is not positive")
    return ValidityReport(valid=not failures, failures=tuple(failures))
