"""Recovery of rank-based and name-based growth parameters.

Two routes are implemented:

* the matrix route solves the occupation-matrix identity for the rank
  drifts on the zero-sum subspace and reads the name drifts off the
  transposed occupation matrix;
* the recursive route chains the flow-slope identity through the
  averaged rank map, which is how the parameters can be recovered when
  the occupation matrix itself is not estimable.

Both routes return non-normalized curves where the construction does; an
explicit recentering step is available and never applied silently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import (OccupationMatrix, SecondOrderParams, ValidityReport,
                   WeightHistory, validate_second_order)
from .errors import DegeneracyError, InputError
from .flows import RankMap, reverse_history

SPECTRAL_GAP_TOL = 1e-8
POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 100_000
GRID_COLLISION_TOL = 1e-9


@dataclass(frozen=True)
class SecondOrderEstimates:
    """Recovered drifts with the residuals of the defining identities."""

    g_rank: np.ndarray
    gamma_name: np.ndarray
    method: str  # "matrix" | "recursive"
    residual_rank: np.ndarray
    residual_name: np.ndarray


@dataclass(frozen=True)
class LinearRankFit:
    """Least-squares line y = intercept + slope * k over 1-based ranks."""

    intercept: float
    slope: float
    rms_residual: float

    def at(self, rank_1based: np.ndarray) -> np.ndarray:
        return self.intercept + self.slope * np.asarray(rank_1based, dtype=float)


@dataclass(frozen=True)
class ConsistencyReport:
    """Residuals of the rank identity and the name identity."""

    residual_rank: np.ndarray
    residual_name: np.ndarray

    @property
    def max_rank(self) -> float:
        return float(np.abs(self.residual_rank).max())

    @property
    def max_name(self) -> float:
        return float(np.abs(self.residual_name).max())


@dataclass(frozen=True)
class SpectralReport:
    """Perron structure of theta theta^T: unit eigenvector check and gap."""

    ones_residual: float
    second_eigenvalue: float
    spectral_gap: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class RecursiveGrowthCurve:
    """Rank-drift curve generated by the chained flow-slope identity.

    ``values`` covers every integer rank: chain and resolved points are
    linearly interpolated in between and extended flat outside the
    visited span.  ``spread`` is the max-min range where several chain
    assignments landed on the same integer rank.  The curve is not
    recentered unless ``normalized`` says so.
    """

    values: np.ndarray
    chain_ranks: np.ndarray
    chain_values: np.ndarray
    visited: np.ndarray
    spread: np.ndarray
    truncated_at: Optional[float] = None
    normalized: bool = False

    def recentered(self) -> "RecursiveGrowthCurve":
        """Copy with the integer-grid values shifted to sum to zero."""
        return replace(self, values=self.values - self.values.mean(),
                       normalized=True)


def _zero_sum_basis(n: int) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to the ones vector."""
    seed = np.zeros((n, n))
    seed[:, 0] = 1.0 / np.sqrt(n)
    seed[:, 1:] = np.eye(n)[:, : n - 1]
    q, _ = np.linalg.qr(seed)
    return q[:, 1:]


def _require_positive(theta: OccupationMatrix) -> None:
    if not theta.is_positive:
        k, i = np.argwhere(theta.theta <= 0.0)[0]
        raise InputError(
            f"occupation rate at (rank {int(k)}, asset {int(i)}) is not "
            "positive; the uniqueness argument needs strictly positive rates")


def solve_rank_growth_matrix(g_bar: np.ndarray,
                             theta: OccupationMatrix) -> np.ndarray:
    """Unique zero-sum rank drifts consistent with the occupation matrix.

    Solves the restriction of (I - theta theta^T) to the zero-sum
    subspace against the recentered first-order growth rates.  Rejects
    occupation matrices with non-positive entries or a vanishing
    spectral gap, where uniqueness breaks down.
    """
    g_bar = np.asarray(g_bar, dtype=float)
    n = theta.n
    if g_bar.shape != (n,):
        raise InputError("g_bar length does not match theta")
    if not np.all(np.isfinite(g_bar)):
        raise InputError("g_bar contains non-finite entries")
    _require_positive(theta)
    A = theta.theta @ theta.theta.T
    eigs = np.linalg.eigvalsh(A)
    second = float(eigs[-2])
    if 1.0 - second < SPECTRAL_GAP_TOL:
        raise DegeneracyError(
            f"second eigenvalue {second!r} of theta theta^T is within "
            f"{SPECTRAL_GAP_TOL} of 1; the solve is numerically degenerate")
    B = _zero_sum_basis(n)
    target = g_bar - g_bar.mean()
    reduced = B.T @ (np.eye(n) - A) @ B
    y = np.linalg.solve(reduced, B.T @ target)
    g = B @ y
    return g - g.mean()


def gamma_from_theta(g: np.ndarray, theta: OccupationMatrix) -> np.ndarray:
    """Name drifts implied by rank drifts: gamma_i = -sum_k theta[k,i] g_k."""
    g = np.asarray(g, dtype=float)
    if g.shape != (theta.n,):
        raise InputError("g length does not match theta")
    total = float(g.sum())
    if abs(total) > 1e-9 * max(1.0, np.abs(g).max()):
        raise InputError(f"g must sum to zero, got {total!r}")
    return -(theta.theta.T @ g)


def fit_linear_rank_maps(rank_map: RankMap,
                         growth_avg: np.ndarray) -> tuple[LinearRankFit, LinearRankFit]:
    """OLS lines through the averaged rank map and the averaged slopes.

    Ranks enter the fits 1-based so the coefficients read like the
    published form of these curves.
    """
    averaged = np.asarray(rank_map.averaged, dtype=float)
    growth_avg = np.asarray(growth_avg, dtype=float)
    n = averaged.size
    if n < 2:
        raise InputError("need at least 2 ranks to fit a line")
    if growth_avg.shape != (n,):
        raise InputError("growth curve length does not match rank map")
    k = np.arange(1, n + 1, dtype=float)

    def fit(y: np.ndarray) -> LinearRankFit:
        coeffs, res, *_ = np.linalg.lstsq(
            np.column_stack([np.ones(n), k]), y, rcond=None)
        fitted = coeffs[0] + coeffs[1] * k
        rms = float(np.sqrt(np.mean((y - fitted) ** 2)))
        return LinearRankFit(intercept=float(coeffs[0]),
                             slope=float(coeffs[1]), rms_residual=rms)

    rank_1based = averaged + 1.0  # internal ranks are 0-based
    return fit(rank_1based), fit(growth_avg)


def _interp_at(values: np.ndarray, x: float) -> float:
    """Linear interpolation of a per-rank array at a fractional rank."""
    n = values.size
    lo = int(np.floor(x))
    lo = min(max(lo, 0), n - 1)
    hi = min(lo + 1, n - 1)
    frac = x - lo
    return float((1.0 - frac) * values[lo] + frac * values[hi])


def recursive_rank_growth(g_bar: np.ndarray, G_bar: np.ndarray,
                          rank_targets: np.ndarray, anchor_rank: int = 0,
                          anchor_value: Optional[float] = None,
                          max_steps: Optional[int] = None) -> RecursiveGrowthCurve:
    """Chain the flow-slope identity through the rank map.

    Starting from a known value at ``anchor_rank``, each step carries the
    current value v at rank r to the target rank rho = targets(r) with

        value at rho = v + G_bar(r) - g_bar(r),

    where per-rank inputs are interpolated linearly at fractional ranks.
    A value landing at fractional rho with the rank below already known
    is resolved onto the integer above it through the linear
    interpolation identity; exact grid hits are assigned directly.  The
    chain stops at a fixed point, a repeated rank, or when the target
    leaves the rank range (recorded in ``truncated_at``).

    The returned integer-grid curve is not recentered; see
    :meth:`RecursiveGrowthCurve.recentered`.
    """
    g_bar = np.asarray(g_bar, dtype=float)
    G_bar = np.asarray(G_bar, dtype=float)
    targets = np.asarray(rank_targets, dtype=float)
    n = g_bar.size
    if G_bar.shape != (n,) or targets.shape != (n,):
        raise InputError("g_bar, G_bar and rank_targets must share length")
    if not np.all(np.isfinite(targets)):
        raise InputError("rank targets must be finite")
    if not 0 <= anchor_rank < n:
        raise InputError("anchor_rank out of range")
    if anchor_value is None:
        anchor_value = float(g_bar[anchor_rank])
    if max_steps is None:
        max_steps = 10 * n

    chain_ranks = [float(anchor_rank)]
    chain_values = [float(anchor_value)]
    assignments: dict[int, list[float]] = {}

    def assign(rank: int, value: float) -> None:
        assignments.setdefault(rank, []).append(value)

    known: dict[int, float] = {}

    def record(rho: float, value: float) -> None:
        lo = int(np.floor(rho))
        if rho - lo < GRID_COLLISION_TOL or (lo + 1) - rho < GRID_COLLISION_TOL:
            grid = int(round(rho))
            assign(grid, value)
            known.setdefault(grid, value)
        elif lo in known:
            resolved = (value - (lo + 1 - rho) * known[lo]) / (rho - lo)
            assign(lo + 1, resolved)
            known.setdefault(lo + 1, resolved)

    record(float(anchor_rank), float(anchor_value))
    truncated_at: Optional[float] = None
    rho = float(anchor_rank)
    value = float(anchor_value)
    for _ in range(max_steps):
        nxt = _interp_at(targets, rho)
        if nxt < -GRID_COLLISION_TOL or nxt > (n - 1) + GRID_COLLISION_TOL:
            truncated_at = nxt
            break
        nxt = min(max(nxt, 0.0), float(n - 1))
        value = value + _interp_at(G_bar, rho) - _interp_at(g_bar, rho)
        if abs(nxt - rho) < GRID_COLLISION_TOL:
            break  # fixed point of the rank map
        if any(abs(nxt - r) < GRID_COLLISION_TOL for r in chain_ranks):
            chain_ranks.append(nxt)
            chain_values.append(value)
            record(nxt, value)
            break  # cycle: revisiting an earlier rank
        chain_ranks.append(nxt)
        chain_values.append(value)
        record(nxt, value)
        rho = nxt

    # Integer grid: chain points plus resolved assignments, duplicates
    # averaged, linear interpolation in between, flat extension outside.
    pts: dict[float, list[float]] = {}
    for r, v in zip(chain_ranks, chain_values):
        pts.setdefault(round(r, 9), []).append(v)
    for r, vals in assignments.items():
        pts.setdefault(float(r), []).extend(vals)
    xs = np.array(sorted(pts))
    ys = np.array([np.mean(pts[x]) for x in xs])
    grid = np.arange(n, dtype=float)
    values_grid = np.interp(grid, xs, ys)

    visited = np.zeros(n, dtype=bool)
    spread = np.zeros(n)
    for r, vals in assignments.items():
        visited[r] = True
        spread[r] = max(vals) - min(vals)
    lo_hull = int(np.ceil(xs.min() - GRID_COLLISION_TOL))
    hi_hull = int(np.floor(xs.max() + GRID_COLLISION_TOL))
    visited[max(lo_hull, 0):min(hi_hull, n - 1) + 1] = True

    return RecursiveGrowthCurve(values=values_grid,
                                chain_ranks=np.array(chain_ranks),
                                chain_values=np.array(chain_values),
                                visited=visited, spread=spread,
                                truncated_at=truncated_at)


def estimate_gamma_series(weights: WeightHistory, g: np.ndarray) -> np.ndarray:
    """Name drifts from the return series, given the rank drifts.

    Averages the forward excess return over the rank drift with the same
    estimate on the time-reversed history, which removes the endpoint
    bias of either direction alone.
    """
    g = np.asarray(g, dtype=float)
    n = weights.n_assets
    if g.shape != (n,):
        raise InputError("g length does not match the number of assets")
    if not np.all(np.isfinite(g)):
        raise InputError("g contains non-finite entries")

    def one_sided(w: WeightHistory) -> np.ndarray:
        dlw = np.diff(w.log_weights, axis=0)
        drift = g[w.rank_of[:-1]] * w.dt
        return (dlw - drift).sum(axis=0) / w.duration_years

    forward = one_sided(weights)
    backward = one_sided(reverse_history(weights))
    return 0.5 * (forward + backward)


def verify_consistency(theta: OccupationMatrix, g: np.ndarray,
                       gamma: np.ndarray, g_bar: np.ndarray) -> ConsistencyReport:
    """Residuals of the two defining identities for (theta, g, gamma, g_bar)."""
    g = np.asarray(g, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    g_bar = np.asarray(g_bar, dtype=float)
    n = theta.n
    if not (g.shape == gamma.shape == g_bar.shape == (n,)):
        raise InputError("dimension mismatch")
    residual_rank = g_bar - g - theta.theta @ gamma
    residual_name = gamma + theta.theta.T @ g
    return ConsistencyReport(residual_rank=residual_rank,
                             residual_name=residual_name)


def perron_check(theta: OccupationMatrix) -> SpectralReport:
    """Spectral sanity of theta theta^T.

    Verifies that the ones vector is fixed and estimates the modulus of
    the second eigenvalue by power iteration with the ones direction
    deflated.  Non-positive entries only produce a warning; the check is
    still carried out.
    """
    warnings = []
    if not theta.is_positive:
        warnings.append("theta has non-positive entries; the simple-"
                        "eigenvalue argument does not apply")
    n = theta.n
    A = theta.theta @ theta.theta.T
    e = np.ones(n)
    ones_residual = float(np.abs(A @ e - e).max())
    unit = e / np.sqrt(n)

    rng = np.random.default_rng(0)
    x = rng.standard_normal(n)
    x -= (x @ unit) * unit
    norm = np.linalg.norm(x)
    second = 0.0
    if norm > 0:
        x /= norm
        lam_prev = np.inf
        for _ in range(POWER_ITER_MAX):
            y = A @ x
            y -= (y @ unit) * unit  # deflate the unit eigenvector
            norm = np.linalg.norm(y)
            if norm < 1e-300:
                second = 0.0
                break
            x = y / norm
            lam = float(x @ (A @ x))
            if abs(lam - lam_prev) < POWER_ITER_TOL:
                second = abs(lam)
                break
            lam_prev = lam
            second = abs(lam)
    return SpectralReport(ones_residual=ones_residual,
                          second_eigenvalue=second,
                          spectral_gap=1.0 - second,
                          warnings=tuple(warnings))


def build_second_order_model(g: np.ndarray, gamma: np.ndarray,
                             sigma2: np.ndarray) -> tuple[SecondOrderParams, ValidityReport]:
    """Assemble a name-plus-rank model from estimates.

    Both drift vectors are recentered to sum to zero; instability is
    reported, never repaired.
    """
    g = np.asarray(g, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if not (g.shape == gamma.shape == sigma2.shape):
        raise InputError("g, gamma and sigma2 must share length")
    if np.any(sigma2 < 0) or not np.all(np.isfinite(sigma2)):
        raise InputError("variance estimates must be finite and non-negative")
    params = SecondOrderParams(gamma=gamma - gamma.mean(), g=g - g.mean(),
                               sigma=np.sqrt(sigma2))
    return params, validate_second_order(params)


def estimate_second_order_matrix(weights: WeightHistory) -> SecondOrderEstimates:
    """Matrix-route pipeline: occupation matrix, solve, and residuals."""
    from .first_order import estimate_occupation_matrix, estimate_rank_growth

    g_bar = estimate_rank_growth(weights)
    theta = estimate_occupation_matrix(weights)
    g = solve_rank_growth_matrix(g_bar, theta)
    gamma = gamma_from_theta(g, theta)
    report = verify_consistency(theta, g, gamma, g_bar)
    return SecondOrderEstimates(g_rank=g, gamma_name=gamma, method="matrix",
                                residual_rank=report.residual_rank,
                                residual_name=report.residual_name)


def estimate_second_order_recursive(
        weights: WeightHistory, tau: int, window: int,
        flow_taus: Optional[Sequence[int]] = None) -> tuple[RecursiveGrowthCurve, SecondOrderEstimates]:
    """Recursive-route pipeline: flows, rank map, chained recursion.

    Returns the raw (non-normalized) curve together with estimates built
    from its recentered values; name drifts come from the return series.
    """
    from .first_order import (estimate_occupation_matrix,
                              estimate_rank_growth)
    from .flows import averaged_rank_map, flow_table, growth_slope

    if flow_taus is None:
        flow_taus = sorted({0, tau - window, tau})
    table = flow_table(weights, np.asarray(list(flow_taus), dtype=int))
    slopes = growth_slope(table, tau, window)
    rank_map = averaged_rank_map(weights, tau)
    g_bar = estimate_rank_growth(weights)
    curve = recursive_rank_growth(g_bar, slopes.averaged,
                                  rank_map.averaged.astype(float))
    g = curve.recentered().values
    gamma = estimate_gamma_series(weights, g)
    gamma = gamma - gamma.mean()
    theta = estimate_occupation_matrix(weights)
    report = verify_consistency(theta, g, gamma, g_bar)
    estimates = SecondOrderEstimates(g_rank=g, gamma_name=gamma,
                                     method="recursive",
                                     residual_rank=report.residual_rank,
                                     residual_name=report.residual_name)
    return curve, estimates
