"""Matplotlib rendering of the standard report figures.

Every function writes one PNG next to the delimited output it mirrors.
Rendering is deterministic: the Agg backend, a fixed style, and pinned
PNG metadata, so repeated runs produce identical bytes.
"""

from __future__ import annotations

from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "atlaslab"}
_DPI = 150

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _save(fig, path: str) -> None:
    fig.savefig(path, dpi=_DPI, metadata=_PNG_META)
    plt.close(fig)


def capital_distribution_figure(curves: dict, path: str) -> None:
    """Ranked weights against rank, both axes logarithmic."""
    fig, ax = plt.subplots()
    for label in sorted(curves):
        curve = curves[label]
        ranks = np.arange(1, curve.n + 1)
        ax.plot(ranks, curve.ranked_weights, lw=1.2, label=str(label))
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("rank")
    ax.set_ylabel("market weight")
    ax.set_title("Capital distribution")
    if len(curves) > 1:
        ax.legend(fontsize=7)
    _save(fig, path)


def rank_profile_figure(values: np.ndarray, smoothed: np.ndarray,
                        label: str, path: str) -> None:
    """Raw and smoothed per-rank estimates (variance or growth profile)."""
    fig, ax = plt.subplots()
    ranks = np.arange(1, values.size + 1)
    ax.plot(ranks, values, ".", ms=3, alpha=0.5, label="estimate")
    ax.plot(ranks, smoothed, lw=1.5, label="smoothed")
    ax.set_xlabel("rank")
    ax.set_ylabel(label)
    ax.set_title(f"{label} by rank")
    ax.legend(fontsize=7)
    _save(fig, path)


def flow_figure(taus: np.ndarray, phi: np.ndarray, phi_rev: np.ndarray,
                start_weights: np.ndarray, path: str,
                max_curves: int = 10) -> None:
    """Average weight trajectories by starting rank, forward and backward.

    Curves show start_weights[k] * exp(phi_k(tau)) on a log weight axis;
    at most ``max_curves`` evenly spaced starting ranks are drawn.
    """
    n = phi.shape[0]
    picks = np.unique(np.linspace(0, n - 1, min(max_curves, n)).astype(int))
    fig, ax = plt.subplots()
    for k in picks:
        w0 = start_weights[k]
        ax.plot(taus, w0 * np.exp(phi[k]), "k-", lw=1.0)
        ax.plot(taus, w0 * np.exp(phi_rev[k]), "r:", lw=1.0)
    ax.set_yscale("log")
    ax.set_xlabel("lag (steps)")
    ax.set_ylabel("average weight")
    ax.set_title("Forward (solid) and backward (dotted) flow")
    _save(fig, path)


def rank_map_figure(fwd: np.ndarray, bwd: np.ndarray, tau: int,
                    path: str) -> None:
    """Expected final rank against initial rank, both directions."""
    n = fwd.size
    ranks = np.arange(1, n + 1)
    fig, ax = plt.subplots()
    ax.plot(ranks, fwd + 1, "k-", lw=1.2, label="forward")
    ax.plot(ranks, bwd + 1, "r:", lw=1.2, label="backward")
    ax.plot(ranks, ranks, "b--", lw=0.8, label="no movement")
    ax.set_xlabel("initial rank")
    ax.set_ylabel(f"expected rank after {tau} steps")
    ax.set_title("Expected rank map")
    ax.legend(fontsize=7)
    _save(fig, path)


def averaged_rank_figure(averaged: np.ndarray, fit, tau: int,
                         path: str) -> None:
    """Symmetrized integer rank map with its least-squares line."""
    n = averaged.size
    ranks = np.arange(1, n + 1)
    fig, ax = plt.subplots()
    ax.plot(ranks, averaged + 1, "k.", ms=4, label="averaged map")
    if fit is not None:
        ax.plot(ranks, fit.at(ranks), "r-", lw=1.0,
                label=f"{fit.intercept:.3g} + {fit.slope:.3g} k")
    ax.set_xlabel("initial rank")
    ax.set_ylabel(f"averaged rank after {tau} steps")
    ax.set_title("Averaged rank map")
    ax.legend(fontsize=7)
    _save(fig, path)


def growth_slope_figure(g_bar: np.ndarray, averaged: np.ndarray,
                        fit_zero, fit_tau, tau: int, path: str) -> None:
    """Rank growth at lag zero and flow slopes at the working lag."""
    n = g_bar.size
    ranks = np.arange(1, n + 1)
    fig, ax = plt.subplots()
    ax.plot(ranks, g_bar, "k.", ms=4, label="lag 0")
    ax.plot(ranks, averaged, "ro", ms=3, mfc="none", label=f"lag {tau}")
    if fit_zero is not None:
        ax.plot(ranks, fit_zero.at(ranks), "k-", lw=0.9)
    if fit_tau is not None:
        ax.plot(ranks, fit_tau.at(ranks), "r--", lw=0.9)
    ax.set_xlabel("rank")
    ax.set_ylabel("growth rate (per year)")
    ax.set_title("Flow-slope growth estimates")
    ax.legend(fontsize=7)
    _save(fig, path)


def recursive_growth_figure(curve, g_matrix: Optional[np.ndarray],
                            path: str) -> None:
    """Recursively generated rank-drift curve, with the matrix solution
    overlaid when available."""
    n = curve.values.size
    ranks = np.arange(1, n + 1)
    fig, ax = plt.subplots()
    ax.plot(ranks, curve.values, "k-", lw=1.2, label="recursive (raw)")
    ax.plot(curve.chain_ranks + 1, curve.chain_values, "ks", ms=4,
            mfc="none", label="chain points")
    if g_matrix is not None:
        ax.plot(ranks, g_matrix, "r--", lw=1.0, label="matrix route")
    ax.set_xlabel("rank")
    ax.set_ylabel("rank drift (per year)")
    ax.set_title("Rank drift by recursion")
    ax.legend(fontsize=7)
    _save(fig, path)
