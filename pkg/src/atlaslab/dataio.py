"""CSV ingestion and deterministic, re-parseable table export.

All numeric output uses shortest round-trip float formatting, so a file
read back parses to the exact floats that produced it, and identical
inputs always produce identical bytes.  Dates are ordinal trading days;
no calendar arithmetic is performed anywhere.
"""

from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Optional

import numpy as np

from .core import DEFAULT_DT, MarketHistory, OccupationMatrix
from .errors import InputError
from .first_order import FirstOrderEstimates, smooth_by_rank
from .flows import FlowTable, RankMap
from .second_order import (ConsistencyReport, LinearRankFit,
                           RecursiveGrowthCurve)


def _fmt(x) -> str:
    """Shortest decimal that round-trips the float exactly."""
    return repr(float(x))


def _write_rows(path: str, header: list[str], rows: Iterable[Iterable],
                comments: Optional[dict] = None) -> None:
    buf = io.StringIO()
    if comments:
        for key in sorted(comments):
            buf.write(f"# {key}: {comments[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_table(path: str) -> tuple[list[str], list[list[str]], dict]:
    """Parse one of this module's CSV files: (header, rows, comments)."""
    comments = {}
    rows = []
    header = None
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    comments[key.strip()] = value.strip()
                continue
            if not line.strip():
                continue
            parsed = next(csv.reader([line]))
            if header is None:
                header = parsed
            else:
                rows.append(parsed)
    if header is None:
        raise InputError(f"{path} contains no header row")
    return header, rows, comments


def ingest_csv(path: str, dt: float = DEFAULT_DT) -> MarketHistory:
    """Load a capitalization history from long or wide CSV.

    Long format has header ``date,asset,cap``; wide format has ``date``
    followed by one column per asset.  Assets missing any observation in
    the sample window are dropped and listed in ``meta['dropped_assets']``.
    Capitalizations must be strictly positive; logs are taken here.
    """
    if not os.path.exists(path):
        raise InputError(f"input file not found: {path}")
    header, rows, comments = read_table(path)
    cols = [c.strip() for c in header]
    if cols[:1] != ["date"]:
        raise InputError(f"{path}: first column must be 'date', got {cols[:1]}")
    if [c.lower() for c in cols] == ["date", "asset", "cap"]:
        table = _ingest_long(path, rows)
    else:
        table = _ingest_wide(path, cols[1:], rows)
    dates, names, caps = table

    complete = [j for j in range(len(names))
                if not any(np.isnan(caps[:, j]))]
    dropped = [names[j] for j in range(len(names)) if j not in complete]
    if len(complete) < 2:
        raise InputError(
            f"{path}: fewer than 2 assets with a complete history "
            f"(dropped: {', '.join(dropped) or 'none'})")
    caps = caps[:, complete]
    names = [names[j] for j in complete]

    meta = {"source": os.path.basename(path),
            "dropped_assets": ",".join(dropped)}
    meta.update(comments)
    return MarketHistory(times=np.asarray(dates, dtype=float),
                         log_caps=np.log(caps), names=tuple(names),
                         dt=dt, meta=meta)


def _parse_date(raw: str, ordinal: dict) -> float:
    try:
        return float(raw)
    except ValueError:
        if raw not in ordinal:
            ordinal[raw] = float(len(ordinal))
        return ordinal[raw]


def _check_cap(raw: str, path_row: str) -> float:
    try:
        cap = float(raw)
    except ValueError:
        raise InputError(f"unparseable capitalization {raw!r} at {path_row}")
    if not np.isfinite(cap) or cap <= 0.0:
        raise InputError(f"non-positive capitalization {raw!r} at {path_row}")
    return cap


def _ingest_long(path: str, rows: list[list[str]]):
    ordinal: dict = {}
    cells: dict = {}
    names: list[str] = []
    dates: list[float] = []
    for idx, row in enumerate(rows, start=2):
        if len(row) != 3:
            raise InputError(f"{path}: row {idx} does not have 3 fields")
        date = _parse_date(row[0].strip(), ordinal)
        asset = row[1].strip()
        if row[2].strip() == "":
            cap = np.nan
        else:
            cap = _check_cap(row[2].strip(), f"{path}: row {idx}")
        if asset not in names:
            names.append(asset)
        if date not in dates:
            dates.append(date)
        cells[(date, asset)] = cap
    dates = sorted(dates)
    caps = np.full((len(dates), len(names)), np.nan)
    for t, date in enumerate(dates):
        for j, asset in enumerate(names):
            if (date, asset) in cells:
                caps[t, j] = cells[(date, asset)]
    return dates, names, caps


def _ingest_wide(path: str, names: list[str], rows: list[list[str]]):
    ordinal: dict = {}
    dates: list[float] = []
    caps = np.full((len(rows), len(names)), np.nan)
    for t, row in enumerate(rows):
        idx = t + 2  # header occupies line 1
        if len(row) != len(names) + 1:
            raise InputError(f"{path}: row {idx} does not have "
                             f"{len(names) + 1} fields")
        dates.append(_parse_date(row[0].strip(), ordinal))
        for j, raw in enumerate(row[1:]):
            if raw.strip() == "":
                continue
            caps[t, j] = _check_cap(raw.strip(), f"{path}: row {idx}, "
                                    f"column {names[j]!r}")
    order = np.argsort(dates, kind="stable")
    return [dates[i] for i in order], names, caps[order]


def write_history_csv(history: MarketHistory, path: str) -> None:
    """Wide-format export with the run metadata as comment lines."""
    comments = {str(k): str(v) for k, v in sorted(history.meta.items())}
    comments["dt"] = _fmt(history.dt)
    caps = np.exp(history.log_caps)
    rows = ([_fmt(t)] + [_fmt(c) for c in row]
            for t, row in zip(history.times, caps))
    _write_rows(path, ["date", *history.names], rows, comments)


def write_capital_distribution(curves: dict, path: str) -> None:
    """Ranked-weight curves, one block per labelled time stamp."""
    rows = []
    for label in sorted(curves):
        curve = curves[label]
        for k in range(curve.n):
            rows.append([label, k + 1, _fmt(curve.ranked_weights[k]),
                         _fmt(curve.log_rank[k]), _fmt(curve.log_weight[k])])
    _write_rows(path, ["stamp", "rank", "weight", "log_rank", "log_weight"],
                rows)


def write_first_order(estimates: FirstOrderEstimates, bandwidth: float,
                      path: str) -> None:
    sm_s2 = smooth_by_rank(estimates.sigma2, bandwidth)
    sm_g = smooth_by_rank(estimates.g_rank, bandwidth)
    n = estimates.sigma2.size
    rows = ([k + 1, _fmt(estimates.sigma2[k]), _fmt(estimates.g_rank[k]),
             _fmt(sm_s2[k]), _fmt(sm_g[k]), _fmt(estimates.net_rank_drift[k])]
            for k in range(n))
    _write_rows(path, ["rank", "sigma2", "g_rank", "sigma2_smooth",
                       "g_rank_smooth", "net_drift"], rows,
                {"bandwidth": _fmt(bandwidth),
                 "duration_years": _fmt(estimates.duration_years)})


def write_local_times(lam: np.ndarray, path: str) -> None:
    rows = ([f"{k + 1}|{k + 2}", _fmt(lam[k])] for k in range(lam.size))
    _write_rows(path, ["boundary", "lambda"], rows)


def write_occupation(theta: OccupationMatrix, names, path: str) -> None:
    rows = ([k + 1] + [_fmt(v) for v in theta.theta[k]]
            for k in range(theta.n))
    _write_rows(path, ["rank", *names], rows)


def write_flows(table: FlowTable, path: str) -> None:
    n = table.phi.shape[0]
    rows = ([k + 1, int(tau), _fmt(table.phi[k, j]), _fmt(table.phi_rev[k, j])]
            for k in range(n) for j, tau in enumerate(table.taus))
    _write_rows(path, ["rank", "tau", "phi", "phi_rev"], rows,
                {"valid_window_count": str(table.valid_window_count)})


def write_rank_map(rank_map: RankMap, fit: Optional[LinearRankFit],
                   path: str) -> None:
    comments = {"tau": str(rank_map.tau)}
    if fit is not None:
        comments["fit_intercept"] = _fmt(fit.intercept)
        comments["fit_slope"] = _fmt(fit.slope)
        comments["fit_rms_residual"] = _fmt(fit.rms_residual)
    n = rank_map.expected_rank_fwd.size
    rows = ([k + 1, _fmt(rank_map.expected_rank_fwd[k] + 1),
             _fmt(rank_map.expected_rank_bwd[k] + 1),
             int(rank_map.averaged[k] + 1)] for k in range(n))
    _write_rows(path, ["rank", "r_fwd", "r_bwd", "r_bar"], rows, comments)


def write_growth_slopes(tau: int, g_bar: np.ndarray, slopes, fit_zero,
                        fit_tau, path: str) -> None:
    comments = {"tau": str(tau)}
    for label, fit in (("fit0", fit_zero), ("fit_tau", fit_tau)):
        if fit is not None:
            comments[f"{label}_intercept"] = _fmt(fit.intercept)
            comments[f"{label}_slope"] = _fmt(fit.slope)
    rows = ([k + 1, _fmt(g_bar[k]), _fmt(slopes.forward[k]),
             _fmt(slopes.backward[k]), _fmt(slopes.averaged[k])]
            for k in range(g_bar.size))
    _write_rows(path, ["rank", "g_bar", "G_fwd", "G_bwd", "G_avg"], rows,
                comments)


def write_g_rank(curve: Optional[RecursiveGrowthCurve],
                 g_matrix: Optional[np.ndarray], path: str) -> None:
    """Rank-drift curves from both routes on the integer grid."""
    if curve is None and g_matrix is None:
        raise InputError("nothing to write")
    n = curve.values.size if curve is not None else g_matrix.size
    comments = {}
    if curve is not None:
        comments["recursive_normalized"] = str(curve.normalized).lower()
        if curve.truncated_at is not None:
            comments["recursive_truncated_at"] = _fmt(curve.truncated_at + 1)
    if curve is not None and g_matrix is not None:
        overlap = curve.visited
        disc = np.abs((curve.values - curve.values[overlap].mean())
                      - (g_matrix - g_matrix[overlap].mean()))[overlap]
        comments["max_discrepancy_visited"] = _fmt(disc.max())
    rows = []
    for k in range(n):
        row = [k + 1]
        row.append(_fmt(curve.values[k]) if curve is not None else "")
        row.append("" if curve is None else str(bool(curve.visited[k])).lower())
        row.append("" if curve is None else _fmt(curve.spread[k]))
        row.append(_fmt(g_matrix[k]) if g_matrix is not None else "")
        rows.append(row)
    _write_rows(path, ["rank", "g_recursive", "visited", "spread", "g_matrix"],
                rows, comments)


def write_gamma(names, avg_rank_1based: np.ndarray, gamma: np.ndarray,
                path: str) -> None:
    """Per-name drift table with display ranks and percent formatting."""
    rows = ([names[i], int(avg_rank_1based[i]), _fmt(gamma[i]),
             f"{100.0 * gamma[i]:.2f}%"] for i in range(len(names)))
    _write_rows(path, ["name", "avg_rank", "gamma", "gamma_pct"], rows)


def write_residuals(report: ConsistencyReport, path: str) -> None:
    rows = []
    for k, v in enumerate(report.residual_rank):
        rows.append(["rank", k + 1, _fmt(v)])
    for i, v in enumerate(report.residual_name):
        rows.append(["name", i + 1, _fmt(v)])
    _write_rows(path, ["identity", "index", "residual"], rows,
                {"max_rank_residual": _fmt(report.max_rank),
                 "max_name_residual": _fmt(report.max_name)})


def write_manifest(entries: dict, path: str) -> None:
    """Key-value run manifest, sorted for byte determinism."""
    with open(path, "w", newline="") as fh:
        for key in sorted(entries):
            fh.write(f"{key}: {entries[key]}\n")


def average_log_weight_ranks(weights) -> np.ndarray:
    """1-based display rank of each name's time-averaged log weight."""
    avg = weights.log_weights.mean(axis=0)
    order = np.argsort(-avg, kind="stable")
    ranks = np.empty(avg.size, dtype=int)
    ranks[order] = np.arange(1, avg.size + 1)
    return ranks
