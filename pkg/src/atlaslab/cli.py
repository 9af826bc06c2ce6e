"""Command-line pipeline: simulate, estimate, and export report bundles.

Subcommands
-----------
simulate      generate a model path and write it as history.csv
first-order   rank-based variance/growth/local-time/occupation estimates
flows         flow table and expected-rank maps
second-order  both recovery routes for the name and rank drifts
closed-loop   simulate with known parameters, then recover them

Every command writes deterministic CSV tables, a ``manifest.txt``, and
(unless ``--no-figures``) the matching PNG figures into the output
directory.  Options may come from a flat JSON config file; command-line
flags override it, unknown config keys are rejected, and environment
variables are never consulted.

Exit codes: 0 success, 2 input error, 3 numerical degeneracy, 4 config
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__, dataio, report
from .core import (DEFAULT_DT, MarketHistory, SecondOrderParams,
                   compute_weights, validate_second_order)
from .errors import AtlasLabError, ConfigError, InputError
from .first_order import estimate_first_order, estimate_occupation_matrix
from .flows import averaged_rank_map, flow_table, growth_slope
from .ranking import capital_distribution_curve
from .second_order import (estimate_gamma_series, fit_linear_rank_maps,
                           gamma_from_theta, perron_check,
                           recursive_rank_growth, solve_rank_growth_matrix,
                           verify_consistency)
from .simulate import RNG_ALGORITHM, SimulationConfig, simulate_second_order

_POSITIVE = "positive"
_NON_NEGATIVE = "non-negative"

# command -> option name -> (type, default, constraint)
_SCHEMAS: dict[str, dict[str, tuple]] = {
    "simulate": {
        "out_dir": (str, "atlaslab-out", None),
        "figures": (bool, True, None),
        "params_file": (str, None, None),
        "atlas_n": (int, None, _POSITIVE),
        "n_steps": (int, 25_000, _POSITIVE),
        "dt": (float, DEFAULT_DT, _POSITIVE),
        "seed": (int, 0, None),
        "burn_in": (int, 0, _NON_NEGATIVE),
    },
    "first-order": {
        "out_dir": (str, "atlaslab-out", None),
        "figures": (bool, True, None),
        "input": (str, None, None),
        "dt": (float, DEFAULT_DT, _POSITIVE),
        "bandwidth": (float, 1.0, _POSITIVE),
    },
    "flows": {
        "out_dir": (str, "atlaslab-out", None),
        "figures": (bool, True, None),
        "input": (str, None, None),
        "dt": (float, DEFAULT_DT, _POSITIVE),
        "max_lag": (int, 1000, _POSITIVE),
        "lag_step": (int, 20, _POSITIVE),
        "tau": (int, 1000, _POSITIVE),
        "window": (int, 19, _POSITIVE),
    },
    "second-order": {
        "out_dir": (str, "atlaslab-out", None),
        "figures": (bool, True, None),
        "input": (str, None, None),
        "dt": (float, DEFAULT_DT, _POSITIVE),
        "bandwidth": (float, 1.0, _POSITIVE),
        "max_lag": (int, 1000, _POSITIVE),
        "lag_step": (int, 20, _POSITIVE),
        "tau": (int, 1000, _POSITIVE),
        "window": (int, 19, _POSITIVE),
        "anchor_rank": (int, 0, _NON_NEGATIVE),
    },
    "closed-loop": {
        "out_dir": (str, "atlaslab-out", None),
        "figures": (bool, True, None),
        "n": (int, 10, _POSITIVE),
        "t_years": (float, 100.0, _POSITIVE),
        "dt": (float, DEFAULT_DT, _POSITIVE),
        "seed": (int, 2024, None),
        "burn_in_frac": (float, 0.1, _NON_NEGATIVE),
        "bandwidth": (float, 1.0, _POSITIVE),
        "max_lag": (int, 1000, _POSITIVE),
        "lag_step": (int, 20, _POSITIVE),
        "tau": (int, 200, _POSITIVE),
        "window": (int, 19, _POSITIVE),
        "anchor_rank": (int, 0, _NON_NEGATIVE),
    },
}


def closed_loop_params(n: int) -> SecondOrderParams:
    """Reference closed-loop model: ramps for every parameter vector.

    Name drifts ramp over [-0.04, 0.04], rank drifts increase with rank
    number (largest stocks lose ground, smallest gain), volatilities ramp
    over [0.2, 0.4].
    """
    gamma = np.linspace(-0.04, 0.04, n)
    g = np.linspace(-0.27, 0.27, n)
    sigma = np.linspace(0.2, 0.4, n)
    return SecondOrderParams(gamma=gamma - gamma.mean(), g=g - g.mean(),
                             sigma=sigma)


def default_atlas_params(n: int) -> SecondOrderParams:
    """Simple rank-only demo model with equal volatilities."""
    g = 0.1 * (np.arange(1, n + 1) - (n + 1) / 2.0)
    return SecondOrderParams(gamma=np.zeros(n), g=g - g.mean(),
                             sigma=np.full(n, 0.3))


def build_config(command: str, file_config: dict, flags: dict) -> dict:
    """Merge defaults, config file, and flags; reject unknown keys."""
    schema = _SCHEMAS[command]
    config = {key: spec[1] for key, spec in schema.items()}
    for key, value in file_config.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {key!r} for {command}")
        typ = schema[key][0]
        try:
            config[key] = typ(value) if value is not None else None
        except (TypeError, ValueError):
            raise ConfigError(f"config key {key!r} expects {typ.__name__}")
    for key, value in flags.items():
        if value is not None and key in schema:
            config[key] = value
    for key, (typ, _default, constraint) in schema.items():
        value = config[key]
        if value is None:
            continue
        if constraint == _POSITIVE and not value > 0:
            raise ConfigError(f"{key} must be positive, got {value!r}")
        if constraint == _NON_NEGATIVE and not value >= 0:
            raise ConfigError(f"{key} must be non-negative, got {value!r}")
    return config


def _load_params(config: dict) -> SecondOrderParams:
    if config.get("params_file"):
        path = config["params_file"]
        if not os.path.exists(path):
            raise InputError(f"params file not found: {path}")
        with open(path) as fh:
            raw = json.load(fh)
        unknown = set(raw) - {"gamma", "g", "sigma"}
        if unknown:
            raise ConfigError(
                f"unknown keys in params file: {', '.join(sorted(unknown))}")
        if "g" not in raw or "sigma" not in raw:
            raise ConfigError("params file needs at least 'g' and 'sigma'")
        g = np.asarray(raw["g"], dtype=float)
        gamma = np.asarray(raw.get("gamma", np.zeros_like(g)), dtype=float)
        sigma = np.asarray(raw["sigma"], dtype=float)
        return SecondOrderParams(gamma=gamma, g=g, sigma=sigma)
    if config.get("atlas_n"):
        return default_atlas_params(config["atlas_n"])
    raise ConfigError("simulate needs either params_file or atlas_n")


def _base_manifest(command: str, config: dict) -> dict:
    entries = {"command": command, "package": f"atlaslab {__version__}",
               "rng": RNG_ALGORITHM}
    for key in sorted(config):
        if key in ("out_dir", "figures", "input"):
            continue
        entries[f"config.{key}"] = config[key]
    if config.get("input"):
        entries["config.input"] = os.path.basename(config["input"])
    return entries


def _lag_grid(config: dict) -> np.ndarray:
    grid = set(range(0, config["max_lag"] + 1, config["lag_step"]))
    grid.add(config["max_lag"])
    grid.add(config["tau"])
    if config["tau"] - config["window"] >= 0:
        grid.add(config["tau"] - config["window"])
    return np.array(sorted(grid), dtype=int)


def _load_history(config: dict) -> MarketHistory:
    if not config.get("input"):
        raise ConfigError("an input history CSV is required (--input)")
    history = dataio.ingest_csv(config["input"], dt=config["dt"])
    dropped = history.meta.get("dropped_assets", "")
    if dropped:
        print(f"dropped assets with incomplete history: {dropped}")
    return history


def _capdist_stamps(weights) -> dict:
    T = weights.n_steps
    return {f"t{t:09d}": capital_distribution_curve(weights, t)
            for t in sorted({0, T // 2, T - 1})}


def _run_simulate(config: dict) -> dict:
    params = _load_params(config)
    sim = SimulationConfig(n_steps=config["n_steps"], dt=config["dt"],
                           seed=config["seed"], burn_in=config["burn_in"])
    history = simulate_second_order(params, sim)
    out = config["out_dir"]
    dataio.write_history_csv(history, os.path.join(out, "history.csv"))
    weights = compute_weights(history)
    curves = _capdist_stamps(weights)
    dataio.write_capital_distribution(
        curves, os.path.join(out, "capital_distribution.csv"))
    if config["figures"]:
        report.capital_distribution_figure(
            curves, os.path.join(out, "fig_capital_distribution.png"))
    entries = _base_manifest("simulate", config)
    entries.update({f"params.{k}": history.meta[k]
                    for k in ("params_sha256_16", "seed", "burn_in")})
    entries["files"] = "capital_distribution.csv,history.csv,manifest.txt"
    dataio.write_manifest(entries, os.path.join(out, "manifest.txt"))
    return {"history": history}


def _first_order_outputs(weights, config: dict, out: str,
                         entries: dict) -> dict:
    estimates = estimate_first_order(weights)
    theta = estimate_occupation_matrix(weights)
    dataio.write_first_order(estimates, config["bandwidth"],
                             os.path.join(out, "first_order.csv"))
    dataio.write_local_times(estimates.lam,
                             os.path.join(out, "local_times.csv"))
    names = [f"A{i + 1}" for i in range(weights.n_assets)]
    dataio.write_occupation(theta, names,
                            os.path.join(out, "occupation.csv"))
    curves = _capdist_stamps(weights)
    dataio.write_capital_distribution(
        curves, os.path.join(out, "capital_distribution.csv"))
    total_change = float(
        (weights.log_weights[-1] - weights.log_weights[0]).sum())
    entries["identity.sum_g_rank_times_T"] = dataio._fmt(
        estimates.g_rank.sum() * estimates.duration_years)
    entries["identity.total_log_weight_change"] = dataio._fmt(total_change)
    if config["figures"]:
        from .first_order import smooth_by_rank

        report.capital_distribution_figure(
            curves, os.path.join(out, "fig_capital_distribution.png"))
        report.rank_profile_figure(
            estimates.sigma2,
            smooth_by_rank(estimates.sigma2, config["bandwidth"]),
            "variance rate", os.path.join(out, "fig_sigma2.png"))
        report.rank_profile_figure(
            estimates.g_rank,
            smooth_by_rank(estimates.g_rank, config["bandwidth"]),
            "growth rate", os.path.join(out, "fig_g_rank.png"))
    return {"estimates": estimates, "theta": theta}


def _run_first_order(config: dict) -> dict:
    history = _load_history(config)
    weights = compute_weights(history)
    out = config["out_dir"]
    entries = _base_manifest("first-order", config)
    result = _first_order_outputs(weights, config, out, entries)
    entries["files"] = ("capital_distribution.csv,first_order.csv,"
                        "local_times.csv,manifest.txt,occupation.csv")
    dataio.write_manifest(entries, os.path.join(out, "manifest.txt"))
    return result


def _flow_outputs(weights, config: dict, out: str, entries: dict,
                  g_bar=None) -> dict:
    taus = _lag_grid(config)
    table = flow_table(weights, taus)
    rank_map = averaged_rank_map(weights, config["tau"])
    slopes = growth_slope(table, config["tau"], config["window"])
    fit_map, fit_growth = fit_linear_rank_maps(rank_map, slopes.averaged)
    dataio.write_flows(table, os.path.join(out, "flows.csv"))
    dataio.write_rank_map(rank_map, fit_map,
                          os.path.join(out, "rank_map.csv"))
    if g_bar is not None:
        _, fit_zero = fit_linear_rank_maps(rank_map, g_bar)
        dataio.write_growth_slopes(config["tau"], g_bar, slopes, fit_zero,
                                   fit_growth,
                                   os.path.join(out, "growth_slopes.csv"))
    if config["figures"]:
        from .ranking import ranked_series

        start_weights = np.exp(ranked_series(weights)).mean(axis=0)
        report.flow_figure(table.taus, table.phi, table.phi_rev,
                           start_weights, os.path.join(out, "fig_flows.png"))
        report.rank_map_figure(rank_map.expected_rank_fwd,
                               rank_map.expected_rank_bwd, config["tau"],
                               os.path.join(out, "fig_rank_map.png"))
        report.averaged_rank_figure(rank_map.averaged, fit_map,
                                    config["tau"],
                                    os.path.join(out, "fig_rank_map_avg.png"))
        if g_bar is not None:
            report.growth_slope_figure(g_bar, slopes.averaged, fit_zero,
                                       fit_growth, config["tau"],
                                       os.path.join(out,
                                                    "fig_growth_slopes.png"))
    entries["flows.valid_window_count"] = table.valid_window_count
    return {"table": table, "rank_map": rank_map, "slopes": slopes}


def _run_flows(config: dict) -> dict:
    history = _load_history(config)
    weights = compute_weights(history)
    out = config["out_dir"]
    entries = _base_manifest("flows", config)
    result = _flow_outputs(weights, config, out, entries)
    entries["files"] = "flows.csv,manifest.txt,rank_map.csv"
    dataio.write_manifest(entries, os.path.join(out, "manifest.txt"))
    return result


def _second_order_outputs(weights, config: dict, out: str,
                          entries: dict) -> dict:
    first = _first_order_outputs(weights, config, out, entries)
    estimates, theta = first["estimates"], first["theta"]
    flow_result = _flow_outputs(weights, config, out, entries,
                                g_bar=estimates.g_rank)
    spectral = perron_check(theta)
    g_matrix = solve_rank_growth_matrix(estimates.g_rank, theta)
    gamma_matrix = gamma_from_theta(g_matrix, theta)
    curve = recursive_rank_growth(
        estimates.g_rank, flow_result["slopes"].averaged,
        flow_result["rank_map"].averaged.astype(float),
        anchor_rank=config["anchor_rank"])
    gamma_series = estimate_gamma_series(weights, g_matrix)
    consistency = verify_consistency(theta, g_matrix, gamma_matrix,
                                     estimates.g_rank)
    dataio.write_g_rank(curve, g_matrix, os.path.join(out, "g_rank.csv"))
    names = [f"A{i + 1}" for i in range(weights.n_assets)]
    avg_ranks = dataio.average_log_weight_ranks(weights)
    dataio.write_gamma(names, avg_ranks, gamma_series,
                       os.path.join(out, "gamma.csv"))
    dataio.write_residuals(consistency, os.path.join(out, "residuals.csv"))
    if config["figures"]:
        report.recursive_growth_figure(
            curve, g_matrix, os.path.join(out, "fig_g_recursive.png"))
    overlap = curve.visited
    disc = np.abs((curve.values - curve.values[overlap].mean())
                  - (g_matrix - g_matrix[overlap].mean()))[overlap]
    entries["second_order.max_route_discrepancy"] = dataio._fmt(disc.max())
    entries["second_order.spectral_gap"] = dataio._fmt(spectral.spectral_gap)
    entries["second_order.theta_ones_residual"] = dataio._fmt(
        spectral.ones_residual)
    return {"first": first, "flows": flow_result, "g_matrix": g_matrix,
            "gamma_matrix": gamma_matrix, "gamma_series": gamma_series,
            "curve": curve, "consistency": consistency}


_SECOND_ORDER_FILES = ("capital_distribution.csv,first_order.csv,flows.csv,"
                       "g_rank.csv,gamma.csv,growth_slopes.csv,"
                       "local_times.csv,manifest.txt,occupation.csv,"
                       "rank_map.csv,residuals.csv")


def _run_second_order(config: dict) -> dict:
    history = _load_history(config)
    weights = compute_weights(history)
    out = config["out_dir"]
    entries = _base_manifest("second-order", config)
    result = _second_order_outputs(weights, config, out, entries)
    entries["files"] = _SECOND_ORDER_FILES
    dataio.write_manifest(entries, os.path.join(out, "manifest.txt"))
    return result


def _run_closed_loop(config: dict) -> dict:
    n = config["n"]
    params = closed_loop_params(n)
    n_steps = int(round(config["t_years"] / config["dt"]))
    sim = SimulationConfig(n_steps=n_steps, dt=config["dt"],
                           seed=config["seed"],
                           burn_in=int(config["burn_in_frac"] * n_steps))
    history = simulate_second_order(params, sim)
    out = config["out_dir"]
    dataio.write_history_csv(history, os.path.join(out, "history.csv"))
    weights = compute_weights(history)
    entries = _base_manifest("closed-loop", config)
    result = _second_order_outputs(weights, config, out, entries)

    rows = []
    for k in range(n):
        rows.append([k + 1, dataio._fmt(params.g[k]),
                     dataio._fmt(result["g_matrix"][k]),
                     dataio._fmt(params.gamma[k]),
                     dataio._fmt(result["gamma_matrix"][k]),
                     dataio._fmt(params.sigma[k]),
                     dataio._fmt(np.sqrt(result["first"]["estimates"].sigma2[k]))])
    dataio._write_rows(
        os.path.join(out, "recovery.csv"),
        ["rank", "g_true", "g_matrix", "gamma_true", "gamma_matrix",
         "sigma_true", "sigma_hat"], rows)
    entries["recovery.max_g_error"] = dataio._fmt(
        np.abs(result["g_matrix"] - params.g).max())
    entries["recovery.max_gamma_error"] = dataio._fmt(
        np.abs(result["gamma_matrix"] - params.gamma).max())
    entries["files"] = _SECOND_ORDER_FILES + ",history.csv,recovery.csv"
    dataio.write_manifest(entries, os.path.join(out, "manifest.txt"))
    result["history"] = history
    return result


_RUNNERS = {
    "simulate": _run_simulate,
    "first-order": _run_first_order,
    "flows": _run_flows,
    "second-order": _run_second_order,
    "closed-loop": _run_closed_loop,
}


def run_pipeline(command: str, config: dict) -> dict:
    """Validate the config, make the output directory, run one command."""
    if command not in _RUNNERS:
        raise ConfigError(f"unknown command {command!r}")
    os.makedirs(config["out_dir"], exist_ok=True)
    return _RUNNERS[command](config)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out-dir", dest="out_dir")
    sub.add_argument("--config", dest="config_file")
    sub.add_argument("--figures", dest="figures", action="store_true",
                     default=None)
    sub.add_argument("--no-figures", dest="figures", action="store_false",
                     default=None)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atlaslab",
        description="Rank-based market model simulation and estimation")
    parser.add_argument("--version", action="version",
                        version=f"atlaslab {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="generate a model path")
    _add_common(sim)
    sim.add_argument("--params-file", dest="params_file")
    sim.add_argument("--atlas-n", dest="atlas_n", type=int)
    sim.add_argument("--n-steps", dest="n_steps", type=int)
    sim.add_argument("--dt", dest="dt", type=float)
    sim.add_argument("--seed", dest="seed", type=int)
    sim.add_argument("--burn-in", dest="burn_in", type=int)

    first = subs.add_parser("first-order", help="rank-based estimates")
    _add_common(first)
    first.add_argument("--input", dest="input")
    first.add_argument("--dt", dest="dt", type=float)
    first.add_argument("--bandwidth", dest="bandwidth", type=float)

    fl = subs.add_parser("flows", help="flow and rank-map tables")
    _add_common(fl)
    fl.add_argument("--input", dest="input")
    fl.add_argument("--dt", dest="dt", type=float)
    fl.add_argument("--max-lag", dest="max_lag", type=int)
    fl.add_argument("--lag-step", dest="lag_step", type=int)
    fl.add_argument("--tau", dest="tau", type=int)
    fl.add_argument("--window", dest="window", type=int)

    second = subs.add_parser("second-order", help="drift recovery")
    _add_common(second)
    second.add_argument("--input", dest="input")
    second.add_argument("--dt", dest="dt", type=float)
    second.add_argument("--bandwidth", dest="bandwidth", type=float)
    second.add_argument("--max-lag", dest="max_lag", type=int)
    second.add_argument("--lag-step", dest="lag_step", type=int)
    second.add_argument("--tau", dest="tau", type=int)
    second.add_argument("--window", dest="window", type=int)
    second.add_argument("--anchor-rank", dest="anchor_rank", type=int)

    loop = subs.add_parser("closed-loop", help="simulate then recover")
    _add_common(loop)
    loop.add_argument("--n", dest="n", type=int)
    loop.add_argument("--t-years", dest="t_years", type=float)
    loop.add_argument("--dt", dest="dt", type=float)
    loop.add_argument("--seed", dest="seed", type=int)
    loop.add_argument("--burn-in-frac", dest="burn_in_frac", type=float)
    loop.add_argument("--bandwidth", dest="bandwidth", type=float)
    loop.add_argument("--max-lag", dest="max_lag", type=int)
    loop.add_argument("--lag-step", dest="lag_step", type=int)
    loop.add_argument("--tau", dest="tau", type=int)
    loop.add_argument("--window", dest="window", type=int)
    loop.add_argument("--anchor-rank", dest="anchor_rank", type=int)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config_file")}
    file_config = {}
    if args.config_file:
        if not os.path.exists(args.config_file):
            print(f"error: ConfigError: config file not found: "
                  f"{args.config_file}", file=sys.stderr)
            return ConfigError.exit_code
        with open(args.config_file) as fh:
            try:
                file_config = json.load(fh)
            except json.JSONDecodeError as exc:
                print(f"error: ConfigError: {exc}", file=sys.stderr)
                return ConfigError.exit_code
    try:
        config = build_config(args.command, file_config, flags)
        run_pipeline(args.command, config)
    except AtlasLabError as exc:
        kind = type(exc).__name__
        print(f"error: {kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
