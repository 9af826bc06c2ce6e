import hashlib
import json
import os

import numpy as np
import pytest

from atlaslab import InputError, compute_weights
from atlaslab.cli import build_config, closed_loop_params, main
from atlaslab.dataio import (average_log_weight_ranks, ingest_csv,
                             read_table, write_gamma, write_history_csv)
from atlaslab.errors import ConfigError

from conftest import history_from_log_caps


LONG_CSV = """date,asset,cap
0,aa,10.0
0,bb,30.0
1,aa,11.0
1,bb,29.0
2,aa,12.0
2,bb,28.0
"""

WIDE_CSV = """date,aa,bb
0,10.0,30.0
1,11.0,29.0
2,12.0,28.0
"""


def test_ingest_long_and_wide_agree(tmp_path):
    long_path = tmp_path / "long.csv"
    wide_path = tmp_path / "wide.csv"
    long_path.write_text(LONG_CSV)
    wide_path.write_text(WIDE_CSV)
    a = ingest_csv(str(long_path))
    b = ingest_csv(str(wide_path))
    assert a.n_steps == 3 and a.n_assets == 2
    assert a.names == b.names == ("aa", "bb")
    assert np.allclose(a.log_caps, b.log_caps, atol=1e-15)
    assert np.allclose(a.log_caps[0], np.log([10.0, 30.0]))


def test_ingest_drops_incomplete_assets(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("date,aa,bb,cc\n0,1.0,2.0,3.0\n1,1.1,,3.1\n2,1.2,2.2,3.2\n")
    history = ingest_csv(str(path))
    assert history.names == ("aa", "cc")
    assert history.meta["dropped_assets"] == "bb"


def test_ingest_rejects_non_positive_cap_with_row(tmp_path):
    path = tmp_path / "z.csv"
    path.write_text("date,aa,bb\n0,1.0,2.0\n1,0.0,2.0\n")
    with pytest.raises(InputError, match="row 3"):
        ingest_csv(str(path))


def test_ingest_rejects_too_few_survivors(tmp_path):
    path = tmp_path / "few.csv"
    path.write_text("date,aa,bb\n0,1.0,\n1,1.1,2.0\n")
    with pytest.raises(InputError, match="fewer than 2"):
        ingest_csv(str(path))


def test_history_round_trip_in_log_space(tmp_path):
    rng = np.random.default_rng(6)
    history = history_from_log_caps(rng.normal(scale=30.0, size=(20, 4)))
    path = tmp_path / "h.csv"
    write_history_csv(history, str(path))
    back = ingest_csv(str(path))
    assert np.abs(back.log_caps - history.log_caps).max() < 1e-12


def test_gamma_table_round_trips_losslessly(tmp_path):
    names = ["GE", "AAPL", "KO"]
    gamma = np.array([0.0014, -0.0167, 0.0026])
    path = tmp_path / "gamma.csv"
    write_gamma(names, np.array([1, 93, 4]), gamma, str(path))
    header, rows, _ = read_table(str(path))
    assert header == ["name", "avg_rank", "gamma", "gamma_pct"]
    parsed = np.array([float(r[2]) for r in rows])
    assert np.array_equal(parsed, gamma)
    assert rows[1][3] == "-1.67%"
    assert rows[1][1] == "93"


def test_average_log_weight_ranks():
    w = compute_weights(history_from_log_caps(
        np.log([[1.0, 8.0, 3.0], [1.0, 8.0, 3.0]])))
    assert average_log_weight_ranks(w).tolist() == [3, 1, 2]


def test_build_config_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown config key"):
        build_config("closed-loop", {"bogus": 1}, {})


def test_build_config_validates_ranges():
    with pytest.raises(ConfigError, match="positive"):
        build_config("closed-loop", {"t_years": -5}, {})


def test_build_config_flag_overrides_file():
    config = build_config("closed-loop", {"seed": 3, "n": 4}, {"seed": 9})
    assert config["seed"] == 9 and config["n"] == 4


def test_closed_loop_params_are_valid():
    from atlaslab import validate_second_order

    params = closed_loop_params(10)
    assert validate_second_order(params).valid
    assert abs(params.g.sum()) < 1e-12
    assert abs(params.gamma.sum()) < 1e-12
    assert params.sigma.min() >= 0.2 and params.sigma.max() <= 0.4


def _bundle_digest(out_dir):
    digest = hashlib.sha256()
    for name in sorted(os.listdir(out_dir)):
        digest.update(name.encode())
        with open(os.path.join(out_dir, name), "rb") as fh:
            digest.update(fh.read())
    return digest.hexdigest()


@pytest.fixture(scope="module")
def loop_dirs(tmp_path_factory):
    """Two identical small closed-loop runs plus their file digests."""
    args = ["closed-loop", "--n", "4", "--t-years", "6", "--seed", "7",
            "--tau", "40", "--window", "19", "--max-lag", "100",
            "--lag-step", "20"]
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path_factory.mktemp(f"loop_{name}") / "out")
        assert main(args + ["--out-dir", out]) == 0
        outs.append(out)
    return outs


def test_closed_loop_bundle_is_byte_identical(loop_dirs):
    a, b = loop_dirs
    assert _bundle_digest(a) == _bundle_digest(b)


def test_closed_loop_writes_expected_layout(loop_dirs):
    expected = {"manifest.txt", "history.csv", "first_order.csv",
                "local_times.csv", "occupation.csv", "flows.csv",
                "rank_map.csv", "g_rank.csv", "gamma.csv", "residuals.csv",
                "capital_distribution.csv", "growth_slopes.csv",
                "recovery.csv"}
    files = set(os.listdir(loop_dirs[0]))
    assert expected <= files
    figures = {f for f in files if f.startswith("fig_")}
    assert {"fig_capital_distribution.png", "fig_flows.png",
            "fig_rank_map.png", "fig_g_recursive.png"} <= figures


def test_manifest_records_reproducibility(loop_dirs):
    with open(os.path.join(loop_dirs[0], "manifest.txt")) as fh:
        manifest = fh.read()
    assert "command: closed-loop" in manifest
    assert "config.seed: 7" in manifest
    assert "rng: numpy default_rng (PCG64)" in manifest
    assert "recovery.max_g_error" in manifest


def test_g_rank_export_parses_losslessly(loop_dirs):
    header, rows, comments = read_table(
        os.path.join(loop_dirs[0], "g_rank.csv"))
    assert header == ["rank", "g_recursive", "visited", "spread", "g_matrix"]
    g_matrix = np.array([float(r[4]) for r in rows])
    assert np.all(np.isfinite(g_matrix))
    assert "max_discrepancy_visited" in comments
    # shortest-repr floats round-trip: re-writing parsed values matches
    assert [repr(float(v)) for v in g_matrix] == [r[4] for r in rows]


def test_identity_surfaced_in_manifest(loop_dirs):
    with open(os.path.join(loop_dirs[0], "manifest.txt")) as fh:
        lines = dict(line.strip().split(": ", 1)
                     for line in fh if ": " in line)
    lhs = float(lines["identity.sum_g_rank_times_T"])
    rhs = float(lines["identity.total_log_weight_change"])
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_first_order_command_on_ingested_data(tmp_path):
    src = tmp_path / "in.csv"
    rng = np.random.default_rng(2)
    caps = np.exp(np.cumsum(0.01 * rng.standard_normal((300, 3)), axis=0))
    lines = ["date," + ",".join(f"s{j}" for j in range(3))]
    for t in range(300):
        lines.append(",".join([str(t)] + [repr(float(c)) for c in caps[t]]))
    src.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out"
    code = main(["first-order", "--input", str(src), "--out-dir", str(out),
                 "--no-figures"])
    assert code == 0
    assert (out / "first_order.csv").exists()
    assert not list(out.glob("fig_*"))


def test_cli_exit_codes(tmp_path, capsys):
    missing = str(tmp_path / "missing.csv")
    assert main(["first-order", "--input", missing,
                 "--out-dir", str(tmp_path / "o1")]) == 2
    assert "InputError" in capsys.readouterr().err

    bad_config = tmp_path / "bad.json"
    bad_config.write_text(json.dumps({"nope": 1}))
    assert main(["closed-loop", "--config", str(bad_config),
                 "--out-dir", str(tmp_path / "o2")]) == 4
    err = capsys.readouterr().err
    assert err.startswith("error: ConfigError") and "\n" not in err.strip()

    assert main(["simulate", "--out-dir", str(tmp_path / "o3")]) == 4


def test_flows_and_second_order_commands_on_file(tmp_path):
    sim_out = tmp_path / "sim"
    assert main(["simulate", "--atlas-n", "4", "--n-steps", "2000",
                 "--seed", "12", "--out-dir", str(sim_out),
                 "--no-figures"]) == 0
    history = str(sim_out / "history.csv")

    flow_out = tmp_path / "fl"
    assert main(["flows", "--input", history, "--out-dir", str(flow_out),
                 "--max-lag", "100", "--lag-step", "20", "--tau", "40",
                 "--window", "19", "--no-figures"]) == 0
    header, rows, comments = read_table(str(flow_out / "flows.csv"))
    assert header == ["rank", "tau", "phi", "phi_rev"]
    assert int(comments["valid_window_count"]) == 2000 - 100
    zero_rows = [r for r in rows if r[1] == "0"]
    assert all(float(r[2]) == 0.0 for r in zero_rows)

    so_out = tmp_path / "so"
    assert main(["second-order", "--input", history, "--out-dir",
                 str(so_out), "--max-lag", "100", "--lag-step", "20",
                 "--tau", "40", "--window", "19", "--no-figures"]) == 0
    _, _, comments = read_table(str(so_out / "g_rank.csv"))
    assert "max_discrepancy_visited" in comments
    assert (so_out / "residuals.csv").exists()
    assert (so_out / "gamma.csv").exists()


def test_simulate_command_params_file(tmp_path):
    params = {"gamma": [0.0, 0.0], "g": [-0.5, 0.5], "sigma": [0.3, 0.3]}
    pfile = tmp_path / "params.json"
    pfile.write_text(json.dumps(params))
    out = tmp_path / "sim"
    assert main(["simulate", "--params-file", str(pfile), "--n-steps", "500",
                 "--seed", "5", "--out-dir", str(out),
                 "--no-figures"]) == 0
    history = ingest_csv(str(out / "history.csv"))
    assert history.n_steps == 500 and history.n_assets == 2
    assert history.meta["seed"] == "5"
