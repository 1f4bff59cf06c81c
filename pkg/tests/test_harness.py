import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from crnoma.cli import main
from crnoma.environment import Environment
from crnoma.harness import (
    CSV_HEADER,
    EpisodeRecord,
    Scenario,
    battery_violations,
    builtin_scenarios,
    get_scenario,
    oracle_beta,
    run_experiment,
    summarize,
    trailing_mean,
)
from crnoma.netmodel import equally_spaced


def record(k, value, n=4):
    return EpisodeRecord(k, np.full(n, float(value)), 0.1, 0.0, 0.0, 0.0, 0.1)


def short(name="det2", episodes=3, slots=20):
    sc = get_scenario(name)
    return Scenario(sc.name, sc.config, sc.fading_mode, episodes, slots)


def test_builtin_scenarios_geometry():
    names = {s.name: s for s in builtin_scenarios()}
    assert names["det2"].config.primary_positions == ((0.0, 1.0), (0.0, 1000.0))
    assert names["const-fading-M10"].config.primary_positions == equally_spaced((1, 0), (1000, 0), 10)
    assert names["tv-fading-M2"].fading_mode == "per_episode"
    assert all(s.config.harvest_efficiency == 0.7 for s in names.values())
    with pytest.raises(KeyError):
        get_scenario("nope")


def test_oracle_policy_harvests_at_nearest_user(det2):
    env = Environment(det2)
    env.reset(0)
    assert oracle_beta(env) == 1.0
    env.step(1.0)
    assert oracle_beta(env) == 0.0


@pytest.mark.parametrize("policy", ["ddpg", "greedy", "random", "oracle"])
def test_csv_rows_and_header(tmp_path, policy):
    sc = short()
    recs = run_experiment(sc, policy, seed=1, out_dir=tmp_path)
    path = tmp_path / f"det2_{policy}_seed1.csv"
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) - 1 == len(recs) == 3
    assert float(rows[1][1]) == recs[0].mean_reward


def test_same_seed_reproducible(tmp_path):
    sc = short("tv-fading-M2", episodes=8, slots=100)
    a = run_experiment(sc, "ddpg", seed=2, out_dir=tmp_path / "a")
    b = run_experiment(sc, "ddpg", seed=2, out_dir=tmp_path / "b")
    for x, y in zip(a, b):
        assert np.array_equal(x.rewards, y.rewards) and x.final_battery == y.final_battery
    cols = lambda p: [r[:4] for r in csv.reader(open(p))]  # drop wall time
    name = "tv-fading-M2_ddpg_seed2.csv"
    assert cols(tmp_path / "a" / name) == cols(tmp_path / "b" / name)
    c = run_experiment(sc, "ddpg", seed=3)
    assert not all(np.array_equal(x.rewards, y.rewards) for x, y in zip(a, c))


def test_trailing_mean_and_summary():
    recs = [record(k, 3.0) for k in range(5)]
    assert trailing_mean(recs, 3) == 3.0
    recs = [record(k, k) for k in range(5)]
    assert trailing_mean(recs, 1) == 4.0
    with pytest.warns(UserWarning):
        assert trailing_mean(recs, 10) == 2.0
    summary = summarize({"a": recs, "b": [record(k, 1.0) for k in range(5)]}, 2)
    assert summary.rows["a"]["trailing"] == 3.5
    assert summary.rows["a"]["best_episode"] == 4
    assert "a" in summary.table() and "b" in summary.table()


def test_battery_violation_counter():
    ok = record(0, 1.0)
    bad = EpisodeRecord(1, np.zeros(2), 0.0, 0.0, 0.0, -1e-3, 0.1)
    assert battery_violations([ok, bad], 0.1) == 1


def test_cli_list(capsys):
    assert main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    for s in builtin_scenarios():
        assert s.name in out


def test_cli_run_with_env_dir_and_config(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("CRNOMA_OUT_DIR", str(tmp_path / "env"))
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"battery_capacity": 0.05}))
    assert main(["run", "--scenario", "det2", "--policy", "greedy", "--episodes", "2",
                 "--seed", "0", "1", "--config", str(cfg), "--window", "2"]) == 0
    files = sorted(p.name for p in (tmp_path / "env").iterdir())
    assert files == ["det2_greedy_seed0.csv", "det2_greedy_seed1.csv"]
    assert "greedy/s0" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"battery_capacty": 0.05}))
    with pytest.raises(KeyError):
        main(["run", "--scenario", "det2", "--episodes", "1", "--config", str(bad)])


def test_cli_out_flag_overrides_env(tmp_path, monkeypatch):
    monkeypatch.setenv("CRNOMA_OUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--scenario", "det2", "--policy", "oracle", "--episodes", "1",
                 "--out", str(tmp_path / "flag"), "--window", "1"]) == 0
    assert (tmp_path / "flag" / "det2_oracle_seed0.csv").exists()
    assert not (tmp_path / "env").exists()


@pytest.mark.slow
def test_cli_verify_subprocess():
    res = subprocess.run([sys.executable, "-m", "crnoma", "verify"], capture_output=True, text=True)
    assert res.returncode == 0, res.stdout + res.stderr
    assert res.stdout.count("[PASS]") == 5
