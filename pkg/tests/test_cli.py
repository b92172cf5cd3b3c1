"""CLI contract: subcommands, config validation, overrides, exit codes."""

import json
import os
import subprocess
import sys

import pytest

from arcanesim.cli import ConfigError, build_sim_config, main

CONFIG = """
[topology]
nodes = 16
uplinks_per_t0 = 4
link_gbps = 10.0
latency_ns = 4000

[workload]
kind = "tornado"
message_bytes = 262144

[transport]
rto_us = 300.0
cwnd_max_bdp = 1.0

[lb]
kind = "ops"

[sim]
seeds = [1]
"""


@pytest.fixture()
def config_path(tmp_path):
    p = tmp_path / "exp.toml"
    p.write_text(CONFIG)
    return str(p)


class TestConfigParsing:
    def test_builds_sim_config(self, config_path):
        cfg, seeds, out_dir = build_sim_config(
            {"topology": {"nodes": 32}, "lb": {"kind": "ecmp"}})
        assert cfg.nodes == 32 and cfg.lb == "ecmp"
        assert seeds is None and out_dir == "out"

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown section"):
            build_sim_config({"topologyy": {}})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            build_sim_config({"transport": {"mtu": 9000}})

    def test_set_override_and_lb_shorthand(self):
        cfg, _, _ = build_sim_config({}, overrides=["lb=arcane", "topology.nodes=64"])
        assert cfg.lb == "arcane" and cfg.nodes == 64

    def test_failure_entries_validated(self):
        cfg, _, _ = build_sim_config(
            {"failures": [{"link": "t0_0-t1_0", "start_us": 1.0, "end_us": 2.0,
                           "mode": "down"}]})
        assert cfg.failures == (("t0_0-t1_0", 1.0, 2.0, "down", None),)
        with pytest.raises(ConfigError, match="missing"):
            build_sim_config({"failures": [{"link": "x"}]})


class TestSimCommand:
    def test_writes_all_outputs(self, config_path, tmp_path):
        out = tmp_path / "results"
        rc = main(["sim", "--config", config_path, "--out-dir", str(out)])
        assert rc == 0
        for name in ("ports.csv", "flows.csv", "drops.csv", "summary.json"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["runs"][0]["seed"] == 1
        assert summary["config"]["workload"] == "tornado"

    def test_byte_identical_on_rerun(self, config_path, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        main(["sim", "--config", config_path, "--out-dir", str(out1)])
        main(["sim", "--config", config_path, "--out-dir", str(out2)])
        for name in ("ports.csv", "flows.csv", "drops.csv", "summary.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_missing_config_exit_2(self, capsys):
        assert main(["sim", "--config", "/definitely/not/here.toml"]) == 2
        assert "not found" in capsys.readouterr().err

    def test_bad_key_exit_2(self, config_path, capsys):
        assert main(["sim", "--config", config_path, "--set", "lb.zzz=1"]) == 2

    def test_env_var_overrides_out_dir(self, config_path, tmp_path, monkeypatch):
        env_dir = tmp_path / "envout"
        monkeypatch.setenv("ARCANE_OUT_DIR", str(env_dir))
        assert main(["sim", "--config", config_path, "--out-dir", str(tmp_path / "ignored")]) == 0
        assert (env_dir / "flows.csv").exists()

    def test_parallel_jobs_match_sequential(self, config_path, tmp_path):
        out1, out2 = tmp_path / "seq", tmp_path / "par"
        main(["sim", "--config", config_path, "--seeds", "1,2", "--out-dir", str(out1)])
        main(["sim", "--config", config_path, "--seeds", "1,2", "--jobs", "2",
              "--out-dir", str(out2)])
        assert (out1 / "flows.csv").read_bytes() == (out2 / "flows.csv").read_bytes()


class TestBallsbinsCommand:
    def test_recycled_outputs(self, tmp_path):
        rc = main(["ballsbins", "recycled", "--n", "5", "--rounds", "40",
                   "--seeds", "1,2", "--per-bin", "--out-dir", str(tmp_path)])
        assert rc == 0
        body = (tmp_path / "recycled_n5_seed1.csv").read_text().splitlines()
        assert body[0] == "round,max_load,Y_t,K_t,total_balls,converged"
        assert len(body) == 41
        bins = (tmp_path / "recycled_bins_n5_seed1.csv").read_text().splitlines()
        assert bins[0] == "round,bin,load"
        assert len(bins) == 1 + 40 * 5
        assert (tmp_path / "recycled_n5_aggregate.csv").exists()

    def test_batched_outputs_and_determinism(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            main(["ballsbins", "batched", "--n", "8", "--lambda", "0.9",
                  "--rounds", "30", "--seeds", "3", "--out-dir", str(out)])
        assert (a / "batched_n8_seed3.csv").read_bytes() == (b / "batched_n8_seed3.csv").read_bytes()
        header = (a / "batched_n8_seed3.csv").read_text().splitlines()[0]
        assert header == "round,max_load,total_balls"

    def test_default_seed_warns(self, tmp_path, capsys):
        main(["ballsbins", "batched", "--n", "4", "--rounds", "5",
              "--out-dir", str(tmp_path)])
        assert "defaulting to seed 1" in capsys.readouterr().err


class TestLemmasCommand:
    def test_clean_grid_exit_0(self, tmp_path):
        assert main(["lemmas", "--ns", "16", "--out-dir", str(tmp_path)]) == 0
        header = (tmp_path / "lemmas.csv").read_text().splitlines()[0]
        assert header == "lemma,n,k,x,exact,bound,ok"

    def test_negative_control_exit_1(self, tmp_path):
        assert main(["lemmas", "--ns", "16", "--bound-scale", "1e-6",
                     "--out-dir", str(tmp_path)]) == 1

    def test_single_point_mode(self, capsys, tmp_path):
        rc = main(["lemmas", "--n", "16", "--k", "16", "--x", "16",
                   "--out-dir", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "exact=5.421011e-20" in out


class TestEvsCommand:
    def test_csv_schema_and_single_uplink(self, tmp_path):
        rc = main(["evs", "--flows", "2", "--uplinks", "1", "--sizes", "16",
                   "--trials", "5", "--out-dir", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "evs.csv").read_text().splitlines()
        assert lines[0] == "flows,uplinks,evs_size,trial,imbalance"
        assert all(line.endswith("0.000000") for line in lines[1:])


class TestCompareCommand:
    def test_identical_configs(self, config_path, tmp_path, capsys):
        rc = main(["compare", "--config-a", config_path, "--config-b", config_path,
                   "--seeds", "1", "--out-dir", str(tmp_path)])
        assert rc == 0
        data = json.loads((tmp_path / "compare.json").read_text())
        assert data["fct_ratio_b_over_a_mean"] == 1.0


def test_console_entrypoint_runs():
    proc = subprocess.run([sys.executable, "-m", "arcanesim.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "ballsbins" in proc.stdout
