"""Every figure kind renders from real CLI outputs; bad inputs fail loudly.

The fixtures drive the main package's CLI (its external interface) to
produce genuine CSVs in the documented schemas, at reduced scale so the
whole suite stays fast; the schemas are identical to the full experiment
outputs.
"""

import json
import math

import pytest
from arcanesim.cli import main as arcanesim

import render


@pytest.fixture(scope="module")
def outputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("csvs")
    bb = root / "bb"
    # Recycled chain with per-bin loads (fig6) and spraying runs (fig5).
    assert arcanesim(["ballsbins", "recycled", "--n", "5", "--rounds", "200",
                      "--seeds", "1", "--per-bin", "--out-dir", str(bb)]) == 0
    for n in (8, 16):
        assert arcanesim(["ballsbins", "batched", "--n", str(n), "--lambda", "0.99",
                          "--rounds", "400", "--seeds", "1,2", "--out-dir", str(bb)]) == 0
    # EVS imbalance sweeps for one and many flows (fig13).
    ev1, ev32 = root / "ev1", root / "ev32"
    assert arcanesim(["evs", "--flows", "1", "--uplinks", "8", "--sizes", "32,256",
                      "--trials", "30", "--out-dir", str(ev1)]) == 0
    assert arcanesim(["evs", "--flows", "8", "--uplinks", "8", "--sizes", "32,256",
                      "--trials", "30", "--out-dir", str(ev32)]) == 0
    # A small symmetric tornado (fig4) and a failure comparison (fig9).
    cfg = root / "exp.toml"
    cfg.write_text(
        '[topology]\nnodes = 16\nuplinks_per_t0 = 4\nlink_gbps = 10.0\nlatency_ns = 4000\n'
        '[workload]\nkind = "tornado"\nmessage_bytes = 262144\n'
        '[transport]\nrto_us = 300.0\ncwnd_max_bdp = 1.0\n[lb]\nkind = "arcane"\n'
    )
    sim = root / "sim"
    assert arcanesim(["sim", "--config", str(cfg), "--seeds", "1", "--out-dir", str(sim)]) == 0
    fcfg = root / "fail.toml"
    fcfg.write_text(
        '[topology]\nnodes = 16\nuplinks_per_t0 = 4\nlink_gbps = 10.0\nlatency_ns = 4000\n'
        '[workload]\nkind = "permutation"\nmessage_bytes = 524288\n'
        '[transport]\nrto_us = 150.0\ncwnd_max_bdp = 1.0\n[lb]\nkind = "arcane"\n'
        '[[failures]]\nlink = "t0_0-t1_0"\nstart_us = 50.0\nend_us = 400.0\nmode = "down"\n'
    )
    fail_a, fail_o = root / "fail_arcane", root / "fail_ops"
    assert arcanesim(["sim", "--config", str(fcfg), "--seeds", "1",
                      "--out-dir", str(fail_a)]) == 0
    assert arcanesim(["sim", "--config", str(fcfg), "--set", "lb=ops", "--seeds", "1",
                      "--out-dir", str(fail_o)]) == 0
    return root


def test_fig6_renders_with_tau_rule(outputs, tmp_path):
    out = tmp_path / "fig6.png"
    rc = render.main(["--kind", "fig6",
                      "--in", str(outputs / "bb" / "recycled_bins_n5_seed1.csv"),
                      "--tau", "7", "--out", str(out)])
    assert rc == 0 and out.stat().st_size > 0


def test_fig6_tau_line_in_axes(outputs):
    args = render.main.__globals__["argparse"].Namespace(
        inputs=[str(outputs / "bb" / "recycled_bins_n5_seed1.csv")], tau=7.0)
    fig = render.render_fig6(args)
    ax = fig.axes[0]
    hlines = [ln for ln in ax.lines if set(ln.get_ydata()) == {7.0}]
    assert hlines, "threshold rule missing"


def test_fig5_renders_grouped_by_label(outputs, tmp_path):
    out = tmp_path / "fig5.png"
    rc = render.main([
        "--kind", "fig5",
        "--in", str(outputs / "bb" / "batched_n8_seed1.csv"),
        str(outputs / "bb" / "batched_n8_seed2.csv"),
        str(outputs / "bb" / "batched_n16_seed1.csv"),
        str(outputs / "bb" / "batched_n16_seed2.csv"),
        "--labels", "n=8", "n=8", "n=16", "n=16",
        "--out", str(out)])
    assert rc == 0 and out.stat().st_size > 0


def test_fig4_renders_with_kmin_rule(outputs, tmp_path):
    summary = json.loads((outputs / "sim" / "summary.json").read_text())
    kmin = int(summary["runs"][0]["bdp_bytes"] * 0.2)
    out = tmp_path / "fig4.png"
    rc = render.main(["--kind", "fig4", "--in", str(outputs / "sim" / "ports.csv"),
                      "--kmin-bytes", str(kmin), "--switch", "t0_0", "--out", str(out)])
    assert rc == 0 and out.stat().st_size > 0


def test_fig9_renders_drop_and_fct_bars(outputs, tmp_path):
    out = tmp_path / "fig9.png"
    rc = render.main([
        "--kind", "fig9",
        "--in", str(outputs / "fail_arcane" / "drops.csv"),
        str(outputs / "fail_ops" / "drops.csv"),
        str(outputs / "fail_arcane" / "flows.csv"),
        str(outputs / "fail_ops" / "flows.csv"),
        "--labels", "arcane", "ops", "arcane", "ops",
        "--out", str(out)])
    assert rc == 0 and out.stat().st_size > 0


def test_fig13_renders_boxplots_per_flow_count(outputs, tmp_path):
    out = tmp_path / "fig13.png"
    rc = render.main(["--kind", "fig13",
                      "--in", str(outputs / "ev1" / "evs.csv"), str(outputs / "ev32" / "evs.csv"),
                      "--out", str(out)])
    assert rc == 0 and out.stat().st_size > 0


def test_rerender_is_byte_stable(outputs, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    for out in (a, b):
        assert render.main(["--kind", "fig6",
                            "--in", str(outputs / "bb" / "recycled_bins_n5_seed1.csv"),
                            "--tau", "7", "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_inputs_never_mutated(outputs, tmp_path):
    src = outputs / "bb" / "recycled_bins_n5_seed1.csv"
    before = src.read_bytes()
    render.main(["--kind", "fig6", "--in", str(src), "--tau", "7",
                 "--out", str(tmp_path / "x.png")])
    assert src.read_bytes() == before


class TestFailsLoudly:
    def test_empty_csv_no_image(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        out = tmp_path / "nope.png"
        rc = render.main(["--kind", "fig6", "--in", str(empty), "--tau", "7",
                          "--out", str(out)])
        assert rc == 1 and not out.exists()
        assert "empty" in capsys.readouterr().err

    def test_header_only_csv_rejected(self, tmp_path):
        p = tmp_path / "hdr.csv"
        p.write_text("round,bin,load\n")
        assert render.main(["--kind", "fig6", "--in", str(p), "--tau", "7",
                            "--out", str(tmp_path / "n.png")]) == 1

    def test_wrong_schema_rejected(self, outputs, tmp_path, capsys):
        rc = render.main(["--kind", "fig6",
                          "--in", str(outputs / "bb" / "batched_n8_seed1.csv"),
                          "--tau", "7", "--out", str(tmp_path / "n.png")])
        assert rc == 1
        assert "missing columns" in capsys.readouterr().err

    def test_fig6_requires_tau(self, outputs, tmp_path):
        rc = render.main(["--kind", "fig6",
                          "--in", str(outputs / "bb" / "recycled_bins_n5_seed1.csv"),
                          "--out", str(tmp_path / "n.png")])
        assert rc == 1

    def test_missing_file(self, tmp_path):
        assert render.main(["--kind", "fig5", "--in", str(tmp_path / "ghost.csv"),
                            "--out", str(tmp_path / "n.png")]) == 1
