#!/usr/bin/env python3
"""Render the standard figures from simulator / chain CSV outputs.

    render.py --kind <fig4|fig5|fig6|fig9|fig13> --in <csv...> --out <png> [options]

Figure kinds and their expected inputs (see the main README for schemas):

  fig4   ports.csv from a sim run: two panels per selected switch, port
         utilization per 20 us bucket and max queue depth, with a Kmin rule
         (--kmin-bytes). Select the switch with --switch (default: first TOR).
  fig5   one or more batched-chain CSVs (round,max_load,total_balls); files
         sharing a --labels entry are averaged, one line per label.
  fig6   a per-bin recycled-chain CSV (round,bin,load): one line per bin
         plus the threshold rule (--tau).
  fig9   drops.csv and/or flows.csv files from two or more runs, grouped by
         --labels: drop-count bars by cause and completion-time bars.
  fig13  evs.csv files (flows,uplinks,evs_size,trial,imbalance): imbalance
         boxplots per EVS size, one group per file.

Rendering is read-only and deterministic: identical inputs give a
byte-identical PNG. Schema problems (missing columns, empty data) exit
nonzero without writing an image.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

KINDS = ("fig4", "fig5", "fig6", "fig9", "fig13")

_SCHEMAS = {
    "ports": ["run_id", "time_bucket_us", "switch", "port", "bits_tx", "queue_bytes_max"],
    "batched": ["round", "max_load", "total_balls"],
    "bins": ["round", "bin", "load"],
    "drops": ["run_id", "cause", "count"],
    "flows": ["run_id", "flow_id", "src", "dst", "bytes", "start_ns", "fct_ns"],
    "evs": ["flows", "uplinks", "evs_size", "trial", "imbalance"],
}


class SchemaError(Exception):
    pass


def load_csv(path: str, schema: str) -> pd.DataFrame:
    want = _SCHEMAS[schema]
    try:
        df = pd.read_csv(path)
    except FileNotFoundError:
        raise SchemaError(f"{path}: file not found")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"{path}: empty file")
    missing = [c for c in want if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing} for a {schema} CSV "
                          f"(has {list(df.columns)})")
    if df.empty:
        raise SchemaError(f"{path}: no data rows")
    return df


def sniff(path: str) -> str:
    header = pd.read_csv(path, nrows=0).columns.tolist()
    for name, cols in _SCHEMAS.items():
        if all(c in header for c in cols):
            return name
    raise SchemaError(f"{path}: header {header} matches no known schema")


def new_figure(nrows=1, height=3.2):
    fig, axes = plt.subplots(nrows, 1, figsize=(7.0, height * nrows), squeeze=False)
    return fig, [ax[0] for ax in axes]


def render_fig4(args) -> plt.Figure:
    if len(args.inputs) != 1:
        raise SchemaError("fig4 expects exactly one ports.csv")
    df = load_csv(args.inputs[0], "ports")
    df = df[df.run_id == df.run_id.min()]
    switch = args.switch or sorted(s for s in df.switch.unique() if s.startswith("t0"))[0]
    sub = df[df.switch == switch]
    if sub.empty:
        raise SchemaError(f"no rows for switch {switch!r}")
    fig, (ax_util, ax_queue) = new_figure(2)
    for port, grp in sub.groupby("port"):
        gbps = grp.bits_tx / 20_000  # bits per 20 us bucket -> Gbit/s
        ax_util.plot(grp.time_bucket_us, gbps, lw=0.9, label=f"port {port}")
        ax_queue.plot(grp.time_bucket_us, grp.queue_bytes_max / 1024, lw=0.9)
    ax_util.set_ylabel("port utilization (Gbit/s)")
    ax_util.legend(ncol=4, fontsize=7, loc="lower right")
    if args.kmin_bytes:
        ax_queue.axhline(args.kmin_bytes / 1024, color="crimson", ls="--", lw=1.2,
                         label="Kmin")
        ax_queue.legend(fontsize=8)
    ax_queue.set_ylabel("max queue (KiB)")
    ax_queue.set_xlabel("time (us)")
    fig.suptitle(f"{switch}: per-port utilization and queue depth, 20 us buckets")
    return fig


def render_fig5(args) -> plt.Figure:
    labels = args.labels or [Path(p).stem for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise SchemaError("--labels must match --in one for one")
    series: dict[str, list[pd.DataFrame]] = {}
    for path, label in zip(args.inputs, labels):
        series.setdefault(label, []).append(load_csv(path, "batched")[["round", "max_load"]])
    fig, (ax,) = new_figure()
    for label, frames in series.items():
        merged = pd.concat(frames).groupby("round").max_load.mean()
        ax.plot(merged.index, merged.values, lw=1.1, label=label)
    ax.set_xlabel("round")
    ax.set_ylabel("max queue length (balls)")
    ax.set_title("random spraying: max load keeps growing with rounds and ports")
    ax.legend()
    return fig


def render_fig6(args) -> plt.Figure:
    if len(args.inputs) != 1:
        raise SchemaError("fig6 expects exactly one per-bin recycled CSV")
    if args.tau is None:
        raise SchemaError("fig6 needs --tau for the threshold rule")
    df = load_csv(args.inputs[0], "bins")
    fig, (ax,) = new_figure()
    for b, grp in df.groupby("bin"):
        ax.plot(grp["round"], grp.load, lw=0.9, label=f"bin {b}")
    ax.axhline(args.tau, color="crimson", ls="--", lw=1.4, label=r"threshold $\tau$")
    ax.set_xlabel("round")
    ax.set_ylabel("queue length (balls)")
    ax.set_title("recycled chain: every queue settles at or below the threshold")
    ax.legend(ncol=3, fontsize=7)
    return fig


def render_fig9(args) -> plt.Figure:
    labels = args.labels or [Path(p).stem for p in args.inputs]
    if len(labels) != len(args.inputs):
        raise SchemaError("--labels must match --in one for one")
    drops: dict[str, pd.DataFrame] = {}
    makespan: dict[str, float] = {}
    for path, label in zip(args.inputs, labels):
        kind = sniff(path)
        if kind == "drops":
            df = load_csv(path, "drops")
            drops[label] = df.groupby("cause")["count"].sum()
        elif kind == "flows":
            df = load_csv(path, "flows")
            done = df[df.fct_ns > 0]
            if done.empty:
                raise SchemaError(f"{path}: no completed flows")
            makespan[label] = float((done.groupby("run_id").fct_ns.max()).mean() / 1e3)
        else:
            raise SchemaError(f"{path}: fig9 wants drops.csv or flows.csv, got {kind}")
    if not drops and not makespan:
        raise SchemaError("fig9 got no usable inputs")
    panels = (1 if drops else 0) + (1 if makespan else 0)
    fig, axes = new_figure(panels)
    i = 0
    if drops:
        ax = axes[i]; i += 1
        table = pd.DataFrame(drops).fillna(0)
        bottom = None
        for cause, row in table.iterrows():
            ax.bar(row.index, row.values, 0.5, bottom=bottom, label=cause)
            bottom = row.values if bottom is None else bottom + row.values
        ax.set_ylabel("dropped packets")
        ax.legend(fontsize=8)
    if makespan:
        ax = axes[i]
        ax.bar(list(makespan), list(makespan.values()), 0.5, color="steelblue")
        ax.set_ylabel("completion time (us)")
    fig.suptitle("failure scenario: drops and completion time by load balancer")
    return fig


def render_fig13(args) -> plt.Figure:
    frames = [load_csv(p, "evs") for p in args.inputs]
    fig, axes = new_figure(len(frames), height=2.8)
    for ax, df in zip(axes, frames):
        sizes = [int(s) for s in sorted(df.evs_size.unique())]
        data = [df[df.evs_size == s].imbalance.values * 100 for s in sizes]
        ax.boxplot(data, tick_labels=[f"$2^{{{s.bit_length() - 1}}}$" if (s & (s - 1)) == 0
                                      else str(s) for s in sizes])
        flows = df.flows.iloc[0]
        uplinks = df.uplinks.iloc[0]
        ax.set_ylabel("load imbalance (%)")
        ax.set_title(f"{flows} flow{'s' if flows != 1 else ''}, {uplinks} uplinks", fontsize=9)
    axes[-1].set_xlabel("EVS size")
    return fig


_RENDERERS = {"fig4": render_fig4, "fig5": render_fig5, "fig6": render_fig6,
              "fig9": render_fig9, "fig13": render_fig13}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="render.py", description=__doc__.split("\n")[0])
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--in", dest="inputs", nargs="+", required=True, metavar="CSV")
    ap.add_argument("--out", required=True, metavar="PNG")
    ap.add_argument("--labels", nargs="*", help="one label per input (fig5/fig9 grouping)")
    ap.add_argument("--tau", type=float, help="threshold rule for fig6")
    ap.add_argument("--kmin-bytes", type=float, help="Kmin rule for fig4")
    ap.add_argument("--switch", help="switch to plot for fig4 (default first TOR)")
    ap.add_argument("--dpi", type=int, default=120)
    args = ap.parse_args(argv)
    try:
        fig = _RENDERERS[args.kind](args)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    fig.tight_layout()
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=args.dpi)
    plt.close(fig)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
