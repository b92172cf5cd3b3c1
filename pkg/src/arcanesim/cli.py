"""Experiment runner: sim, ballsbins, evs, lemmas, compare subcommands.

Configs are TOML with fixed sections (topology, workload, transport, lb,
failures, output, sim); unknown keys are rejected so typos fail loudly.
``--set section.key=value`` overrides any field (bare ``lb=`` and
``workload=`` are shorthands for their ``.kind``). Every output file is
written to a temp path and renamed, so reruns are atomic; identical seeds
reproduce byte-identical files. ARCANE_OUT_DIR overrides the output
directory. Exit codes: 0 success, 1 a check failed, 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import random
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import ballsbins, bounds
from .engine import BUCKET_NS, SimConfig, SimResult, compare_runs, run
from .evs import evs_load_imbalance

_SECTION_FIELDS = {
    "topology": ("tiers", "nodes", "uplinks_per_t0", "oversubscription", "pods",
                 "uplinks_per_t1", "link_gbps", "latency_ns", "switch_traversal_ns"),
    "workload": ("kind", "message_bytes", "incast_degree", "load", "trace_file", "horizon_ms"),
    "transport": ("mtu_bytes", "rto_us", "ack_coalesce", "cwnd_init_bdp_fraction",
                  "cwnd_max_bdp", "ack_loss"),
    "lb": ("kind", "evs_size", "arcane_buffer_size", "freezing_timeout_us", "bdp_packets"),
    "output": ("dir",),
    "sim": ("seeds", "max_events", "end_after_ms"),
}
_FAILURE_KEYS = {"link", "start_us", "end_us", "mode", "capacity_gbps"}
# TOML section.key -> SimConfig attribute, where the names differ.
_RENAMES = {("workload", "kind"): "workload", ("lb", "kind"): "lb"}


class ConfigError(Exception):
    pass


def load_sim_config(path: str, overrides: list[str]) -> tuple[SimConfig, list[int], str]:
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}")
    return build_sim_config(doc, overrides, source=path)


def build_sim_config(doc: dict, overrides: list[str] = (), source: str = "<config>"):
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        key = {"lb": "lb.kind", "workload": "workload.kind"}.get(key, key)
        if "." not in key:
            raise ConfigError(f"--set key must be section.field, got {key!r}")
        section, fieldname = key.split(".", 1)
        doc.setdefault(section, {})[fieldname] = _coerce(value)

    known_sections = set(_SECTION_FIELDS) | {"failures"}
    for section in doc:
        if section not in known_sections:
            raise ConfigError(f"{source}: unknown section [{section}]")

    cfg_kwargs = {}
    for section, allowed in _SECTION_FIELDS.items():
        body = doc.get(section, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: [{section}] must be a table")
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}] "
                                  f"(allowed: {', '.join(allowed)})")
            if section in ("output", "sim") and key in ("dir", "seeds"):
                continue
            cfg_kwargs[_RENAMES.get((section, key), key)] = value

    failures = []
    for entry in doc.get("failures", []):
        unknown = set(entry) - _FAILURE_KEYS
        if unknown:
            raise ConfigError(f"{source}: unknown failure keys {sorted(unknown)}")
        for req in ("link", "start_us", "end_us", "mode"):
            if req not in entry:
                raise ConfigError(f"{source}: failure entry missing {req!r}")
        failures.append((entry["link"], float(entry["start_us"]), float(entry["end_us"]),
                         entry["mode"], entry.get("capacity_gbps")))
    if failures:
        cfg_kwargs["failures"] = tuple(failures)

    valid_names = {f.name for f in fields(SimConfig)}
    assert set(cfg_kwargs) <= valid_names, sorted(set(cfg_kwargs) - valid_names)
    try:
        cfg = SimConfig(**cfg_kwargs)
    except TypeError as e:
        raise ConfigError(f"{source}: {e}")

    seeds = doc.get("sim", {}).get("seeds", None)
    out_dir = doc.get("output", {}).get("dir", "out")
    if seeds is not None and (not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds)):
        raise ConfigError(f"{source}: sim.seeds must be a list of integers")
    return cfg, seeds, out_dir


def _coerce(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def atomic_write(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as f:
        f.write(content)
    os.replace(tmp, path)


def resolve_out_dir(cli_value: str | None, config_value: str = "out") -> Path:
    env = os.environ.get("ARCANE_OUT_DIR")
    return Path(env or cli_value or config_value)


def default_seeds(args_seeds, config_seeds=None) -> list[int]:
    if args_seeds:
        return parse_seed_list(args_seeds)
    if config_seeds:
        return list(config_seeds)
    print("warning: no --seeds given, defaulting to seed 1", file=sys.stderr)
    return [1]


def parse_seed_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}")


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x]
    except ValueError:
        raise ConfigError(f"bad integer list {text!r}")


# -- sim ----------------------------------------------------------------


def _run_one(args):
    cfg, seed = args
    return run(cfg, seed)


def sim_outputs(results: list[SimResult]) -> dict[str, str]:
    ports = ["run_id,time_bucket_us,switch,port,bits_tx,queue_bytes_max"]
    flows = ["run_id,flow_id,src,dst,bytes,start_ns,fct_ns"]
    drops = ["run_id,cause,count"]
    summaries = []
    for res in results:
        rid = res.seed
        keys = sorted(set(res.port_bits) | set(res.queue_max))
        for node, port in keys:
            bits = res.port_bits.get((node, port), {})
            qmax = res.queue_max.get((node, port), {})
            for bucket in sorted(set(bits) | set(qmax)):
                ports.append(f"{rid},{bucket * BUCKET_NS // 1000},{node},{port},"
                             f"{bits.get(bucket, 0)},{qmax.get(bucket, 0)}")
        for fid, src, dst, size, start, fct in res.flows:
            flows.append(f"{rid},{fid},{src},{dst},{size},{start},{fct}")
        for cause in sorted(res.drops):
            drops.append(f"{rid},{cause},{res.drops[cause]}")
        summaries.append({
            "seed": res.seed,
            "injected": res.injected,
            "delivered_packets": res.delivered_packets,
            "dropped": res.dropped,
            "in_flight_at_end": res.in_flight_at_end,
            "events": res.events_processed,
            "end_ns": res.end_ns,
            "base_rtt_ns": res.base_rtt_ns,
            "bdp_bytes": res.bdp_bytes,
            "max_fct_ns": max((f[5] for f in res.flows), default=0),
        })
    cfg = results[0].config.__dict__.copy()
    cfg["failures"] = [list(f) for f in cfg["failures"]]
    summary = json.dumps({"config": cfg, "runs": summaries}, indent=2, sort_keys=True)
    return {
        "ports.csv": "\n".join(ports) + "\n",
        "flows.csv": "\n".join(flows) + "\n",
        "drops.csv": "\n".join(drops) + "\n",
        "summary.json": summary + "\n",
    }


def cmd_sim(args) -> int:
    cfg, cfg_seeds, cfg_out = load_sim_config(args.config, args.set or [])
    seeds = default_seeds(args.seeds, cfg_seeds)
    out_dir = resolve_out_dir(args.out_dir, cfg_out)
    jobs = max(1, args.jobs)
    work = [(cfg, s) for s in seeds]
    if jobs == 1:
        results = [_run_one(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, work))
    for name, content in sim_outputs(results).items():
        atomic_write(out_dir / name, content)
    print(f"wrote {out_dir}/ports.csv flows.csv drops.csv summary.json "
          f"({len(seeds)} run{'s' if len(seeds) != 1 else ''})")
    return 0


# -- ballsbins ------------------------------------------------------------


def cmd_ballsbins(args) -> int:
    seeds = default_seeds(args.seeds)
    out_dir = resolve_out_dir(args.out_dir)
    n = args.n
    agg = ["seed,rounds,converged_round,max_load_overall,final_total_balls"]
    for seed in seeds:
        if args.model == "batched":
            chain = ballsbins.BatchedChain(
                n, args.lam, np.random.default_rng(np.random.SeedSequence([seed, n])))
            records = [chain.step() for _ in range(args.rounds)]
            body = ["round,max_load,total_balls"]
            body += [f"{r.round},{r.max_load},{r.total_balls}" for r in records]
            atomic_write(out_dir / f"batched_n{n}_seed{seed}.csv", "\n".join(body) + "\n")
        else:
            tau = args.tau or math.ceil(4 * math.log(n))
            b = args.b or math.ceil(2.4 * math.log(n))
            chain = ballsbins.RecycledChain(
                n, tau, b, rng=random.Random(seed), recycle_every=args.recycle_every)
            records = []
            per_bin = ["round,bin,load"] if args.per_bin else None
            for _ in range(args.rounds):
                rec = chain.step()
                records.append(rec)
                if per_bin is not None:
                    per_bin += [f"{rec.round},{i},{ld}" for i, ld in enumerate(chain.loads)]
            body = ["round,max_load,Y_t,K_t,total_balls,converged"]
            body += [f"{r.round},{r.max_load},{r.yt},{r.kt},{r.total_balls},{int(r.converged)}"
                     for r in records]
            atomic_write(out_dir / f"recycled_n{n}_seed{seed}.csv", "\n".join(body) + "\n")
            if per_bin is not None:
                atomic_write(out_dir / f"recycled_bins_n{n}_seed{seed}.csv", "\n".join(per_bin) + "\n")
        conv = next((r.round for r in records if r.converged), -1)
        agg.append(f"{seed},{args.rounds},{conv},{max(r.max_load for r in records)},"
                   f"{records[-1].total_balls}")
    params = {"model": args.model, "n": n, "rounds": args.rounds, "seeds": seeds,
              "lambda": args.lam if args.model == "batched" else None,
              "tau": (args.tau or math.ceil(4 * math.log(n))) if args.model == "recycled" else None,
              "b": (args.b or math.ceil(2.4 * math.log(n))) if args.model == "recycled" else None,
              "recycle_every": args.recycle_every if args.model == "recycled" else None}
    atomic_write(out_dir / f"{args.model}_n{n}_aggregate.csv", "\n".join(agg) + "\n")
    atomic_write(out_dir / f"{args.model}_n{n}_summary.json",
                 json.dumps(params, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out_dir}/{args.model}_n{n}_* for {len(seeds)} seeds")
    return 0


# -- evs --------------------------------------------------------------------


def cmd_evs(args) -> int:
    out_dir = resolve_out_dir(args.out_dir)
    sizes = parse_int_list(args.sizes)
    rows = ["flows,uplinks,evs_size,trial,imbalance"]
    summary_rows = []
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0xE75]))
    for size in sizes:
        s = evs_load_imbalance(args.flows, size, args.uplinks, args.hash_seed, args.trials, rng)
        for t, v in enumerate(s.samples):
            rows.append(f"{args.flows},{args.uplinks},{size},{t},{v:.6f}")
        summary_rows.append({"evs_size": size, "mean": s.mean,
                             "p50": s.quantile(0.5), "p99": s.quantile(0.99)})
    atomic_write(out_dir / "evs.csv", "\n".join(rows) + "\n")
    atomic_write(out_dir / "evs_summary.json", json.dumps(
        {"flows": args.flows, "uplinks": args.uplinks, "trials": args.trials,
         "seed": args.seed, "results": summary_rows}, indent=2, sort_keys=True) + "\n")
    for row in summary_rows:
        print(f"evs_size={row['evs_size']}: mean imbalance {row['mean']:.4f}")
    return 0


# -- lemmas -------------------------------------------------------------------


def cmd_lemmas(args) -> int:
    out_dir = resolve_out_dir(args.out_dir)
    if args.n and args.k is not None and args.x is not None:
        if args.x >= 16 and args.k >= 1:
            exact, bound = bounds.lemma_tail_check(args.n, args.k, args.x)
            print(f"tail: n={args.n} k={args.k} x={args.x} exact={exact:.6e} bound={bound:.6e}")
        if args.k <= args.n / 2 and args.x >= 3.5:
            exact, bound = bounds.lemma_conditional_check(args.n, args.k, args.x)
            print(f"conditional: n={args.n} k={args.k} x={args.x} exact={exact:.6e} bound={bound:.6e}")
        return 0
    ns = parse_int_list(args.ns) if args.ns else list(bounds.DEFAULT_NS)
    results = bounds.check_grid(ns=ns, bound_scale=args.bound_scale)
    bad = bounds.violations(results)
    rows = ["lemma,n,k,x,exact,bound,ok"]
    rows += [f"{r.lemma},{r.n},{r.k},{r.x:.10g},{r.exact:.12e},{r.bound:.12e},{int(r.ok)}"
             for r in results]
    atomic_write(out_dir / "lemmas.csv", "\n".join(rows) + "\n")
    print(f"{len(results)} grid points, {len(bad)} violations -> {out_dir}/lemmas.csv")
    return 1 if bad else 0


# -- compare -------------------------------------------------------------------


def cmd_compare(args) -> int:
    cfg_a, seeds_a, _ = load_sim_config(args.config_a, args.set_a or [])
    cfg_b, _, _ = load_sim_config(args.config_b, args.set_b or [])
    seeds = default_seeds(args.seeds, seeds_a)
    summary = compare_runs(cfg_a, cfg_b, seeds)
    out_dir = resolve_out_dir(args.out_dir)
    atomic_write(out_dir / "compare.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arcanesim",
                                description="Fabric simulator and stochastic-model experiments")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("sim", help="run the packet-level simulator from a TOML config")
    ps.add_argument("--config", required=True)
    ps.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE")
    ps.add_argument("--seeds", help="comma-separated seeds (overrides config)")
    ps.add_argument("--out-dir")
    ps.add_argument("--jobs", type=int, default=1)
    ps.set_defaults(fn=cmd_sim)

    pb = sub.add_parser("ballsbins", help="run a balls-into-bins chain")
    pb.add_argument("model", choices=("batched", "recycled"))
    pb.add_argument("--n", type=int, required=True)
    pb.add_argument("--lambda", dest="lam", type=float, default=1.0)
    pb.add_argument("--tau", type=int, default=0, help="default ceil(4 ln n)")
    pb.add_argument("--b", type=int, default=0, help="default ceil(2.4 ln n)")
    pb.add_argument("--rounds", type=int, required=True)
    pb.add_argument("--recycle-every", type=int, default=1)
    pb.add_argument("--per-bin", action="store_true", help="also write per-bin loads")
    pb.add_argument("--seeds")
    pb.add_argument("--out-dir")
    pb.set_defaults(fn=cmd_ballsbins)

    pe = sub.add_parser("evs", help="EV-space load imbalance study")
    pe.add_argument("--flows", type=int, required=True)
    pe.add_argument("--uplinks", type=int, required=True)
    pe.add_argument("--sizes", required=True, help="comma-separated EVS sizes")
    pe.add_argument("--trials", type=int, default=1000)
    pe.add_argument("--seed", type=int, default=1)
    pe.add_argument("--hash-seed", type=int, default=12345)
    pe.add_argument("--out-dir")
    pe.set_defaults(fn=cmd_evs)

    pl = sub.add_parser("lemmas", help="exact binomial sums vs the closed-form bounds")
    pl.add_argument("--ns", help="comma-separated n values (default full grid)")
    pl.add_argument("--n", type=int, default=0, help="single-point mode")
    pl.add_argument("--k", type=int, default=None)
    pl.add_argument("--x", type=float, default=None)
    pl.add_argument("--bound-scale", type=float, default=1.0,
                    help="negative-control hook: scales the bound")
    pl.add_argument("--out-dir")
    pl.set_defaults(fn=cmd_lemmas)

    pc = sub.add_parser("compare", help="paired-seed comparison of two sim configs")
    pc.add_argument("--config-a", required=True)
    pc.add_argument("--config-b", required=True)
    pc.add_argument("--set-a", action="append")
    pc.add_argument("--set-b", action="append")
    pc.add_argument("--seeds")
    pc.add_argument("--out-dir")
    pc.set_defaults(fn=cmd_compare)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
