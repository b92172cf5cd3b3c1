#!/usr/bin/env python3
"""Microscopic view of one TOR during a tornado: spraying vs caching.

Sixteen hosts under two TORs, every host streaming to its twin across the
spine. The interesting objects are the eight uplink queues of one TOR:
random spraying keeps colliding with itself and pushes queues over the ECN
threshold, while entropy caching settles into a spread that keeps every
queue shallow, finishing slightly faster on average.
"""

from arcanesim.engine import BUCKET_NS, SimConfig, run
from arcanesim.fabric import build_fat_tree

CFG = dict(nodes=16, uplinks_per_t0=8, link_gbps=10.0, latency_ns=8000,
           message_bytes=1 << 20, workload="tornado", rto_us=500.0, cwnd_max_bdp=1.0)

topo = build_fat_tree(nodes=16, uplinks_per_t0=8, link_capacity_bps=int(10e9),
                      latency_ns=8000, mtu_bytes=4096)
uplinks = topo.uplinks["t0_0"]

for lb in ("ops", "arcane"):
    res = run(SimConfig(lb=lb, **CFG), seed=3)
    kmin = int(res.bdp_bytes * 0.20)
    warm = 2 * res.base_rtt_ns // BUCKET_NS + 1
    end = res.end_ns // BUCKET_NS
    over = total = 0
    worst = 0
    for idx in uplinks:
        series = res.queue_max.get(("t0_0", idx), {})
        for b in range(warm, end):
            v = series.get(b, 0)
            total += 1
            over += v >= kmin
            worst = max(worst, v)
    mean_fct = sum(f[5] for f in res.flows) / len(res.flows)
    print(f"{lb:>6}: {over}/{total} uplink queue samples at/above Kmin ({kmin} B), "
          f"worst queue {worst} B, mean FCT {mean_fct / 1000:.0f} us, drops {res.dropped}")
