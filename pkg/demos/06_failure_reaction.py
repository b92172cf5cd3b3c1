#!/usr/bin/env python3
"""A cable dies mid-run: who keeps throwing packets into the hole?

One TOR uplink goes dark for 750 us (five timeout periods). The spraying
sender never learns and keeps putting ~1/4 of its packets onto the dead
port for the whole outage. The caching sender takes one timeout to freeze,
then recycles only entropy values whose ACKs actually came back, so the
dead port goes quiet within a timeout plus a round trip.
"""

from arcanesim.engine import SimConfig, run
from arcanesim.fabric import build_fat_tree

CFG = dict(nodes=16, uplinks_per_t0=4, link_gbps=10.0, latency_ns=8000,
           message_bytes=2 << 20, workload="permutation", rto_us=150.0,
           cwnd_max_bdp=1.0, failures=(("t0_0-t1_0", 100.0, 850.0, "down"),))

topo = build_fat_tree(nodes=16, uplinks_per_t0=4, link_capacity_bps=int(10e9),
                      latency_ns=8000, mtu_bytes=4096)
failed_port = next(p.index for p in topo.ports["t0_0"] if p.dest == "t1_0")

for lb in ("ops", "arcane"):
    res = run(SimConfig(lb=lb, **CFG), seed=2)
    sends = [t for (t, node, port, kind) in res.failed_port_sends
             if node == "t0_0" and port == failed_port and kind == "data"]
    cutoff = 100_000 + 150_000 + res.base_rtt_ns
    late = sum(1 for t in sends if t > cutoff)
    print(f"{lb:>6}: {len(sends):>4} data packets hit the dead port during the outage, "
          f"{late:>3} after one RTO+RTT; blackhole drops {res.drops['blackhole']}, "
          f"makespan {max(f[5] for f in res.flows) / 1000:.0f} us")
