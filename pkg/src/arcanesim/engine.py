"""Deterministic single-threaded event loop over the fabric and endpoints.

Events are (time_ns, ordinal, kind, payload) tuples in a binary heap; the
insertion ordinal breaks time ties so identical (config, seed) runs replay
bit for bit. Integer nanoseconds everywhere; serialization times round up.

Per-entity randomness comes from streams derived as (seed, tag) so that,
for example, swapping the load-balancer kind perturbs no other entity's
draws. Ports serve their FIFO whenever backlogged: a transmission whose
cable is down at completion time blackholes the packet (counted per port);
recovery is the sender's RTO problem, exactly like a real silent drop.
"""

from __future__ import annotations

import heapq
import json
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .arcane import ArcaneConfig
from .fabric import (
    DOWN,
    FabricTopology,
    Packet,
    Port,
    ScheduleEntry,
    base_rtt_ns,
    build_fat_tree,
    serialization_ns,
)
from .hashing import derive_seed
from .loadbalancers import make_binding
from .transport import Connection
from .workloads import FlowSpec, WorkloadSpec, generate, load_trace_cdf

FLOW_START, ARRIVAL, DEQUEUE, TIMER = 0, 1, 2, 3

BUCKET_NS = 20_000  # 20 us metric buckets


@dataclass
class SimConfig:
    """Validated, flattened run parameters (the CLI builds this from TOML)."""

    # topology
    tiers: int = 2
    nodes: int = 16
    uplinks_per_t0: int = 4
    oversubscription: float = 1.0
    pods: int = 1
    uplinks_per_t1: int = 2
    link_gbps: float = 400.0
    latency_ns: int = 500
    switch_traversal_ns: int = 500
    # workload
    workload: str = "tornado"
    message_bytes: int = 1 << 20
    incast_degree: int = 8
    load: float = 0.6
    trace_file: str = ""
    horizon_ms: float = 5.0
    # transport
    mtu_bytes: int = 4096
    rto_us: float = 70.0
    ack_coalesce: int = 1
    cwnd_init_bdp_fraction: float = 1.0
    cwnd_max_bdp: float = 0.0       # 0 = default (one BDP per available path)
    ack_loss: bool = False          # robustness switch: ACKs become droppable
    # load balancer
    lb: str = "arcane"
    evs_size: int = 2**16
    arcane_buffer_size: int = 8
    freezing_timeout_us: float = 1000.0
    bdp_packets: int = 0            # 0 = derive from BDP
    # failure schedule: (cable, start_us, end_us, mode, capacity_gbps)
    failures: tuple = ()
    # engine
    max_events: int = 50_000_000
    end_after_ms: float = 0.0       # 0 = run until all flows complete


@dataclass
class SimResult:
    config: SimConfig
    seed: int
    flows: list                     # (flow_id, src, dst, bytes, start_ns, fct_ns)
    port_bits: dict                 # (node, port) -> {bucket -> bits transmitted}
    queue_max: dict                 # (node, port) -> {bucket -> max occupancy bytes}
    port_enqueues: dict             # (node, port) -> {bucket -> data packets queued}
    drops: Counter                  # cause -> count
    failed_port_sends: list         # (time_ns, node, port, kind)
    injected: int = 0
    delivered_packets: int = 0
    dropped: int = 0
    in_flight_at_end: int = 0
    events_processed: int = 0
    end_ns: int = 0
    base_rtt_ns: int = 0
    bdp_bytes: int = 0

    def kmin_bytes_of(self, topo_port) -> int:
        return topo_port.queue.kmin_bytes


class _Run:
    def __init__(self, config: SimConfig, seed: int):
        self.cfg = config
        self.seed = seed
        self.topo = build_fat_tree(
            tiers=config.tiers,
            nodes=config.nodes,
            uplinks_per_t0=config.uplinks_per_t0,
            oversubscription=config.oversubscription,
            link_capacity_bps=int(config.link_gbps * 1e9),
            latency_ns=config.latency_ns,
            switch_traversal_ns=config.switch_traversal_ns,
            mtu_bytes=config.mtu_bytes,
            pods=config.pods,
            uplinks_per_t1=config.uplinks_per_t1,
            seed=seed,
            drop_acks=config.ack_loss,
        )
        self._install_failures()
        self.rtt = base_rtt_ns(self.topo, config.mtu_bytes)
        self.bdp_bytes = max(
            config.mtu_bytes,
            int(config.link_gbps * 1e9) * self.rtt // 8_000_000_000,
        )
        self.bdp_pkts = config.bdp_packets or -(-self.bdp_bytes // config.mtu_bytes)
        self.heap: list = []
        self.ordinal = 0
        self.now = 0
        self.conns: dict[int, Connection] = {}
        self.timer_at: dict[int, int] = {}
        # metrics
        self.port_bits = defaultdict(lambda: defaultdict(int))
        self.queue_max = defaultdict(lambda: defaultdict(int))
        self.port_enqueues = defaultdict(lambda: defaultdict(int))
        self.drops = Counter()
        self.failed_port_sends: list = []
        self.injected = 0
        self.delivered_packets = 0
        self.events = 0

    # -- plumbing ------------------------------------------------------------

    def _install_failures(self):
        for entry in self.cfg.failures:
            cable_name, start_us, end_us, mode = entry[0], entry[1], entry[2], entry[3]
            cap_gbps = entry[4] if len(entry) > 4 else None
            cable = self.topo.cables.get(cable_name)
            if cable is None:
                raise ValueError(f"failure schedule names unknown cable {cable_name!r}; "
                                 f"known: {sorted(self.topo.cables)[:8]}...")
            cable.schedule.append(ScheduleEntry(
                int(start_us * 1000), int(end_us * 1000), mode,
                int(cap_gbps * 1e9) if cap_gbps else None,
            ))
            cable.validate_schedule()

    def push(self, t: int, kind: int, payload) -> None:
        self.ordinal += 1
        heapq.heappush(self.heap, (t, self.ordinal, kind, payload))

    def note_queue(self, node: str, port: Port) -> None:
        b = self.now // BUCKET_NS
        key = (node, port.index)
        occ = port.queue.occupancy
        if occ > self.queue_max[key][b]:
            self.queue_max[key][b] = occ

    # -- forwarding ----------------------------------------------------------

    def send_out(self, node: str, pkt: Packet) -> None:
        """Route a packet out of a node into the proper port queue."""
        port = self.topo.next_port(node, pkt)
        mode, _ = port.cable.state_at(self.now)
        if mode == DOWN:
            self.failed_port_sends.append((self.now, node, port.index, pkt.kind))
        if pkt.kind == "data":
            self.port_enqueues[(node, port.index)][self.now // BUCKET_NS] += 1
        accepted = port.queue.enqueue(pkt)
        if not accepted:
            self.drops["tail" if pkt.kind == "data" else "tail_ack"] += 1
            return
        self.note_queue(node, port)
        if not port.busy:
            self.begin_service(port)

    def begin_service(self, port: Port) -> None:
        pkt = port.queue.fifo[0]
        _, capacity = port.cable.state_at(self.now)
        if capacity <= 0:
            capacity = port.cable.capacity_bps  # drain a dead link at nominal rate
        ser = serialization_ns(pkt.size_bytes, capacity)
        port.busy = True
        self.push(self.now + ser, DEQUEUE, port)

    def on_dequeue(self, port: Port) -> None:
        pkt = port.queue.dequeue()
        port.busy = False
        mode, _ = port.cable.state_at(self.now)
        if mode == DOWN:
            self.drops["blackhole" if pkt.kind == "data" else "blackhole_ack"] += 1
        else:
            key = (port.node, port.index)
            self.port_bits[key][self.now // BUCKET_NS] += pkt.size_bytes * 8
            hop = self.topo.latency_ns
            if not port.dest.startswith("h"):
                hop += self.topo.switch_traversal_ns
            self.push(self.now + hop, ARRIVAL, (port.dest, pkt))
        self.note_queue(port.node, port)
        if port.queue.fifo:
            self.begin_service(port)

    # -- endpoint glue ---------------------------------------------------------

    def start_flow(self, spec: FlowSpec) -> None:
        cfg = self.cfg
        arcane_cfg = ArcaneConfig(
            buffer_size=cfg.arcane_buffer_size,
            evs_size=cfg.evs_size,
            freezing_timeout=int(cfg.freezing_timeout_us * 1000),
            bdp_packets=self.bdp_pkts,
        )
        binding = make_binding(cfg.lb, cfg.evs_size, spec.flow_id, arcane_cfg)
        conn = Connection(
            spec,
            binding,
            random.Random(derive_seed(self.seed, "lb", spec.flow_id)),
            cfg.mtu_bytes,
            int(cfg.rto_us * 1000),
            ack_coalesce=cfg.ack_coalesce,
            cwnd_init_bytes=int(self.bdp_bytes * cfg.cwnd_init_bdp_fraction),
            # Queue capacity is one BDP, so the default window cap of one
            # queue per available path is BDP * uplinks.
            cwnd_max_bytes=int(self.bdp_bytes * (cfg.cwnd_max_bdp or max(1, cfg.uplinks_per_t0))),
        )
        self.conns[spec.flow_id] = conn
        self.pump(conn)

    def pump(self, conn: Connection) -> None:
        """Send whatever the window allows and keep the RTO timer armed."""
        for pkt in conn.maybe_send(self.now):
            self.injected += 1
            self.send_out(conn.spec.src, pkt)
        deadline = conn.next_rto_deadline()
        if deadline is not None and self.timer_at.get(conn.spec.flow_id) != deadline:
            self.timer_at[conn.spec.flow_id] = deadline
            self.push(deadline, TIMER, conn.spec.flow_id)

    def on_arrival(self, node: str, pkt: Packet) -> None:
        if node.startswith("h"):
            conn = self.conns[pkt.flow_id]
            if pkt.kind == "data":
                self.delivered_packets += 1
                ack = conn.on_data(pkt, self.now)
                if ack is not None:
                    self.send_out(node, ack)
            else:
                conn.on_ack(pkt, self.now)
                self.pump(conn)
            return
        self.send_out(node, pkt)

    def on_timer(self, flow_id: int) -> None:
        conn = self.conns[flow_id]
        if self.timer_at.get(flow_id) != self.now:
            return  # superseded timer
        del self.timer_at[flow_id]
        conn.rto_check(self.now)
        self.pump(conn)

    # -- main loop ------------------------------------------------------------

    def run(self) -> SimResult:
        cfg = self.cfg
        wl = WorkloadSpec(
            kind=cfg.workload,
            message_bytes=cfg.message_bytes,
            incast_degree=cfg.incast_degree,
            load_fraction=cfg.load,
            trace_cdf=load_trace_cdf(cfg.trace_file) if cfg.trace_file else (),
            horizon_ns=int(cfg.horizon_ms * 1e6),
        )
        wl_rng = np.random.default_rng(np.random.SeedSequence([self.seed, 0xF10]))
        flows = generate(wl, self.topo, wl_rng)
        for spec in flows:
            self.push(spec.start_ns, FLOW_START, spec)

        end_at = int(cfg.end_after_ms * 1e6) if cfg.end_after_ms else None
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            assert t >= self.now, "event scheduled in the past"
            self.now = t
            if end_at is not None and t > end_at:
                break
            self.events += 1
            if self.events > cfg.max_events:
                raise RuntimeError(
                    f"event budget exhausted ({cfg.max_events}); likely livelock"
                )
            if kind == DEQUEUE:
                self.on_dequeue(payload)
            elif kind == ARRIVAL:
                self.on_arrival(*payload)
            elif kind == TIMER:
                self.on_timer(payload)
            else:
                self.start_flow(payload)
            if kind != FLOW_START and not self.heap and not all(
                c.complete_ns is not None for c in self.conns.values()
            ):
                # Quiescent but incomplete: only stale timers could've died.
                for conn in self.conns.values():
                    self.pump(conn)

        in_flight = sum(1 for (_, _, k, p) in self.heap if k == ARRIVAL and p[1].kind == "data")
        for ports in self.topo.ports.values():
            for port in ports:
                in_flight += sum(1 for q in port.queue.fifo if q.kind == "data")

        flow_rows = []
        for spec in flows:
            conn = self.conns.get(spec.flow_id)
            fct = conn.complete_ns - spec.start_ns if conn and conn.complete_ns else -1
            flow_rows.append((spec.flow_id, spec.src, spec.dst, spec.size_bytes,
                              spec.start_ns, fct))

        return SimResult(
            config=cfg,
            seed=self.seed,
            flows=flow_rows,
            port_bits={k: dict(v) for k, v in self.port_bits.items()},
            queue_max={k: dict(v) for k, v in self.queue_max.items()},
            port_enqueues={k: dict(v) for k, v in self.port_enqueues.items()},
            drops=self.drops,
            failed_port_sends=self.failed_port_sends,
            injected=self.injected,
            delivered_packets=self.delivered_packets,
            dropped=self.drops["tail"] + self.drops["blackhole"],
            in_flight_at_end=in_flight,
            events_processed=self.events,
            end_ns=self.now,
            base_rtt_ns=self.rtt,
            bdp_bytes=self.bdp_bytes,
        )


def run(config: SimConfig, seed: int) -> SimResult:
    """One deterministic simulation; same (config, seed) replays identically."""
    return _Run(config, seed).run()


def compare_runs(config_a: SimConfig, config_b: SimConfig, seeds) -> dict:
    """Paired-seed comparison of completion time and drops, with 95% CI."""
    fct_ratios = []
    drop_pairs = []
    for seed in seeds:
        ra = run(config_a, seed)
        rb = run(config_b, seed)
        fa = max((f[5] for f in ra.flows), default=0)
        fb = max((f[5] for f in rb.flows), default=0)
        if fa > 0 and fb > 0:
            fct_ratios.append(fb / fa)
        drop_pairs.append((ra.dropped, rb.dropped))
    arr = np.array(fct_ratios) if fct_ratios else np.array([np.nan])
    mean = float(np.mean(arr))
    if len(arr) > 1:
        half = 1.96 * float(np.std(arr, ddof=1)) / len(arr) ** 0.5
    else:
        half = float("nan")
    return {
        "seeds": list(seeds),
        "fct_ratio_b_over_a_mean": mean,
        "fct_ratio_ci95": (mean - half, mean + half),
        "drops_a_total": sum(d[0] for d in drop_pairs),
        "drops_b_total": sum(d[1] for d in drop_pairs),
        "per_seed_fct_ratios": [float(x) for x in arr.tolist()],
    }
