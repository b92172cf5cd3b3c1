"""Fat-tree fabric: switches, FIFO byte-queues with RED marking, links.

Topologies are 2- or 3-tier fat trees (hosts under T0/TOR switches,
aggregation T1s, optional cores). Every directed link has a transmit port
with a FIFO byte-queue on its source node; queue capacity defaults to one
bandwidth-delay product and ECN marking follows the RED rule between the
kmin/kmax thresholds. A cable carries an optional up/down/degraded schedule
shared by both directions; down cables blackhole traffic at transmit time.

Path selection: each upward hop hashes (src, dst, flow, ev) under a
per-switch seed to pick among uplinks, so one EV pins the full path;
downward hops are destination-determined as in any fat tree.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field

from .hashing import combine, derive_seed

UP, DOWN, DEGRADED = "up", "down", "degraded"


@dataclass(frozen=True)
class ScheduleEntry:
    start_ns: int
    end_ns: int
    mode: str                     # "down" or "degraded"
    capacity_bps: int | None = None  # required for "degraded"

    def __post_init__(self):
        if self.mode not in (DOWN, DEGRADED):
            raise ValueError(f"schedule mode must be 'down' or 'degraded', got {self.mode!r}")
        if self.start_ns >= self.end_ns:
            raise ValueError(f"empty schedule interval [{self.start_ns}, {self.end_ns})")
        if self.mode == DEGRADED and not self.capacity_bps:
            raise ValueError("degraded schedule entry needs capacity_bps")


@dataclass
class Cable:
    """One physical cable; failures apply to both directions at once."""

    name: str
    capacity_bps: int
    latency_ns: int
    schedule: list[ScheduleEntry] = field(default_factory=list)

    def validate_schedule(self) -> None:
        spans = sorted((e.start_ns, e.end_ns) for e in self.schedule)
        for (s1, e1), (s2, _) in zip(spans, spans[1:]):
            if s2 < e1:
                raise ValueError(f"overlapping schedule entries on {self.name}")

    def state_at(self, now_ns: int) -> tuple[str, int]:
        """(mode, effective capacity in bps) at a given instant."""
        for e in self.schedule:
            if e.start_ns <= now_ns < e.end_ns:
                if e.mode == DOWN:
                    return DOWN, 0
                return DEGRADED, int(e.capacity_bps)
        return UP, self.capacity_bps


@dataclass
class Packet:
    src: str
    dst: str
    flow_id: int
    ev: int
    seq: int
    size_bytes: int
    kind: str                 # "data" or "ack"
    ecn: bool = False         # RED mark for data; the echoed mark for acks
    carried_ev: int = 0       # acks: EV of the data packet that triggered it
    acked_seqs: tuple = ()    # acks: delivery info for the sender


class PortQueue:
    """FIFO byte-queue with RED marking at enqueue.

    Data packets occupy bytes and tail-drop at capacity. ACKs ride along in
    the same FIFO for serialization order but are 64-byte control traffic:
    by default they are never dropped, never marked, and don't count toward
    occupancy. The ``drop_acks`` robustness switch makes ACKs occupy bytes
    and tail-drop like data (they stay unmarked: an ACK's ecn field is the
    echoed data-packet mark, which the queue must not overwrite).
    """

    __slots__ = ("capacity_bytes", "kmin_bytes", "kmax_bytes", "fifo", "occupancy",
                 "rng", "drop_acks")

    def __init__(self, capacity_bytes: int, kmin_bytes: int, kmax_bytes: int,
                 rng: random.Random, drop_acks: bool = False):
        if kmin_bytes > kmax_bytes:
            raise ValueError("kmin must not exceed kmax")
        self.capacity_bytes = capacity_bytes
        self.kmin_bytes = kmin_bytes
        self.kmax_bytes = kmax_bytes
        self.fifo: deque[Packet] = deque()
        self.occupancy = 0
        self.rng = rng
        self.drop_acks = drop_acks

    def enqueue(self, pkt: Packet) -> bool:
        """Append a packet; False means tail-dropped. Marks data by RED."""
        if pkt.kind == "ack":
            if not self.drop_acks:
                self.fifo.append(pkt)
                return True
            if self.occupancy + pkt.size_bytes > self.capacity_bytes:
                return False
            self.fifo.append(pkt)
            self.occupancy += pkt.size_bytes
            return True
        if self.occupancy + pkt.size_bytes > self.capacity_bytes:
            return False
        if red_mark(self.occupancy, self.kmin_bytes, self.kmax_bytes, self.rng):
            pkt.ecn = True
        self.fifo.append(pkt)
        self.occupancy += pkt.size_bytes
        return True

    def dequeue(self) -> Packet:
        pkt = self.fifo.popleft()
        if pkt.kind != "ack" or self.drop_acks:
            self.occupancy -= pkt.size_bytes
        return pkt

    def __len__(self):
        return len(self.fifo)


def red_mark(occupancy_bytes: int, kmin: int, kmax: int, rng: random.Random) -> bool:
    """Linear marking probability between the two thresholds."""
    if occupancy_bytes <= kmin:
        return False
    if occupancy_bytes >= kmax:
        return True
    return rng.random() < (occupancy_bytes - kmin) / (kmax - kmin)


def ecmp_select(hash_seed: int, pkt: Packet, num_ports: int) -> int:
    """Deterministic uplink choice from the header fields plus the EV."""
    if num_ports < 1:
        raise ValueError("need at least one port")
    if num_ports == 1:
        return 0
    # Node names are stable strings; fold them through the flow id space.
    return combine(hash_seed, _node_key(pkt.src), _node_key(pkt.dst), pkt.flow_id, pkt.ev) % num_ports


def _node_key(name: str) -> int:
    h = 0
    for ch in name.encode():
        h = (h * 131 + ch) & 0xFFFFFFFF
    return h


@dataclass
class Port:
    """Transmit side of one directed link."""

    node: str
    index: int
    dest: str
    cable: Cable
    queue: PortQueue
    busy: bool = False


class FabricTopology:
    """Nodes, directed ports, and routing tables for a built fat tree."""

    def __init__(self, tiers: int, hosts: list[str], link_capacity_bps: int, latency_ns: int,
                 switch_traversal_ns: int):
        self.tiers = tiers
        self.hosts = hosts
        self.link_capacity_bps = link_capacity_bps
        self.latency_ns = latency_ns
        self.switch_traversal_ns = switch_traversal_ns
        self.ports: dict[str, list[Port]] = {}
        self.cables: dict[str, Cable] = {}
        self.host_t0: dict[str, str] = {}       # host -> its TOR
        self.t0_hosts: dict[str, list[str]] = {}
        self.uplinks: dict[str, list[int]] = {}  # switch -> uplink port indices
        self.downlink_to: dict[str, dict[str, int]] = {}  # switch -> dest node -> port idx
        self.pod_of: dict[str, int] = {}
        self.switch_seed: dict[str, int] = {}
        self.core_t1_column: dict[str, int] = {}  # 3-tier: which per-pod T1 a core serves

    # -- construction helpers ----------------------------------------------

    def _add_cable(self, a: str, b: str, capacity_bps: int) -> Cable:
        name = f"{a}-{b}"
        cable = Cable(name, capacity_bps, self.latency_ns)
        self.cables[name] = cable
        return cable

    def _add_port(self, node: str, dest: str, cable: Cable, queue: PortQueue) -> int:
        ports = self.ports.setdefault(node, [])
        idx = len(ports)
        ports.append(Port(node, idx, dest, cable, queue))
        return idx

    # -- routing ------------------------------------------------------------

    def next_port(self, node: str, pkt: Packet) -> Port:
        """Forwarding decision at a node for one packet."""
        ports = self.ports[node]
        if node.startswith("h"):
            return ports[0]
        down = self.downlink_to[node].get(self._down_target(node, pkt.dst))
        if down is not None:
            return ports[down]
        ups = self.uplinks[node]
        pick = ecmp_select(self.switch_seed[node], pkt, len(ups))
        return ports[ups[pick]]

    def _down_target(self, node: str, dst_host: str) -> str | None:
        """Which locally-reachable node leads down toward the destination."""
        if node.startswith("t0"):
            return dst_host if self.host_t0[dst_host] == node else None
        if node.startswith("t1"):
            t0 = self.host_t0[dst_host]
            # 2-tier T1s reach every T0; 3-tier only those in their pod.
            return t0 if t0 in self.downlink_to[node] else None
        if node.startswith("core"):
            pod = self.pod_of[self.host_t0[dst_host]]
            return f"t1_{pod}_{self.core_t1_column[node]}"
        return None

    def all_links_up_reachable(self) -> bool:
        """Sanity check used by tests: every host can route to every other."""
        probe = Packet("h0", "h0", 0, 0, 0, 0, "data")
        for src in self.hosts:
            for dst in self.hosts:
                if src == dst:
                    continue
                probe.src, probe.dst = src, dst
                node = src
                for _ in range(8):
                    if node == dst:
                        break
                    port = self.next_port(node, probe)
                    node = port.dest
                else:
                    return False
        return True


def serialization_ns(size_bytes: int, capacity_bps: int) -> int:
    """Integer-ns wire time of one packet, rounded up."""
    return -(-size_bytes * 8 * 1_000_000_000 // capacity_bps)


def base_rtt_ns(topo: FabricTopology, mtu_bytes: int, ack_bytes: int = 64) -> int:
    """Unloaded worst-path round trip: full data packet out, ACK back."""
    hops = 4 if topo.tiers == 2 else 6
    traversals = (3 if topo.tiers == 2 else 5) * topo.switch_traversal_ns
    cap = topo.link_capacity_bps
    data_way = hops * (topo.latency_ns + serialization_ns(mtu_bytes, cap)) + traversals
    ack_way = hops * (topo.latency_ns + serialization_ns(ack_bytes, cap)) + traversals
    return data_way + ack_way


def size_queues_to_bdp(
    topo: FabricTopology, mtu_bytes: int,
    kmin_fraction: float = 0.20, kmax_fraction: float = 0.80,
) -> int:
    """Set every port queue to one BDP of its cable; returns the host BDP.

    BDP uses the unloaded base RTT of the full topology, so all equal-speed
    links get equal queues.
    """
    rtt = base_rtt_ns(topo, mtu_bytes)
    for ports in topo.ports.values():
        for port in ports:
            cap_bytes = max(mtu_bytes, port.cable.capacity_bps * rtt // 8_000_000_000)
            port.queue.capacity_bytes = cap_bytes
            port.queue.kmin_bytes = int(cap_bytes * kmin_fraction)
            port.queue.kmax_bytes = int(cap_bytes * kmax_fraction)
    return max(mtu_bytes, topo.link_capacity_bps * rtt // 8_000_000_000)


def build_fat_tree(
    tiers: int = 2,
    nodes: int = 16,
    uplinks_per_t0: int = 4,
    oversubscription: float = 1.0,
    link_capacity_bps: int = 400_000_000_000,
    latency_ns: int = 500,
    switch_traversal_ns: int = 500,
    mtu_bytes: int = 4096,
    queue_capacity_bytes: int = 0,
    kmin_fraction: float = 0.20,
    kmax_fraction: float = 0.80,
    pods: int = 1,
    uplinks_per_t1: int = 2,
    seed: int = 1,
    drop_acks: bool = False,
) -> FabricTopology:
    """Deterministic fat tree with stable port ordering.

    2-tier: every T0 connects to all T1s, one T1 per T0 uplink. 3-tier:
    ``pods`` pods each hold uplinks_per_t0 T1s; each T1 owns uplinks_per_t1
    cores, and core (j, m) connects to T1 j of every pod. Oversubscription
    scales hosts per T0 relative to its uplinks. Queues default to one BDP
    of the attached link (from the unloaded base RTT at ``mtu_bytes``);
    a nonzero ``queue_capacity_bytes`` overrides that uniformly.
    """
    if tiers not in (2, 3):
        raise ValueError(f"tiers must be 2 or 3, got {tiers}")
    hosts_per_t0 = round(uplinks_per_t0 * oversubscription)
    if hosts_per_t0 < 1:
        raise ValueError("oversubscription leaves T0s with no hosts")
    if tiers == 2:
        if nodes % hosts_per_t0:
            raise ValueError(f"{nodes} hosts not divisible by {hosts_per_t0} hosts per T0")
        t0_count = nodes // hosts_per_t0
        t0s_per_pod = t0_count
        pods = 1
    else:
        if nodes % (hosts_per_t0 * pods):
            raise ValueError(f"{nodes} hosts not divisible across {pods} pods of {hosts_per_t0}-host T0s")
        t0s_per_pod = nodes // (hosts_per_t0 * pods)

    hosts = [f"h{i}" for i in range(nodes)]
    topo = FabricTopology(tiers, hosts, link_capacity_bps, latency_ns, switch_traversal_ns)
    cap = queue_capacity_bytes if queue_capacity_bytes else mtu_bytes  # resized below when defaulted
    kmin = int(cap * kmin_fraction)
    kmax = int(cap * kmax_fraction)

    def make_queue(node, idx):
        rng = random.Random(derive_seed(seed, "red", node, idx))
        return PortQueue(cap, kmin, kmax, rng, drop_acks=drop_acks)

    def connect(a, b, capacity):
        cable = topo._add_cable(a, b, capacity)
        ia = topo._add_port(a, b, cable, make_queue(a, len(topo.ports.get(a, []))))
        ib = topo._add_port(b, a, cable, make_queue(b, len(topo.ports.get(b, []))))
        return ia, ib

    t0_names = []
    for p in range(pods):
        for t in range(t0s_per_pod):
            name = f"t0_{p}_{t}" if tiers == 3 else f"t0_{p * t0s_per_pod + t}"
            t0_names.append(name)
            topo.pod_of[name] = p
            topo.t0_hosts[name] = []
            topo.downlink_to[name] = {}
            topo.uplinks[name] = []
            topo.switch_seed[name] = derive_seed(seed, "ecmp", name)

    for i, h in enumerate(hosts):
        t0 = t0_names[i // hosts_per_t0]
        topo.host_t0[h] = t0
        topo.t0_hosts[t0].append(h)
        _, down_idx = connect(h, t0, link_capacity_bps)
        topo.downlink_to[t0][h] = down_idx

    if tiers == 2:
        t1_names = [f"t1_{j}" for j in range(uplinks_per_t0)]
        for t1 in t1_names:
            topo.downlink_to[t1] = {}
            topo.uplinks[t1] = []
            topo.switch_seed[t1] = derive_seed(seed, "ecmp", t1)
        for t0 in t0_names:
            for t1 in t1_names:
                up_idx, down_idx = connect(t0, t1, link_capacity_bps)
                topo.uplinks[t0].append(up_idx)
                topo.downlink_to[t1][t0] = down_idx
    else:
        for p in range(pods):
            t1s = [f"t1_{p}_{j}" for j in range(uplinks_per_t0)]
            for t1 in t1s:
                topo.downlink_to[t1] = {}
                topo.uplinks[t1] = []
                topo.pod_of[t1] = p
                topo.switch_seed[t1] = derive_seed(seed, "ecmp", t1)
            for t in range(t0s_per_pod):
                t0 = f"t0_{p}_{t}"
                for t1 in t1s:
                    up_idx, down_idx = connect(t0, t1, link_capacity_bps)
                    topo.uplinks[t0].append(up_idx)
                    topo.downlink_to[t1][t0] = down_idx
        for j in range(uplinks_per_t0):
            for m in range(uplinks_per_t1):
                core = f"core_{j}_{m}"
                topo.downlink_to[core] = {}
                topo.uplinks[core] = []
                topo.core_t1_column[core] = j
                topo.switch_seed[core] = derive_seed(seed, "ecmp", core)
                for p in range(pods):
                    t1 = f"t1_{p}_{j}"
                    up_idx, down_idx = connect(t1, core, link_capacity_bps)
                    topo.uplinks[t1].append(up_idx)
                    topo.downlink_to[core][t1] = down_idx

    for cable in topo.cables.values():
        cable.validate_schedule()
    if not queue_capacity_bytes:
        size_queues_to_bdp(topo, mtu_bytes, kmin_fraction, kmax_fraction)
    return topo


def apply_failure_schedule(topo: FabricTopology, now_ns: int) -> dict[str, tuple[str, int]]:
    """Effective (mode, capacity) of every cable at an instant."""
    return {name: cable.state_at(now_ns) for name, cable in topo.cables.items()}
