"""Sender/receiver endpoints: windowed sending, OOO delivery, RTO recovery.

Congestion control is a per-ACK window rule in the DCTCP family: every ACK
that covers new data grows the window by MTU^2/cwnd (one MTU per RTT), an
ECN-echo ACK instead shrinks it by half an MTU, and a retransmission
timeout costs one MTU once per loss event. The receiver accepts packets in
any order, deduplicates, and acknowledges every Nth data packet (N = the
coalescing ratio); the ACK echoes only the EV and ECN mark of the packet
that triggered it, plus the set of sequence numbers newly seen. Expired
packets are re-queued and leave with a fresh EV from the connection's load
balancer binding, which also gets the timeout signal.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .fabric import Packet
from .workloads import FlowSpec

ACK_BYTES = 64


@dataclass
class SentRecord:
    size_bytes: int
    sent_ns: int = 0
    ev: int = 0
    acked: bool = False
    pending_retx: bool = False
    in_flight: bool = False


class Connection:
    """Both endpoints of one flow; the engine drives each side's hooks."""

    def __init__(self, spec: FlowSpec, binding, rng: random.Random, mtu_bytes: int,
                 rto_ns: int, ack_coalesce: int = 1, cwnd_init_bytes: int = 0,
                 cwnd_max_bytes: int = 0):
        if ack_coalesce < 1:
            raise ValueError("ack_coalesce must be >= 1")
        self.spec = spec
        self.binding = binding
        self.rng = rng
        self.mtu = mtu_bytes
        self.rto_ns = rto_ns
        self.ack_coalesce = ack_coalesce
        self.total_packets = -(-spec.size_bytes // mtu_bytes)
        self.cwnd = max(mtu_bytes, cwnd_init_bytes or mtu_bytes)
        self.cwnd_max = cwnd_max_bytes or spec.size_bytes + mtu_bytes
        self.flight = 0
        self.next_new_seq = 0
        self.retx_queue: list[int] = []
        self.sent: dict[int, SentRecord] = {}
        self.loss_event_until = -1
        # Receiver side.
        self.received: set[int] = set()
        self.delivered = 0
        self.coalesce_count = 0
        self.pending_ack_seqs: list[int] = []
        self.complete_ns: int | None = None
        self.acks_sent = 0

    # -- sender ------------------------------------------------------------

    def pkt_size(self, seq: int) -> int:
        if seq == self.total_packets - 1:
            return self.spec.size_bytes - self.mtu * (self.total_packets - 1)
        return self.mtu

    def maybe_send(self, now: int) -> list[Packet]:
        """Emit as many packets as the window allows, retransmissions first."""
        out = []
        while self.flight + self.mtu <= self.cwnd:
            if self.retx_queue:
                seq = self.retx_queue.pop(0)
                rec = self.sent[seq]
                rec.pending_retx = False
            elif self.next_new_seq < self.total_packets:
                seq = self.next_new_seq
                self.next_new_seq += 1
                rec = self.sent[seq] = SentRecord(size_bytes=self.pkt_size(seq))
            else:
                break
            ev = self.binding.pick_ev(self.rng, now)
            rec.sent_ns = now
            rec.ev = ev
            rec.in_flight = True
            self.flight += rec.size_bytes
            out.append(Packet(self.spec.src, self.spec.dst, self.spec.flow_id,
                              ev, seq, rec.size_bytes, "data"))
        return out

    def on_ack(self, ack: Packet, now: int) -> None:
        """Apply delivery info, forward the echo to the binding, update cwnd."""
        any_new = False
        for seq in ack.acked_seqs:
            rec = self.sent.get(seq)
            if rec is None or rec.acked:
                continue
            rec.acked = True
            any_new = True
            if rec.in_flight:
                rec.in_flight = False
                self.flight -= rec.size_bytes
            if rec.pending_retx:
                rec.pending_retx = False
                self.retx_queue.remove(seq)
        self.binding.notify_ack(ack.carried_ev, ack.ecn, now)
        if not any_new:
            return
        if ack.ecn:
            self.cwnd = max(self.mtu, self.cwnd - self.mtu // 2)
        else:
            self.cwnd = min(self.cwnd_max, self.cwnd + self.mtu * self.mtu // self.cwnd)

    def rto_check(self, now: int) -> bool:
        """Expire overdue packets; True if anything timed out.

        Expired packets leave the flight and join the retransmission queue;
        the window shrinks once per loss event (at most once per RTO span)
        and the binding's failure hook fires whenever something expired.
        """
        expired = []
        for seq, rec in self.sent.items():
            if rec.in_flight and not rec.acked and now - rec.sent_ns > self.rto_ns:
                expired.append(seq)
        for seq in expired:
            rec = self.sent[seq]
            rec.in_flight = False
            self.flight -= rec.size_bytes
            if not rec.pending_retx:
                rec.pending_retx = True
                self.retx_queue.append(seq)
        if not expired:
            return False
        if now >= self.loss_event_until:
            self.loss_event_until = now + self.rto_ns
            self.cwnd = max(self.mtu, self.cwnd - self.mtu)
        self.binding.notify_failure(now)
        return True

    def next_rto_deadline(self) -> int | None:
        deadlines = [rec.sent_ns + self.rto_ns for rec in self.sent.values()
                     if rec.in_flight and not rec.acked]
        return min(deadlines) + 1 if deadlines else None

    def sender_done(self) -> bool:
        return (self.next_new_seq == self.total_packets and not self.retx_queue
                and all(r.acked for r in self.sent.values()))

    # -- receiver ----------------------------------------------------------

    def on_data(self, pkt: Packet, now: int) -> Packet | None:
        """Accept a data packet in any order; maybe emit one ACK.

        New packets advance the coalescing counter; every Nth (or the one
        completing the flow) triggers an ACK echoing this packet's EV and
        ECN state plus every sequence newly seen since the last ACK.
        Duplicates are re-acknowledged immediately so a sender whose ACK was
        delayed past its RTO can still clear the packet, but they advance
        neither the delivery count nor the coalescing counter.
        """
        if pkt.seq in self.received:
            return self._make_ack(pkt, [pkt.seq])
        self.received.add(pkt.seq)
        self.delivered += 1
        self.pending_ack_seqs.append(pkt.seq)
        self.coalesce_count += 1
        completed = self.delivered == self.total_packets
        if completed and self.complete_ns is None:
            self.complete_ns = now
        if self.coalesce_count >= self.ack_coalesce or completed:
            self.coalesce_count = 0
            seqs = self.pending_ack_seqs
            self.pending_ack_seqs = []
            return self._make_ack(pkt, seqs)
        return None

    def _make_ack(self, trigger: Packet, seqs: list[int]) -> Packet:
        self.acks_sent += 1
        return Packet(self.spec.dst, self.spec.src, self.spec.flow_id,
                      trigger.ev, trigger.seq, ACK_BYTES, "ack",
                      ecn=trigger.ecn, carried_ev=trigger.ev,
                      acked_seqs=tuple(seqs))
