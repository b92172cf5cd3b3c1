#!/usr/bin/env python3
"""Walk the per-connection entropy cache through its whole lifecycle.

A connection starts knowing nothing, so it sprays random entropy values.
ACKs that come back clean get their EV cached; congested (ECN-marked) ones
are discarded. Reuse is oldest-first. A timeout freezes the cache: from
then on only previously cached EVs leave the sender, even if their
validity was already spent, until the freeze expires and exploration
re-arms.
"""

import random

from arcanesim.arcane import ArcaneConfig, ArcaneState, memory_footprint_bits

cfg = ArcaneConfig(buffer_size=8, evs_size=2**16, freezing_timeout=100_000, bdp_packets=4)
state = ArcaneState(cfg)
rng = random.Random(7)

print(f"per-connection footprint: {memory_footprint_bits(cfg)} bits "
      f"({memory_footprint_bits(cfg) / 8:.0f} bytes)")

print("\n-- warmup: first BDP worth of packets explores randomly")
for i in range(4):
    print(f"  send {i}: EV={state.on_send(rng)} (explore, counter now {state.explore_counter})")

print("\n-- clean ACKs cache their EVs; an ECN-marked one is discarded")
for ev, ecn in ((101, False), (202, False), (303, True), (404, False)):
    state.on_ack(ev, ecn, now=1000)
    print(f"  ack EV={ev} ecn={ecn}: buffer={state.evs[:4]}... valid={state.number_of_valid_evs}")

print("\n-- sends now reuse the cached EVs oldest-first")
for _ in range(3):
    print(f"  send: EV={state.on_send(rng)} (valid left {state.number_of_valid_evs})")

print("\n-- a timeout enters freezing mode: recycle only, never random")
state.on_failure_detection(now=2000)
print(f"  frozen={state.is_freezing_mode}, exit at t={state.exit_freezing_mode}")
for _ in range(5):
    print(f"  send while frozen: EV={state.on_send(rng)}")

print("\n-- an ACK past the deadline thaws the cache and re-arms exploration")
state.on_ack(505, False, now=200_000)
print(f"  frozen={state.is_freezing_mode}, explore counter={state.explore_counter}")
