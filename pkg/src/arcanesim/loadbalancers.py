"""Per-connection EV selection policies behind one small interface.

Three bindings: oblivious spraying (a fresh uniform EV per packet), static
per-flow hashing (one EV for the connection's lifetime, so all packets pin
to one path), and the adaptive entropy cache. A binding owns nothing but
its per-connection state; the transport calls pick_ev on every send and
forwards ACK echoes and timeout signals to the notify hooks, which only the
adaptive binding acts on.
"""

from __future__ import annotations

import random

from .arcane import ArcaneConfig, ArcaneState
from .hashing import combine

KINDS = ("arcane", "ops", "ecmp")

_ECMP_EV_SALT = 0x5CA1AB1E


class OpsBinding:
    kind = "ops"

    def __init__(self, evs_size: int):
        self.evs_size = evs_size

    def pick_ev(self, rng: random.Random, now: int) -> int:
        return rng.randrange(self.evs_size)

    def notify_ack(self, carried_ev: int, ecn: bool, now: int) -> None:
        pass

    def notify_failure(self, now: int) -> None:
        pass


class EcmpBinding:
    """Static flow-to-path assignment: the EV never changes."""

    kind = "ecmp"

    def __init__(self, evs_size: int, flow_id: int):
        self.evs_size = evs_size
        self.fixed_ev = combine(_ECMP_EV_SALT, flow_id) % evs_size

    def pick_ev(self, rng: random.Random, now: int) -> int:
        return self.fixed_ev

    def notify_ack(self, carried_ev: int, ecn: bool, now: int) -> None:
        pass

    def notify_failure(self, now: int) -> None:
        pass


class ArcaneBinding:
    kind = "arcane"

    def __init__(self, config: ArcaneConfig):
        self.evs_size = config.evs_size
        self.state = ArcaneState(config)

    def pick_ev(self, rng: random.Random, now: int) -> int:
        return self.state.on_send(rng)

    def notify_ack(self, carried_ev: int, ecn: bool, now: int) -> None:
        self.state.on_ack(carried_ev, ecn, now)

    def notify_failure(self, now: int) -> None:
        self.state.on_failure_detection(now)


def make_binding(kind: str, evs_size: int, flow_id: int, arcane_config: ArcaneConfig | None = None):
    if kind == "ops":
        return OpsBinding(evs_size)
    if kind == "ecmp":
        return EcmpBinding(evs_size, flow_id)
    if kind == "arcane":
        cfg = arcane_config or ArcaneConfig(evs_size=evs_size)
        if cfg.evs_size != evs_size:
            raise ValueError("arcane config evs_size disagrees with binding evs_size")
        return ArcaneBinding(cfg)
    raise ValueError(f"unknown load balancer kind {kind!r}; expected one of {KINDS}")
