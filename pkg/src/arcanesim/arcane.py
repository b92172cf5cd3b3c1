"""Per-connection ARCANE entropy-caching state machine.

ARCANE steers packets by choosing the entropy value (EV) that switches feed
into their ECMP hash. The sender keeps a small circular buffer of EVs echoed
back by ACKs: an EV that returned without an ECN mark identifies a path that
was recently uncongested, so it is cached and reused oldest-first. When there
is nothing trustworthy to reuse, the sender explores a fresh random EV.

Failure handling is a separate mode ("freezing"): after a retransmission
timeout the connection stops exploring entirely and recycles only EVs that
are already in the buffer, even ones whose validity bit was already spent.
Random exploration would risk re-picking the failed path; recycling cannot,
because everything in the buffer was echoed by an ACK that actually made it
back. Freezing expires after a configured timeout, at which point the next
ACK re-arms one bandwidth-delay product worth of random exploration.

All timestamps are simulator-clock nanoseconds. One ArcaneState belongs to
exactly one connection and is never shared across threads.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ArcaneConfig:
    """Sizing knobs for one connection's entropy cache."""

    buffer_size: int = 8
    evs_size: int = 2**16
    freezing_timeout: int = 1_000_000  # ns
    bdp_packets: int = 0

    def __post_init__(self):
        if self.buffer_size < 1:
            raise ValueError(f"buffer_size must be >= 1, got {self.buffer_size}")
        if self.evs_size < 2:
            raise ValueError(f"evs_size must be >= 2, got {self.evs_size}")
        if self.bdp_packets < 0:
            raise ValueError(f"bdp_packets must be >= 0, got {self.bdp_packets}")


# Per-connection footprint, in bits: each buffer slot holds a 16-bit EV plus
# its validity bit; the globals are head (8), numberOfValidEVs (8),
# exitFreezingMode (32), isFreezingMode (1) and exploreCounter (8).
_BITS_PER_SLOT = 16 + 1
_BITS_GLOBALS = 8 + 8 + 32 + 1 + 8


def memory_footprint_bits(config: ArcaneConfig | int) -> int:
    """Hardware state cost of one connection, in bits.

    Accepts a raw slot count as well, so the formula's degenerate
    zero-slot value (globals only) stays expressible even though the
    config type forbids building such a buffer.
    """
    slots = config if isinstance(config, int) else config.buffer_size
    return slots * _BITS_PER_SLOT + _BITS_GLOBALS


@dataclass
class ArcaneState:
    """Mutable per-connection cache: circular EV buffer plus mode flags.

    ``head`` is both the write cursor for newly cached EVs and the recycle
    cursor while freezing with no valid entries left. ``ever_cached_count``
    saturates at ``buffer_size`` and distinguishes a never-written buffer
    (must explore) from one whose entries merely had their validity spent
    (recyclable while freezing).
    """

    config: ArcaneConfig
    evs: list[int] = field(init=False)
    valid: list[bool] = field(init=False)
    head: int = 0
    number_of_valid_evs: int = 0
    is_freezing_mode: bool = False
    exit_freezing_mode: int = 0
    explore_counter: int = 0
    ever_cached_count: int = 0

    def __post_init__(self):
        self.evs = [0] * self.config.buffer_size
        self.valid = [False] * self.config.buffer_size
        # A new connection has no knowledge of the network yet, so it starts
        # with a full BDP worth of random exploration already armed.
        self.explore_counter = self.config.bdp_packets

    # -- ACK path ---------------------------------------------------------

    def on_ack(self, ack_ev: int, ecn_marked: bool, now: int) -> None:
        """Cache the EV echoed by an ACK, unless the ACK carries an ECN mark.

        An ECN-marked ACK means the path was congested; its EV is discarded
        and the state is left completely untouched. Otherwise the EV
        overwrites the slot at ``head`` and the freezing-exit check runs.
        """
        if ecn_marked:
            return
        if not self.valid[self.head]:
            self.number_of_valid_evs += 1
        self.evs[self.head] = ack_ev
        self.valid[self.head] = True
        # Slots are written left to right, so the never-written region is
        # always the suffix [ever_cached_count, buffer_size).
        if self.head == self.ever_cached_count and self.ever_cached_count < self.config.buffer_size:
            self.ever_cached_count += 1
        self.head = (self.head + 1) % self.config.buffer_size
        if self.is_freezing_mode and now > self.exit_freezing_mode:
            self.is_freezing_mode = False
            self.explore_counter = self.config.bdp_packets

    def on_failure_detection(self, now: int) -> None:
        """Enter freezing mode on a loss signal (e.g. an RTO firing).

        Ignored while already frozen, and ignored during the initial
        exploration phase when there is nothing cached worth protecting.
        """
        if not self.is_freezing_mode and self.explore_counter == 0:
            self.is_freezing_mode = True
            self.exit_freezing_mode = now + self.config.freezing_timeout

    def tick(self, now: int) -> None:
        """Optional freezing-exit check for hosts that may see no ACKs.

        Performs the same expiry test as on_ack. Not called anywhere by
        default; a host may wire it to a timer to avoid staying frozen
        forever on a connection whose ACK stream died entirely.
        """
        if self.is_freezing_mode and now > self.exit_freezing_mode:
            self.is_freezing_mode = False
            self.explore_counter = self.config.bdp_packets

    # -- send path --------------------------------------------------------

    def get_next_ev(self) -> int:
        """Pop the next reusable EV from the buffer.

        With valid entries present this returns the oldest one (validity is
        spent, head stays put). With none left we must be freezing; the entry
        under ``head`` is recycled as-is and ``head`` advances, so repeated
        calls walk the written slots round-robin. Wrapping over the written
        prefix (not the full array) keeps a buffer that froze before ever
        filling from emitting slot initializers that no ACK echoed; once all
        slots have been written the two are the same.
        """
        assert self.ever_cached_count > 0, "get_next_ev on never-written buffer"
        if self.number_of_valid_evs > 0:
            offset = (self.head - self.number_of_valid_evs) % self.config.buffer_size
            self.valid[offset] = False
            self.number_of_valid_evs -= 1
        else:
            assert self.is_freezing_mode, "no valid EVs and not freezing"
            offset = self.head % self.ever_cached_count
            self.head = (offset + 1) % self.ever_cached_count
        return self.evs[offset]

    def on_send(self, rng: random.Random) -> int:
        """Choose the EV for the next outgoing data packet.

        Explores a uniform random EV while the buffer has never been written,
        while the exploration counter is running down, or when there is
        nothing valid to reuse outside freezing mode. Otherwise reuses a
        cached EV via get_next_ev.
        """
        if (
            self.ever_cached_count == 0
            or (self.number_of_valid_evs == 0 and not self.is_freezing_mode)
            or self.explore_counter > 0
        ):
            self.explore_counter = max(self.explore_counter - 1, 0)
            return rng.randrange(self.config.evs_size)
        return self.get_next_ev()

    # -- introspection ----------------------------------------------------

    def snapshot(self) -> tuple:
        """Full state as a flat tuple, fields in declaration order."""
        return (
            tuple(self.evs),
            tuple(self.valid),
            self.head,
            self.number_of_valid_evs,
            self.is_freezing_mode,
            self.exit_freezing_mode,
            self.explore_counter,
            self.ever_cached_count,
        )
