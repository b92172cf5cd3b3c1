"""Batched and recycled balls-into-bins chains with drift instrumentation.

Both chains model the output-port queues of a single switch at full
injection: bins are ports, balls are packets, one ball leaves every
non-empty bin per round.

The batched chain throws Binomial(n, lambda) fresh balls uniformly at random
each round (exactly n at lambda = 1) and models oblivious spraying: at full
rate the max queue drifts upward without bound because some port always
misses a round of arrivals while every port keeps receiving on average.

The recycled chain adds path memory. There are b*n ball colors cycled
round-robin in batches of n. A color that sees its ball leave a bin holding
at most tau balls remembers that bin (unless it already remembers one); a
departure from a bin above tau makes it forget. Remembering colors re-throw
into their bin, forgetful ones throw uniformly at random. Convergence means
every color remembers, no bin exceeds tau, and no color has two balls in
flight; after that every departure is matched by a return to the same bin.

The potential Y_t = sum_i max(0, load_i - tau) measures distance from the
converged region, and ``drift_estimate`` Monte-Carlos its one-step change
for the idealized all-colors-distinct chain.
"""

from __future__ import annotations

import csv
import math
import random
from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PotentialRecord:
    """Per-round observables shared by both chains."""

    round: int
    max_load: int
    yt: int
    kt: int
    total_balls: int
    converged: bool


def potential(loads, tau: int) -> int:
    """Sum of per-bin excess above tau."""
    return int(sum(max(0, x - tau) for x in loads))


class BatchedChain:
    """Oblivious-spraying queue model; balls are anonymous, so bins are counts."""

    def __init__(self, n: int, lam: float = 1.0, rng: np.random.Generator | None = None):
        if n < 1:
            raise ValueError("need at least one bin")
        if not 0.0 < lam <= 1.0:
            raise ValueError(f"lambda must be in (0, 1], got {lam}")
        self.n = n
        self.lam = lam
        self.rng = rng if rng is not None else np.random.default_rng()
        self.counts = np.zeros(n, dtype=np.int64)
        self.round = 0

    def step(self) -> PotentialRecord:
        self.round += 1
        np.subtract(self.counts, self.counts > 0, out=self.counts)
        arrivals = int(self.rng.binomial(self.n, self.lam)) if self.lam < 1.0 else self.n
        if arrivals:
            dests = self.rng.integers(0, self.n, size=arrivals)
            self.counts += np.bincount(dests, minlength=self.n)
        total = int(self.counts.sum())
        return PotentialRecord(
            round=self.round,
            max_load=int(self.counts.max()),
            yt=total,              # tau treated as 0 for this chain
            kt=int((self.counts > 0).sum()),
            total_balls=total,
            converged=False,
        )


def batched_max_load_runs(
    n: int, lam: float, rounds: int, seeds: int, base_seed: int = 1,
    sample_every: int = 1,
) -> np.ndarray:
    """Max-load trajectories for many seeds at once, shape (seeds, samples).

    All seeds advance in lockstep with vectorized removals and multinomial
    arrivals; seed i uses the stream spawned from (base_seed, i) so results
    are independent of how many seeds run together.
    """
    gens = [np.random.default_rng(np.random.SeedSequence([base_seed, i])) for i in range(seeds)]
    # One generator drives each row so per-seed streams match BatchedChain
    # only in distribution, not draw-for-draw; trajectories are still fully
    # reproducible from (base_seed, i).
    counts = np.zeros((seeds, n), dtype=np.int64)
    out = np.empty((seeds, rounds // sample_every), dtype=np.int64)
    pvals = np.full(n, 1.0 / n)
    col = 0
    for r in range(1, rounds + 1):
        counts -= counts > 0
        for s, g in enumerate(gens):
            a = int(g.binomial(n, lam)) if lam < 1.0 else n
            if a:
                counts[s] += g.multinomial(a, pvals)
        if r % sample_every == 0:
            out[:, col] = counts.max(axis=1)
            col += 1
    return out


class RecycledChain:
    """Color-memory queue model with FIFO bins.

    Each round has two parts. First, every non-empty bin pops its oldest
    ball: the departing color remembers a bin at or below tau (unless it
    already remembers one) and forgets a bin above tau, and the ball is
    re-thrown in the same round, into the remembered bin if the color has
    one and uniformly at random otherwise. Second, the next round-robin
    batch of n colors injects: any batch color that currently has no ball
    in the system throws a fresh one (remembered bin or uniform). Injection
    is how the system fills from empty; once every color holds a ball the
    total is constant and only the re-throw part moves balls around.

    This gives the guarantees the convergence argument is built on: a bin
    that is non-empty stays non-empty (a pop at or below tau returns
    immediately, a pop above tau leaves at least tau behind), an assigned
    color's ball always sits in its remembered bin, and the converged state
    (all colors remember, all loads at most tau) is a literal fixed point.

    ``recycle_every`` suppresses the remember/forget update except on rounds
    divisible by it, modeling senders that only learn from every Nth
    acknowledgment; re-throws still follow whatever is remembered. At the
    limit (never update) every re-throw is uniform random, which is exactly
    the oblivious-spraying chain at constant ball count.

    ``remember_rule`` picks whether the threshold test reads the bin load
    just before this round's removals ("before", default: the state the
    departing ball experienced) or just after its own removal ("after").
    """

    def __init__(
        self,
        n: int,
        tau: int,
        b: int,
        rng: random.Random | None = None,
        recycle_every: int = 1,
        remember_rule: str = "before",
    ):
        if n < 1 or tau < 1 or b < 1 or recycle_every < 1:
            raise ValueError("n, tau, b, recycle_every must all be >= 1")
        if remember_rule not in ("before", "after"):
            raise ValueError(f"remember_rule must be 'before' or 'after', got {remember_rule!r}")
        self.n = n
        self.tau = tau
        self.b = b
        self.num_colors = b * n
        self.recycle_every = recycle_every
        self.remember_rule = remember_rule
        self.rng = rng if rng is not None else random.Random()
        self.bins: list[deque[int]] = [deque() for _ in range(n)]
        self.loads = [0] * n
        self.memory = [-1] * self.num_colors
        self.inflight = [0] * self.num_colors
        self.batch_cursor = 0
        self.round = 0
        # Incrementally maintained so is_converged is O(n).
        self.remembered_count = 0
        self.emptied_transitions = 0  # non-empty bins that drained to zero

    def step(self) -> PotentialRecord:
        self.round += 1
        n = self.n
        tau = self.tau
        loads = self.loads
        memory = self.memory
        inflight = self.inflight
        bins = self.bins
        rng = self.rng
        update_memory = (self.round % self.recycle_every) == 0
        after_rule = self.remember_rule == "after"

        was_nonempty = [ld > 0 for ld in loads]

        # Removal happens simultaneously at every non-empty bin, based on
        # start-of-round loads; the departures are collected first so a
        # re-thrown ball can never be popped twice in one round.
        popped = []
        for i in range(n):
            ld = loads[i]
            if ld == 0:
                continue
            c = bins[i].popleft()
            loads[i] = ld - 1
            popped.append((c, i, ld))

        # Memory update and same-round re-throw for every departed ball.
        for c, i, ld in popped:
            if update_memory:
                observed = ld - 1 if after_rule else ld
                if observed <= tau:
                    if memory[c] < 0:
                        memory[c] = i
                        self.remembered_count += 1
                elif memory[c] >= 0:
                    memory[c] = -1
                    self.remembered_count -= 1
            dest = memory[c]
            if dest < 0:
                dest = rng.randrange(n)
            bins[dest].append(c)
            loads[dest] += 1

        # Injection: batch colors not yet holding a ball throw a fresh one.
        cur = self.batch_cursor
        for c in range(cur, cur + n):
            if inflight[c]:
                continue
            dest = memory[c]
            if dest < 0:
                dest = rng.randrange(n)
            bins[dest].append(c)
            loads[dest] += 1
            inflight[c] = 1
        self.batch_cursor = (cur + n) % self.num_colors

        for i in range(n):
            if was_nonempty[i] and loads[i] == 0:
                self.emptied_transitions += 1

        y = 0
        k = 0
        mx = 0
        total = 0
        for ld in loads:
            total += ld
            if ld > mx:
                mx = ld
            if ld > tau:
                k += 1
                y += ld - tau
        return PotentialRecord(
            round=self.round, max_load=mx, yt=y, kt=k,
            total_balls=total, converged=self.is_converged(),
        )

    def is_converged(self) -> bool:
        """All colors remember, no bin above tau, no color doubled up.

        Unique occupancy (at most one ball per color in the bins) is
        structural here: injection only fires for ball-less colors and
        re-throws conserve the ball. From a converged state every pop
        returns to the same bin, so nothing ever changes again.
        """
        if self.remembered_count != self.num_colors:
            return False
        if any(f > 1 for f in self.inflight):
            return False
        tau = self.tau
        return all(ld <= tau for ld in self.loads)


def drift_estimate(
    n: int,
    tau: int,
    loads,
    trials: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte-Carlo (mean, stderr) of the one-step potential change.

    Idealized all-colors-distinct step from the given loads: every bin pops
    one ball; a pop from a bin at or below tau returns to the same bin
    (memory), a pop from a bin above tau is re-thrown uniformly at random.
    Requires every bin non-empty, the regime the drift argument lives in.
    """
    loads = np.asarray(loads, dtype=np.int64)
    if loads.shape != (n,):
        raise ValueError(f"expected {n} bin loads, got shape {loads.shape}")
    if (loads < 1).any():
        raise ValueError("drift_estimate requires all bins non-empty")
    over = loads > tau
    k = int(over.sum())
    y0 = int(np.maximum(loads - tau, 0).sum())
    if k == 0:
        # No ball leaves its bin, no randomness, drift identically zero.
        return 0.0, 0.0
    arrivals = rng.multinomial(k, np.full(n, 1.0 / n), size=trials)
    new_loads = loads - over + arrivals
    y1 = np.maximum(new_loads - tau, 0).sum(axis=1)
    drifts = y1.astype(np.float64) - y0
    mean = float(drifts.mean())
    stderr = float(drifts.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    return mean, stderr


def sample_second_phase_loads(
    n: int, tau: int, rng: np.random.Generator, min_overfull: int = 1
) -> np.ndarray:
    """Random load vector from the drift argument's regime.

    All bins non-empty, at least ``min_overfull`` bins above tau, and the
    total within the 2*n*ln(n) + n ball budget the analysis assumes.
    """
    budget = int(2 * n * math.log(n) + n)
    loads = np.ones(n, dtype=np.int64)
    remaining = budget - n
    k = int(rng.integers(min_overfull, max(min_overfull + 1, n // 8) + 1))
    hot = rng.choice(n, size=k, replace=False)
    for i in hot:
        extra = min(tau + int(rng.integers(0, 3)), remaining)  # 1+extra > tau
        loads[i] += extra
        remaining -= extra
    if remaining > 0:
        # Spread the rest over everything, then clip cold bins back to tau;
        # the clipped surplus is simply dropped, keeping the total in budget.
        spread = rng.multinomial(remaining, np.full(n, 1.0 / n))
        loads += spread
        cap = np.full(n, tau, dtype=np.int64)
        cap[hot] = loads[hot]
        loads = np.minimum(loads, cap)
    assert (loads >= 1).all() and loads.sum() <= budget
    assert int((loads > tau).sum()) >= min_overfull
    return loads


def write_recycled_csv(path, records: list[PotentialRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["round", "max_load", "Y_t", "K_t", "total_balls", "converged"])
        for r in records:
            w.writerow([r.round, r.max_load, r.yt, r.kt, r.total_balls, int(r.converged)])


def write_batched_csv(path, records: list[PotentialRecord]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["round", "max_load", "total_balls"])
        for r in records:
            w.writerow([r.round, r.max_load, r.total_balls])
