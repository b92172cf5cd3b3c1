"""Seeded 64-bit mixing used for ECMP port selection.

One avalanche-quality finalizer (the splitmix64 constants) in two flavors:
scalar Python ints for the packet simulator's hot path and numpy uint64
arrays for bulk experiments. Both produce identical values for identical
inputs, which the tests pin down.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_C1 = 0xBF58476D1CE4E5B9
_C2 = 0x94D049BB133111EB
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    x &= MASK64
    x ^= x >> 30
    x = (x * _C1) & MASK64
    x ^= x >> 27
    x = (x * _C2) & MASK64
    x ^= x >> 31
    return x


def mix64_np(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x ^= x >> np.uint64(30)
        x *= np.uint64(_C1)
        x ^= x >> np.uint64(27)
        x *= np.uint64(_C2)
        x ^= x >> np.uint64(31)
    return x


def combine(seed: int, *fields: int) -> int:
    """Order-sensitive chained mix of integer fields under a seed."""
    h = mix64(seed ^ _GOLDEN)
    for f in fields:
        h = mix64(h ^ (f & MASK64))
    return h


def derive_seed(global_seed: int, *tags: int | str) -> int:
    """Stable per-entity seed; strings hash by bytes so names stay stable."""
    h = mix64(global_seed ^ _GOLDEN)
    for tag in tags:
        if isinstance(tag, str):
            for b in tag.encode():
                h = mix64(h ^ b)
        else:
            h = mix64(h ^ (tag & MASK64))
    return h


def uplinks_for_evs(headers: np.ndarray, evs_size: int, num_ports: int, seed: int) -> np.ndarray:
    """Port index for every (header, ev) pair, shape (len(headers), evs_size).

    Matches combine(seed, header, ev) % num_ports element for element; the
    chain is unrolled into vector ops so sweeping a full 16-bit EVS over many
    flows stays cheap.
    """
    h0 = mix64(seed ^ _GOLDEN)
    hh = mix64_np(np.uint64(h0) ^ headers.astype(np.uint64))  # (flows,)
    ev = np.arange(evs_size, dtype=np.uint64)
    out = np.empty((len(headers), evs_size), dtype=np.int64)
    for i, h in enumerate(hh):
        out[i] = (mix64_np(h ^ ev) % np.uint64(num_ports)).astype(np.int64)
    return out
