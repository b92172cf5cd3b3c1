"""How the entropy-space size limits achievable load balance.

Each active flow owns one ball per possible EV: the switch hash pins every
(flow header, EV) pair to an uplink, so with a small EVS even a perfectly
random sender can only reach a coarse, skewed partition of its paths. The
imbalance metric is max_load / (m/n) - 1 with m = flows * evs_size balls
over n = uplinks bins: the fractional excess of the fullest uplink over the
uniform share. Sweeping evs_size reproduces the motivation for 16-bit
entropy fields: tiny EVS values leave double-digit percent imbalance, the
full 16-bit space brings it under one percent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hashing import uplinks_for_evs


@dataclass(frozen=True)
class ImbalanceSummary:
    num_flows: int
    evs_size: int
    uplinks: int
    samples: np.ndarray  # one imbalance value per trial

    @property
    def mean(self) -> float:
        return float(self.samples.mean())

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.samples, q))


def evs_load_imbalance(
    num_flows: int,
    evs_size: int,
    uplinks: int,
    hash_seed: int,
    trials: int,
    rng: np.random.Generator,
) -> ImbalanceSummary:
    """Distribution of the worst-uplink excess over ``trials`` flow draws.

    Every trial samples fresh 64-bit flow headers, hashes all
    num_flows * evs_size (header, ev) pairs onto the uplinks under one
    seeded switch hash, and records l / (m/n) - 1 for the fullest uplink.
    """
    if uplinks < 1 or evs_size < 1 or num_flows < 1 or trials < 1:
        raise ValueError("num_flows, evs_size, uplinks, trials must all be >= 1")
    m = num_flows * evs_size
    fair_share = m / uplinks
    samples = np.empty(trials, dtype=np.float64)
    for t in range(trials):
        headers = rng.integers(0, 2**64, size=num_flows, dtype=np.uint64)
        ports = uplinks_for_evs(headers, evs_size, uplinks, hash_seed)
        counts = np.bincount(ports.ravel(), minlength=uplinks)
        samples[t] = counts.max() / fair_share - 1.0
    return ImbalanceSummary(num_flows, evs_size, uplinks, samples)
