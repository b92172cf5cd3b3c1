#!/usr/bin/env python3
"""Why the entropy field wants 16 bits: hash-imbalance vs EVS size.

Each flow owns one ball per possible EV; the switch hash fixes where every
(flow, EV) pair lands. A small EVS leaves the busiest uplink well above
its fair share no matter what the sender does; 2^16 EVs push the excess
under one percent.
"""

import numpy as np

from arcanesim.evs import evs_load_imbalance

UPLINKS = 32
rng = np.random.default_rng(4)

print(f"{'EVS size':>10} {'1 flow':>10} {'32 flows':>10}   (mean worst-uplink excess, 200 trials)")
for bits in (5, 8, 11, 16):
    size = 2**bits
    trials = 200 if bits < 16 else 50
    one = evs_load_imbalance(1, size, UPLINKS, hash_seed=99, trials=trials, rng=rng)
    many = evs_load_imbalance(32, size, UPLINKS, hash_seed=99, trials=trials, rng=rng)
    print(f"{f'2^{bits}':>10} {one.mean:>9.1%} {many.mean:>9.1%}")
