"""Hash mixing quality and the EVS-size imbalance study."""

import numpy as np
import pytest
from scipy import stats

from arcanesim.evs import evs_load_imbalance
from arcanesim.hashing import combine, derive_seed, mix64, mix64_np, uplinks_for_evs


class TestMix:
    def test_scalar_and_vector_agree(self):
        xs = np.array([0, 1, 2, 12345, 2**63, 2**64 - 1], dtype=np.uint64)
        vec = mix64_np(xs)
        for x, v in zip(xs.tolist(), vec.tolist()):
            assert mix64(int(x)) == int(v)

    def test_combine_is_order_sensitive(self):
        assert combine(1, 10, 20) != combine(1, 20, 10)

    def test_combine_deterministic(self):
        assert combine(99, 1, 2, 3) == combine(99, 1, 2, 3)

    def test_derive_seed_distinguishes_tags(self):
        s = {derive_seed(7, "lb", i) for i in range(100)}
        assert len(s) == 100
        assert derive_seed(7, "red", 0) != derive_seed(7, "lb", 0)

    def test_uplinks_matrix_matches_scalar_combine(self):
        headers = np.array([123456789, 987654321], dtype=np.uint64)
        ports = uplinks_for_evs(headers, 16, 5, seed=42)
        for f, h in enumerate(headers.tolist()):
            for ev in range(16):
                assert ports[f, ev] == combine(42, int(h), ev) % 5

    def test_avalanche_uniformity_chi_square(self):
        # One flow's 2^16 EVs over 32 ports should look multinomial-uniform.
        ports = uplinks_for_evs(np.array([0xDEADBEEF], dtype=np.uint64), 2**16, 32, seed=9)
        counts = np.bincount(ports.ravel(), minlength=32)
        res = stats.chisquare(counts)
        assert res.pvalue > 1e-4


class TestImbalance:
    def test_single_uplink_is_always_balanced(self):
        s = evs_load_imbalance(4, 64, 1, hash_seed=1, trials=20, rng=np.random.default_rng(0))
        assert (s.samples == 0.0).all()
        assert s.mean == 0.0

    def test_small_evs_worse_than_large(self):
        rng = np.random.default_rng(1)
        small = evs_load_imbalance(8, 2**5, 16, hash_seed=2, trials=60, rng=rng)
        large = evs_load_imbalance(8, 2**12, 16, hash_seed=2, trials=60, rng=rng)
        assert small.mean > large.mean

    def test_fewer_flows_worse_at_same_evs(self):
        rng = np.random.default_rng(2)
        one = evs_load_imbalance(1, 2**8, 16, hash_seed=3, trials=60, rng=rng)
        many = evs_load_imbalance(16, 2**8, 16, hash_seed=3, trials=60, rng=rng)
        assert one.mean > many.mean

    def test_quantiles_ordered(self):
        s = evs_load_imbalance(4, 2**6, 8, hash_seed=4, trials=100, rng=np.random.default_rng(3))
        assert s.quantile(0.1) <= s.quantile(0.5) <= s.quantile(0.9)

    def test_validation(self):
        with pytest.raises(ValueError):
            evs_load_imbalance(0, 8, 4, 1, 5, np.random.default_rng(0))
        with pytest.raises(ValueError):
            evs_load_imbalance(2, 8, 0, 1, 5, np.random.default_rng(0))
