import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screenkit.rng import MASK64, SplitMix64, derive_seed, hash_ints, mix64


def reference_splitmix64(seed: int, n: int) -> list[int]:
    """Textbook stateful SplitMix64: add the gamma, then finalize."""
    state = seed & MASK64
    out = []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        out.append(z ^ (z >> 31))
    return out


class TestSplitMix64:
    def test_published_first_output_for_seed_zero(self):
        assert SplitMix64(0).next_u64() == 0xE220A8397B1DCDAF

    @given(st.integers(min_value=-(2**70), max_value=2**70), st.integers(min_value=0, max_value=40))
    @settings(max_examples=200, deadline=None)
    def test_vectorized_matches_stateful_reference(self, seed, n):
        assert SplitMix64(seed).u64(n).tolist() == reference_splitmix64(seed, n)

    def test_blocks_concatenate(self):
        a = SplitMix64(9)
        b = SplitMix64(9)
        assert np.array_equal(np.concatenate([a.u64(3), a.u64(5)]), b.u64(8))

    def test_scalar_and_block_share_counter(self):
        a = SplitMix64(5)
        first = a.next_u64()
        rest = a.u64(2)
        assert [first, *rest.tolist()] == reference_splitmix64(5, 3)

    def test_random_in_unit_interval(self):
        u = SplitMix64(1).random(1_000_000)
        assert u.min() >= 0.0 and u.max() < 1.0
        # standard error of the mean is 0.00029; 0.002 is about 7 sigma
        assert abs(u.mean() - 0.5) < 0.002

    @given(st.integers(min_value=1, max_value=1000), st.integers(min_value=0, max_value=2**64 - 1))
    @settings(max_examples=100, deadline=None)
    def test_integers_within_bound(self, bound, seed):
        x = SplitMix64(seed).integers(bound, 50)
        assert x.min() >= 0 and x.max() < bound

    def test_integers_rejects_zero_bound(self):
        with pytest.raises(ValueError):
            SplitMix64(0).integers(0, 1)

    def test_normal_moments(self):
        z = SplitMix64(3).normal(100_001)
        assert z.size == 100_001
        assert abs(z.mean()) < 0.02
        assert abs(z.std() - 1.0) < 0.02

    def test_permutation_is_a_permutation(self):
        p = SplitMix64(4).permutation(100)
        assert sorted(p.tolist()) == list(range(100))
        assert p.tolist() != list(range(100))

    def test_permutation_of_items(self):
        items = np.array([10, 20, 30, 40])
        assert sorted(SplitMix64(2).permutation(items).tolist()) == [10, 20, 30, 40]


class TestHashing:
    def test_mix64_is_a_bijection_on_samples(self):
        xs = list(range(5000))
        assert len({mix64(x) for x in xs}) == len(xs)

    def test_hash_ints_order_dependent(self):
        assert hash_ints([1, 2]) != hash_ints([2, 1])

    def test_hash_ints_negative_values_wrap(self):
        assert hash_ints([-1]) == hash_ints([MASK64])

    def test_derive_seed_distinct_streams(self):
        seeds = {derive_seed(42, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert derive_seed(42, 1) != derive_seed(43, 1)
        assert derive_seed(42, 1, 2) != derive_seed(42, 2, 1)

    def test_derive_seed_deterministic(self):
        assert derive_seed(7, 3) == derive_seed(7, 3)
