"""The generator must match the published splitmix64 outputs and its
vectorized path must reproduce the scalar stream exactly."""

from __future__ import annotations

import numpy as np
import pytest

from fusionbench.rng import SplitMix64, derive_seed

# Published splitmix64 reference outputs for these seeds.
REFERENCE_SEED_0 = [
    0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F,
    0xF88BB8A8724C81EC, 0x1B39896A51A8749B,
]
REFERENCE_SEED_1234567 = [
    0x599ED017FB08FC85, 0x2C73F08458540FA5, 0x883EBCE5A3F27C77,
    0x3FBEF740E9177B3F, 0xE3B8346708CB5ECD,
]


@pytest.mark.parametrize("seed,expected", [
    (0, REFERENCE_SEED_0),
    (1234567, REFERENCE_SEED_1234567),
])
def test_published_reference_outputs(seed, expected):
    rng = SplitMix64(seed)
    assert [rng.next_u64() for _ in range(5)] == expected


@pytest.mark.parametrize("seed", [0, 1, 42, 2**64 - 1, 0xDEADBEEF])
def test_vectorized_matches_scalar(seed):
    scalar = SplitMix64(seed)
    vector = SplitMix64(seed)
    expected = [scalar.next_u64() for _ in range(100)]
    got = vector.u64_array(100).tolist()
    assert got == expected


def test_vectorized_interleaves_with_scalar():
    a = SplitMix64(9)
    b = SplitMix64(9)
    stream_a = [a.next_u64() for _ in range(10)]
    stream_b = b.u64_array(3).tolist()
    stream_b.append(b.next_u64())
    stream_b += b.u64_array(6).tolist()
    assert stream_b == stream_a


def test_seed_wraps_to_64_bits():
    assert SplitMix64(2**64 + 5).next_u64() == SplitMix64(5).next_u64()


def test_doubles_range_and_determinism():
    rng = SplitMix64(42)
    values = rng.doubles(10_000)
    assert np.all(values >= 0.0) and np.all(values < 1.0)
    again = SplitMix64(42).doubles(10_000)
    assert np.array_equal(values, again)
    # Frozen regression anchor for the 53-bit conversion.
    assert SplitMix64(42).doubles(2).tolist() == [
        0.7415648787718233, 0.1599103928769201]


def test_doubles_match_scalar_next_double():
    rng_a = SplitMix64(3)
    rng_b = SplitMix64(3)
    assert rng_a.doubles(50).tolist() == [rng_b.next_double() for _ in range(50)]


def test_uniform_bounds():
    values = SplitMix64(5).uniform(-2.5, 1.5, 10_000)
    assert np.all(values >= -2.5) and np.all(values < 1.5)
    assert abs(values.mean() - (-0.5)) < 0.05


def test_next_below_range_and_rejection():
    rng = SplitMix64(17)
    draws = [rng.next_below(7) for _ in range(5000)]
    assert set(draws) == set(range(7))
    counts = np.bincount(draws, minlength=7)
    # Loose uniformity: each bucket within 20% of the expected 5000/7.
    assert np.all(np.abs(counts - 5000 / 7) < 0.2 * 5000 / 7)


def test_next_below_invalid_bound():
    with pytest.raises(ValueError):
        SplitMix64(1).next_below(0)


def test_shuffle_is_permutation_and_deterministic():
    items = list(range(100))
    rng = SplitMix64(1001)
    rng.shuffle(items)
    assert sorted(items) == list(range(100))
    items2 = list(range(100))
    SplitMix64(1001).shuffle(items2)
    assert items2 == items
    items3 = list(range(100))
    SplitMix64(1002).shuffle(items3)
    assert items3 != items


def test_shuffle_reaches_all_permutations():
    seen = set()
    for seed in range(600):
        items = [0, 1, 2, 3]
        SplitMix64(seed).shuffle(items)
        seen.add(tuple(items))
    assert len(seen) == 24


def test_normals_moments_and_determinism():
    values = SplitMix64(8).normals(100_000)
    assert np.isfinite(values).all()
    assert abs(values.mean()) < 0.02
    assert abs(values.var() - 1.0) < 0.02
    assert np.array_equal(values, SplitMix64(8).normals(100_000))


def test_normals_odd_count():
    assert SplitMix64(4).normals(7).shape == (7,)
    # Odd requests still consume whole pairs, truncating the last draw.
    assert np.array_equal(SplitMix64(4).normals(7),
                          SplitMix64(4).normals(8)[:7])


def test_bernoulli_keep_fraction():
    for seed in (1, 2, 3):
        mask = SplitMix64(seed).bernoulli(100_000, 0.8)
        assert set(np.unique(mask)) <= {0.0, 1.0}
        assert abs(mask.mean() - 0.8) < 0.005


def test_bernoulli_rejects_bad_probability():
    with pytest.raises(ValueError):
        SplitMix64(1).bernoulli(10, 1.5)


def test_derive_seed_is_order_sensitive_and_stable():
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)
    assert derive_seed(0, 1) != derive_seed(1, 0)
    assert derive_seed(3, 4) == derive_seed(3, 4)
    # Frozen anchors: changing these breaks split/run reproducibility.
    assert derive_seed(0, 1) == 0x2A98F501AF37E97F
    assert derive_seed(0, 1, 2) == 0xF4F373571B7FEB84
    assert derive_seed(0, 2, 1) == 0xC8315586CA169443


def test_derive_seed_children_are_distinct():
    children = {derive_seed(123, tag) for tag in range(200)}
    assert len(children) == 200
