import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elminr.spectral import barron_energy, frequency_indices

from oracles import centered_range, direct_energy, direct_energy_fast


@pytest.mark.parametrize("shape", [(4, 4), (7, 3), (16, 16), (5,)])
@pytest.mark.parametrize("c", [0.0, 0.37, -12.5])
def test_constant_patch_is_zero(shape, c):
    assert barron_energy(np.full(shape, c), channel_axis=None) == 0.0


def test_cosine_patch_matches_direct_sum():
    n = 16
    x = np.arange(n)
    patch = np.cos(2 * np.pi * 3 * x / n)[:, None] * np.ones(n)[None, :]
    expected = direct_energy(patch[..., None])
    # |F| = sqrt(256) / 2 = 8 at k = (+-3, 0), weight 3 each
    assert expected == pytest.approx(48.0, rel=1e-12)
    assert barron_energy(patch, channel_axis=None) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("n", [1, 2, 5, 8, 9, 16])
def test_frequency_indices_centered(n):
    assert sorted(frequency_indices(n)) == list(centered_range(n))


def test_matches_direct_sum_small_patches(rng):
    for shape in [(3, 4, 1), (5, 5, 2), (6, 3, 1), (2, 7, 3), (4, 4, 1)]:
        p = rng.normal(size=shape)
        assert barron_energy(p) == pytest.approx(direct_energy(p), rel=1e-9)


def test_masked_matches_direct_sum(rng):
    p = rng.normal(size=(6, 5, 2))
    mask = np.zeros((6, 5), bool)
    mask[:3, :] = True
    mask[3:, :2] = True
    assert barron_energy(p, mask=mask) == pytest.approx(direct_energy(p, mask), rel=1e-9)


def test_masked_region_ignores_outside_values(rng):
    p = rng.normal(size=(8, 8, 1))
    mask = np.zeros((8, 8), bool)
    mask[:, :4] = True
    q = p.copy()
    q[:, 4:] = 1e3
    assert barron_energy(p, mask=mask) == barron_energy(q, mask=mask)


def test_three_dimensional_patch(rng):
    p = rng.normal(size=(3, 4, 5, 1))
    assert barron_energy(p) == pytest.approx(direct_energy(p), rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(-50, 50), st.integers(0, 2**32 - 1))
def test_homogeneity(h, w, c, seed):
    p = np.random.default_rng(seed).normal(size=(h, w, 1))
    base = barron_energy(p)
    assert barron_energy(c * p) == pytest.approx(abs(c) * base, rel=1e-12, abs=1e-300)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.floats(-100, 100), st.integers(0, 2**32 - 1))
def test_mean_shift_invariance(h, w, shift, seed):
    p = np.random.default_rng(seed).normal(size=(h, w, 1))
    assert abs(barron_energy(p + shift) - barron_energy(p)) <= 1e-12 * max(1.0, barron_energy(p)) * 10


def test_periodic_translation_invariance(rng):
    p = rng.normal(size=(8, 12, 1))
    for shift in [(1, 0), (3, 5), (7, 11)]:
        q = np.roll(p, shift, axis=(0, 1))
        assert barron_energy(q) == pytest.approx(barron_energy(p), rel=1e-10)


def test_zero_iff_constant_per_channel(rng):
    p = np.zeros((4, 4, 2))
    p[..., 0] = 3.0
    assert barron_energy(p) == 0.0
    p[0, 0, 1] = 1.0
    assert barron_energy(p) > 0


def test_multichannel_sums_channels(rng):
    p = rng.normal(size=(6, 6, 3))
    total = sum(barron_energy(p[..., c], channel_axis=None) for c in range(3))
    assert barron_energy(p) == pytest.approx(total, rel=1e-12)


def test_errors():
    with pytest.raises(ValueError, match="empty"):
        barron_energy(np.zeros((0, 4, 1)))
    with pytest.raises(ValueError, match="mask shape"):
        barron_energy(np.zeros((4, 4, 1)), mask=np.ones((4, 3), bool))
    with pytest.raises(ValueError, match="empty"):
        barron_energy(np.zeros((4, 4, 1)), mask=np.zeros((4, 4), bool))


def test_toy_field_tiles_match_oracle():
    x = np.linspace(0, 1, 256)
    x1, x2 = np.meshgrid(x, x, indexing="xy")
    f = np.sin(2 * np.pi * 4 * x1**3) * np.sin(np.pi * x2)
    for i, j in [(0, 0), (3, 4), (7, 7), (2, 6)]:
        tile = f[32 * i : 32 * (i + 1), 32 * j : 32 * (j + 1), None]
        assert barron_energy(tile) == pytest.approx(direct_energy_fast(tile), rel=1e-9)
