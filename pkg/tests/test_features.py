import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from eegpaint.errors import AsymmetricInput, BandOutOfRange, NegativeWeight, TooShort
from eegpaint.features import (
    DEFAULT_BANDS, DE_FLOOR, BandDef, band_power, default_montage, diff_entropy, extract_features,
    normalized_adjacency, periodogram,
)
from eegpaint.ingest import EegEpoch, synth_epoch
from eegpaint.labels import EmotionLabel
from eegpaint.rng import Pcg32


def sine(f=10.0, rate=250.0, n=1024, amp=1.0):
    return amp * np.sin(2 * np.pi * f * np.arange(n) / rate)


def test_periodogram_zero_and_short():
    _, psd = periodogram(np.zeros(64), 250)
    assert np.all(psd == 0)
    with pytest.raises(TooShort):
        periodogram(np.zeros(8), 250)


def test_sine_mass():
    f, psd = periodogram(sine(), 250.0)
    df = f[1] - f[0]
    total = psd.sum() * df
    assert total == pytest.approx(0.5, rel=0.05)
    inside = psd[(f >= 9) & (f <= 11)].sum() * df
    assert inside / total >= 0.95
    alpha = band_power(f, psd, DEFAULT_BANDS[2])
    assert alpha / total >= 0.95


def test_parseval_noise():
    for seed in range(20):
        x = Pcg32(seed).normal(0, 1.5, 2048)
        f, psd = periodogram(x, 250.0)
        assert psd.sum() * (f[1] - f[0]) == pytest.approx(np.var(x), rel=0.10)


def test_band_partition():
    x = Pcg32(3).normal(0, 1, 1000)
    f, psd = periodogram(x, 250.0)
    parts = sum(band_power(f, psd, b) for b in DEFAULT_BANDS)
    whole = band_power(f, psd, BandDef("all", 1.0, 50.0))
    assert parts == pytest.approx(whole, rel=1e-12)
    assert band_power(f, np.zeros_like(psd), DEFAULT_BANDS[0]) == 0
    with pytest.raises(BandOutOfRange):
        band_power(f, psd, BandDef("hi", 100.0, 200.0))


def test_diff_entropy_values():
    x = np.tile([1.0, -1.0], 50)  # population variance exactly 1
    assert diff_entropy(x) == pytest.approx(0.5 * math.log(2 * math.pi * math.e), abs=1e-12)
    assert diff_entropy(x) == pytest.approx(1.418939, abs=1e-6)
    assert diff_entropy(2 * x) - diff_entropy(x) == pytest.approx(math.log(2), abs=1e-12)
    c = diff_entropy(np.full(32, 3.0))
    assert c == pytest.approx(0.5 * math.log(2 * math.pi * math.e * DE_FLOOR))
    with pytest.raises(TooShort):
        diff_entropy(np.zeros(10))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 64, elements=st.floats(-100, 100)), st.floats(-1e3, 1e3))
def test_diff_entropy_shift_invariant(x, c):
    if np.var(x) < 1e-6:
        return
    assert diff_entropy(x + c) == pytest.approx(diff_entropy(x), abs=1e-6)


def test_diff_entropy_gaussian():
    x = Pcg32(8).normal(0, 2, 10_000)
    expect = 0.5 * math.log(2 * math.pi * math.e * 4)
    assert abs(diff_entropy(x) - expect) / expect < 0.02


def test_extract_features_shape_and_structure():
    ep = synth_epoch(EmotionLabel.SADNESS, 12)
    feats = extract_features(ep)
    assert feats.shape == (8, 5) and np.all(np.isfinite(feats))
    assert int(np.argmax(feats.mean(axis=0))) == 2  # alpha
    perm = np.array([3, 1, 7, 0, 2, 6, 5, 4])
    permuted = extract_features(EegEpoch(ep.data[perm], ep.rate_hz))
    np.testing.assert_allclose(permuted, feats[perm], atol=1e-12)
    scaled = extract_features(EegEpoch(ep.data * 3, ep.rate_hz))
    np.testing.assert_allclose(scaled - feats, math.log(3), atol=1e-9)
    assert np.array_equal(extract_features(ep), feats)


def test_normalized_adjacency():
    np.testing.assert_allclose(normalized_adjacency(np.zeros((4, 4))), np.eye(4))
    full = np.ones((8, 8)) - np.eye(8)
    np.testing.assert_allclose(normalized_adjacency(full), np.full((8, 8), 1 / 8))
    with pytest.raises(AsymmetricInput):
        normalized_adjacency(np.triu(np.ones((3, 3)), 1))
    with pytest.raises(NegativeWeight):
        normalized_adjacency(-full)


def test_normalized_adjacency_spectrum():
    rng = Pcg32(5)
    for _ in range(30):
        n = int(rng.integers(2, 12))
        a = rng.random((n, n))
        a = np.triu(a, 1)
        a = a + a.T
        ah = normalized_adjacency(a)
        np.testing.assert_allclose(ah, ah.T, atol=1e-14)
        ev = np.linalg.eigvalsh(ah)
        assert ev.min() >= -1 - 1e-6 and ev.max() <= 1 + 1e-6


def test_default_montage():
    m = default_montage()
    a = m.adjacency
    assert a.shape == (8, 8)
    np.testing.assert_array_equal(a, a.T)
    off = a[~np.eye(8, dtype=bool)]
    assert np.all((off > 0) & (off <= 1))
    d = np.linalg.norm(m.positions[:, None] - m.positions[None], axis=-1) + np.eye(8) * 9
    i, j = np.unravel_index(np.argmin(d), d.shape)
    assert a[i, j] == pytest.approx(a.max())
    assert np.array_equal(default_montage().adjacency, a)
    assert m.names == ("Fp1", "Fp2", "C3", "C4", "P7", "P8", "O1", "O2")
    other = default_montage(14)
    assert other.adjacency.shape == (14, 14) and np.all(np.diag(other.adjacency) == 0)
