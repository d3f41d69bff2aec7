import math
from collections import deque

import numpy as np
import pytest

from eegpaint import autodiff as ad
from eegpaint.cgan import (
    AdaState, GanConfig, PaintingSet, ada_update, augment, d_forward, g_forward, gan_losses, generate_painting,
    init_discriminator, init_generator, latent_bank, train_gan,
)
from eegpaint.errors import ClassMissing, EncoderMismatch, ShapeMismatch
from eegpaint.imaging import synth_painting
from eegpaint.labels import EmotionLabel as E
from eegpaint.rng import Pcg32


def paintings(n=16, skip=None):
    labels = np.array([c for c in np.arange(n) % 4 if c != skip])
    return PaintingSet(np.stack([synth_painting(int(c), 40 + i) for i, c in enumerate(labels)]), labels)


def test_generator_bounds_and_determinism(rng):
    g = init_generator(16)
    z = rng.normal(0, 30, (5, 64))
    e = rng.normal(0, 30, (5, 16))
    out = g_forward(z, e, g)
    assert out.shape == (5, 3, 32, 32)
    assert out.min() >= -1 and out.max() <= 1
    assert np.array_equal(g_forward(z[0], e[0], g), g_forward(z[0], e[0], g))
    with pytest.raises(ShapeMismatch):
        g_forward(np.zeros(63), np.zeros(16), g)


def test_discriminator():
    d = init_discriminator()
    img = Pcg32(2).uniform(-1, 1, (3, 32, 32))
    zero = init_discriminator()
    zero.params = {k: np.zeros_like(v) for k, v in zero.params.items()}
    assert d_forward(img, E.ANGER, zero) == 0.0
    logits = [d_forward(img, c, d) for c in E]
    assert len(set(logits)) == 4
    for v in (-1.0, 1.0):
        assert math.isfinite(d_forward(np.full((3, 32, 32), v), E.FEAR, d))
    with pytest.raises(ShapeMismatch):
        d_forward(np.zeros((3, 16, 16)), 0, d)


def test_gan_losses():
    ld, lg = gan_losses(np.zeros(4), np.zeros(4))
    assert ld.item() == pytest.approx(2 * math.log(2), abs=1e-9)
    assert lg.item() == pytest.approx(math.log(2), abs=1e-9)
    ld, _ = gan_losses(np.full(4, 100.0), np.full(4, -100.0))
    assert ld.item() < 1e-40
    gs = [gan_losses(np.zeros(2), np.full(2, f))[1].item() for f in (-2.0, 0.0, 2.0)]
    assert gs[0] > gs[1] > gs[2]


def test_augment(rng):
    imgs = rng.uniform(-1, 1, (50, 3, 32, 32))
    assert np.array_equal(augment(imgs, 0.0, Pcg32(1)), imgs)
    out = augment(imgs, 1.0, Pcg32(2))
    assert out.min() >= -1 and out.max() <= 1
    many = rng.uniform(-1, 1, (1000, 3, 8, 8))
    changed = np.any(augment(many, 1.0, Pcg32(3)) != many, axis=(1, 2, 3)).mean()
    assert changed >= 0.95
    single = augment(imgs[0], 1.0, Pcg32(4))
    assert single.shape == (3, 32, 32)
    with pytest.raises(ValueError):
        augment(imgs, 1.5, Pcg32(1))


def test_ada_rules():
    s = AdaState()
    s2 = ada_update(s, np.ones(8))
    assert s2.p == pytest.approx(0.01) and s.p == 0.0
    top = ada_update(AdaState(p=1.0), np.ones(8))
    assert top.p == 1.0
    at = AdaState(p=0.5, target=0.0)
    assert ada_update(at, np.array([1.0, -1.0])).p == 0.5


def test_ada_reaches_one_in_100():
    s = AdaState()
    s = ada_update(s, np.ones(64))  # saturate the window
    s = AdaState(p=0.0, window=s.window)
    ps = []
    for _ in range(100):
        s = ada_update(s, np.ones(1))
        ps.append(s.p)
    assert ps[-1] == 1.0 and ps[-2] < 1.0


def test_ada_low_r_decays():
    s = AdaState(p=0.3)
    for _ in range(100):
        s = ada_update(s, -np.ones(4))
    assert s.p == 0.0


def test_train_errors(small_dataset, small_encoder):
    with pytest.raises(ClassMissing):
        train_gan(paintings(skip=0), small_dataset, small_encoder, GanConfig(steps=1, batch=2, report_every=0))
    with pytest.raises(EncoderMismatch):
        train_gan(paintings(), small_dataset, small_encoder, GanConfig(steps=1, batch=2, report_every=0),
                  generator=init_generator(12))


def test_train_deterministic(small_dataset, small_encoder):
    cfg = GanConfig(steps=4, batch=4, report_every=2, report_samples=2)
    _, _, a = train_gan(paintings(), small_dataset, small_encoder, cfg)
    _, _, b = train_gan(paintings(), small_dataset, small_encoder, cfg)
    assert a.d_losses == b.d_losses and a.g_losses == b.g_losses
    assert len(a.d_losses) == len(a.g_losses) == len(a.p_trajectory) == 4
    assert [c["step"] for c in a.color_checkpoints] == [2, 4]


def test_generate_painting(small_dataset, small_encoder, tiny_generator):
    g, _ = tiny_generator
    ep = small_dataset.epochs[0]
    a = generate_painting(ep, small_encoder, g, 5, 5)
    b = generate_painting(ep, small_encoder, g, 5, 5)
    assert len(a) == 5 and all(np.array_equal(x, y) for x, y in zip(a, b))
    assert a[0].shape == (32, 32, 3) and a[0].min() >= 0 and a[0].max() <= 1
    for i in range(5):
        for j in range(i + 1, 5):
            assert np.max(np.abs(a[i] - a[j])) > 1e-4
    assert generate_painting(ep, small_encoder, g, 5, 0) == []
    with pytest.raises(EncoderMismatch):
        generate_painting(ep, small_encoder, init_generator(12), 1, 1)


def test_latent_changes_image(small_dataset, small_encoder, tiny_generator):
    g, _ = tiny_generator
    bank = latent_bank(small_dataset, small_encoder)
    z = Pcg32(3).normal(0, 1, 64)
    a = g_forward(z, bank[int(E.SADNESS)][0], g)
    b = g_forward(z, bank[int(E.ANGER)][0], g)
    assert np.max(np.abs(a - b)) > 1e-3
