"""Class-conditional GAN driven by the EEG emotion latent.

Generator: ``concat(z, standardised latent) -> dense (128x4x4) -> 3 x
conv_transpose(4x4, stride 2) -> tanh``, producing 3x32x32 images in
[-1, 1].  Discriminator: three 4x4 stride-2 convolutions to a 2048-d feature
``h``; ``logit = h . w + b + <E[y], h>`` (projection conditioning on the
label).  Training uses the non-saturating softplus losses and a reduced
adaptive augmentation (flip, integer shift, brightness) whose probability
follows the sign of recent real logits.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .encoder import EncoderModel, encode_epochs
from .errors import ClassMissing, EncoderMismatch, ShapeMismatch
from .imaging import color_stats, range_convert
from .ingest import EegDataset, EegEpoch
from .labels import NUM_CLASSES, EmotionLabel
from .rng import Pcg32, derive_seed

log = logging.getLogger(__name__)

BASE_CHANNELS = 128
IMAGE_SIZE = 32
G_CHANNELS = (BASE_CHANNELS, 64, 32, 3)
D_CHANNELS = (3, 32, 64, 128)
FEATURE_DIM = D_CHANNELS[-1] * 4 * 4
KERNEL = 4


@dataclass
class GeneratorModel:
    params: dict
    noise_dim: int
    latent_mean: np.ndarray
    latent_scale: np.ndarray

    def __post_init__(self):
        fan = self.params["fc_w"].shape[0]
        if fan != self.noise_dim + self.latent_dim:
            raise ShapeMismatch("fc_w rows must equal noise_dim + latent_dim")

    @property
    def latent_dim(self) -> int:
        return self.latent_mean.shape[0]


@dataclass
class DiscriminatorModel:
    params: dict


@dataclass
class GanConfig:
    noise_dim: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch: int = 32
    steps: int = 3000
    ada_target: float = 0.6
    ada_step: float = 0.01
    ada_window: int = 64
    seed: int = 0
    report_every: int = 500
    report_samples: int = 16


@dataclass
class AdaState:
    p: float = 0.0
    target: float = 0.6
    step: float = 0.01
    window: deque = field(default_factory=lambda: deque(maxlen=64))

    @property
    def r(self) -> float:
        return float(np.mean(self.window)) if self.window else 0.0


@dataclass
class GanReport:
    d_losses: list[float] = field(default_factory=list)
    g_losses: list[float] = field(default_factory=list)
    p_trajectory: list[float] = field(default_factory=list)
    color_checkpoints: list[dict] = field(default_factory=list)


@dataclass
class PaintingSet:
    """Training paintings as ``(N, H, W, 3)`` floats in [0, 1] with integer labels."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or self.images.shape[-1] != 3 or len(self.images) != len(self.labels):
            raise ShapeMismatch("paintings must be (N, H, W, 3) with one label each")

    def __len__(self):
        return len(self.labels)


# --------------------------------------------------------------------------
# models
# --------------------------------------------------------------------------

def init_generator(latent_dim: int, noise_dim: int = 64, seed: int = 0,
                   latent_mean=None, latent_scale=None, dtype=np.float32) -> GeneratorModel:
    rng = Pcg32(seed, stream=11)
    fan = noise_dim + latent_dim
    p = {
        "fc_w": ad.he_normal(rng, (fan, BASE_CHANNELS * 16), fan, dtype),
        "fc_b": np.zeros(BASE_CHANNELS * 16, dtype=dtype),
    }
    for i in range(3):
        cin, cout = G_CHANNELS[i], G_CHANNELS[i + 1]
        # each output pixel of a stride-2 transpose sees cin * (4/2)^2 inputs
        p[f"up{i + 1}_w"] = ad.he_normal(rng, (cin, cout, KERNEL, KERNEL), cin * KERNEL * KERNEL / 4, dtype)
        p[f"up{i + 1}_b"] = np.zeros(cout, dtype=dtype)
    mean = np.zeros(latent_dim, dtype=dtype) if latent_mean is None else np.asarray(latent_mean, dtype=dtype)
    scale = np.ones(latent_dim, dtype=dtype) if latent_scale is None else np.asarray(latent_scale, dtype=dtype)
    return GeneratorModel(p, noise_dim, mean, scale)


def init_discriminator(seed: int = 0, dtype=np.float32) -> DiscriminatorModel:
    rng = Pcg32(seed, stream=12)
    p = {}
    for i in range(3):
        cin, cout = D_CHANNELS[i], D_CHANNELS[i + 1]
        p[f"c{i + 1}_w"] = ad.he_normal(rng, (cout, cin, KERNEL, KERNEL), cin * KERNEL * KERNEL, dtype)
        p[f"c{i + 1}_b"] = np.zeros(cout, dtype=dtype)
    p["fc_w"] = ad.he_normal(rng, (FEATURE_DIM, 1), FEATURE_DIM, dtype)
    p["fc_b"] = np.zeros(1, dtype=dtype)
    p["embed"] = ad.he_normal(rng, (NUM_CLASSES, FEATURE_DIM), FEATURE_DIM, dtype)
    return DiscriminatorModel(p)


def g_forward_t(p: dict, z, e) -> ad.Tensor:
    """Tensor forward pass: ``z (N, Dz)``, standardised ``e (N, L)`` -> ``(N, 3, 32, 32)``."""
    x = ad.concat([ad.as_tensor(z), ad.as_tensor(e)], axis=1)
    n = x.shape[0]
    h = ad.bias_add(ad.matmul(x, p["fc_w"]), p["fc_b"])
    h = ad.leaky_relu(ad.reshape(h, (n, BASE_CHANNELS, 4, 4)))
    for i in (1, 2, 3):
        h = ad.bias_add(ad.conv_transpose2d(h, p[f"up{i}_w"], stride=2, pad=1), p[f"up{i}_b"])
        h = ad.tanh(h) if i == 3 else ad.leaky_relu(h)
    return h


def d_forward_t(p: dict, x, labels) -> ad.Tensor:
    """Tensor forward pass: ``x (N, 3, 32, 32)`` and integer labels -> ``(N,)`` logits."""
    x = ad.as_tensor(x)
    labels = np.asarray(labels, dtype=np.int64)
    h = x
    for i in (1, 2, 3):
        h = ad.leaky_relu(ad.bias_add(ad.conv2d(h, p[f"c{i}_w"], stride=2, pad=1), p[f"c{i}_b"]))
    n = x.shape[0]
    h = ad.reshape(h, (n, FEATURE_DIM))
    onehot = np.zeros((n, NUM_CLASSES), dtype=x.dtype)
    onehot[np.arange(n), labels] = 1
    proj = ad.sum(ad.mul(h, ad.matmul(ad.Tensor(onehot), p["embed"])), axis=1)
    base = ad.reshape(ad.bias_add(ad.matmul(h, p["fc_w"]), p["fc_b"]), (n,))
    return ad.add(base, proj)


def _const(params: dict) -> dict:
    return {k: ad.Tensor(v) for k, v in params.items()}


def standardize_latent(e, model: GeneratorModel) -> np.ndarray:
    return ((np.asarray(e) - model.latent_mean) / model.latent_scale).astype(model.params["fc_w"].dtype)


def g_forward(z, e, model: GeneratorModel) -> np.ndarray:
    """Image(s) in [-1, 1] with shape ``(3, 32, 32)`` (or ``(N, 3, 32, 32)`` for batches)."""
    z = np.asarray(z)
    e = np.asarray(e)
    single = z.ndim == 1
    z2, e2 = np.atleast_2d(z), np.atleast_2d(e)
    if z2.shape[1] != model.noise_dim or e2.shape[1] != model.latent_dim or len(z2) != len(e2):
        raise ShapeMismatch(
            f"generator expects noise {model.noise_dim} and latent {model.latent_dim}, got {z2.shape} / {e2.shape}"
        )
    dtype = model.params["fc_w"].dtype
    out = g_forward_t(_const(model.params), z2.astype(dtype), standardize_latent(e2, model)).data
    return out[0] if single else out


def d_forward(image, label, model: DiscriminatorModel):
    """Logit for one ``(3, 32, 32)`` image (or a batch with a label array)."""
    x = np.asarray(image)
    single = x.ndim == 3
    if single:
        x = x[None]
    if x.shape[1:] != (3, IMAGE_SIZE, IMAGE_SIZE):
        raise ShapeMismatch(f"discriminator expects (3, {IMAGE_SIZE}, {IMAGE_SIZE}) images, got {x.shape[1:]}")
    labels = np.atleast_1d(np.asarray([int(label)] if single else label, dtype=np.int64))
    dtype = model.params["fc_w"].dtype
    out = d_forward_t(_const(model.params), x.astype(dtype), labels).data
    return float(out[0]) if single else out


def gan_losses(real_logits, fake_logits):
    """Non-saturating losses ``(L_D, L_G)`` as tensors."""
    real, fake = ad.as_tensor(real_logits), ad.as_tensor(fake_logits)
    loss_d = ad.add(ad.mean(ad.softplus(ad.mul(real, -1.0))), ad.mean(ad.softplus(fake)))
    loss_g = ad.mean(ad.softplus(ad.mul(fake, -1.0)))
    return loss_d, loss_g


# --------------------------------------------------------------------------
# adaptive augmentation
# --------------------------------------------------------------------------

MAX_SHIFT = 4
MAX_BRIGHTNESS = 0.2


@dataclass
class AugmentParams:
    apply: np.ndarray
    flip: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    brightness: np.ndarray


def sample_augment(n: int, p: float, rng: Pcg32) -> AugmentParams:
    """Five draws per image, always consumed: apply, flip, dx, dy, brightness."""
    u = rng.random((n, 5))
    apply = u[:, 0] < p
    flip = apply & (u[:, 1] < 0.5)
    span = 2 * MAX_SHIFT + 1
    dx = np.where(apply, np.floor(u[:, 2] * span).astype(np.int64) - MAX_SHIFT, 0)
    dy = np.where(apply, np.floor(u[:, 3] * span).astype(np.int64) - MAX_SHIFT, 0)
    bright = np.where(apply, (2 * u[:, 4] - 1) * MAX_BRIGHTNESS, 0.0)
    return AugmentParams(apply, flip, dx, dy, bright)


def _augment_index(ap: AugmentParams, shape) -> np.ndarray:
    n, c, h, w = shape
    rows = np.arange(h)[None, :] - ap.dy[:, None]              # (n, h)
    cols = np.arange(w)[None, :] - ap.dx[:, None]              # (n, w)
    cols = np.where(ap.flip[:, None], w - 1 - cols, cols)
    rows = np.clip(rows, 0, h - 1)
    cols = np.clip(cols, 0, w - 1)
    base = (np.arange(n)[:, None, None, None] * c + np.arange(c)[None, :, None, None]) * h * w
    return base + rows[:, None, :, None] * w + cols[:, None, None, :]


def augment_t(x, ap: AugmentParams) -> ad.Tensor:
    """Differentiable augmentation of an ``(N, C, H, W)`` batch in [-1, 1]."""
    x = ad.as_tensor(x)
    moved = ad.take(x, _augment_index(ap, x.shape))
    shift = np.broadcast_to(ap.brightness.astype(x.dtype)[:, None, None, None], x.shape).copy()
    return ad.clip(ad.add(moved, ad.Tensor(shift)), -1.0, 1.0)


def augment(image, p: float, rng: Pcg32) -> np.ndarray:
    """With probability ``p`` flip (prob 1/2), shift by up to 4 px with edge clamp, and
    shift brightness by up to 0.2; otherwise return the input unchanged.
    Accepts one ``(C, H, W)`` image or an ``(N, C, H, W)`` batch."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    x = np.asarray(image)
    single = x.ndim == 3
    batch = x[None] if single else x
    ap = sample_augment(len(batch), p, rng)
    out = np.where(ap.apply[:, None, None, None], augment_t(ad.Tensor(batch), ap).data, batch)
    return out[0] if single else out


def ada_update(state: AdaState, real_logits) -> AdaState:
    """Push ``sign(real_logits)`` into the window and nudge ``p`` toward the target.

    ``r`` is the mean of the (up to ``maxlen``) most recent signs; ``p`` moves
    up by ``step`` when ``r > target`` and down when ``r < target``, clamped
    to [0, 1].  Returns a new state.
    """
    window = deque(state.window, maxlen=state.window.maxlen)
    window.extend(np.sign(np.asarray(real_logits, dtype=np.float64)).ravel().tolist())
    r = float(np.mean(window)) if window else 0.0
    p = state.p
    if r > state.target:
        p = min(1.0, p + state.step)
    elif r < state.target:
        p = max(0.0, p - state.step)
    return replace(state, p=p, window=window)


# --------------------------------------------------------------------------
# training
# --------------------------------------------------------------------------

def _to_chw(images) -> np.ndarray:
    return range_convert(np.asarray(images), (0.0, 1.0), (-1.0, 1.0)).transpose(0, 3, 1, 2).astype(np.float32)


def latent_bank(eeg: EegDataset, encoder: EncoderModel) -> dict[int, np.ndarray]:
    latents = encode_epochs(list(eeg), encoder)
    labels = np.array([int(lab) for lab in eeg.labels])
    return {c: latents[labels == c] for c in range(NUM_CLASSES)}


def _draw_latents(bank: dict, labels: np.ndarray, rng: Pcg32) -> np.ndarray:
    u = rng.random(len(labels))
    return np.stack([bank[int(y)][int(np.floor(v * len(bank[int(y)])))] for y, v in zip(labels, u)])


def sample_class_images(generator: GeneratorModel, bank: dict, label, count: int, seed: int) -> np.ndarray:
    """``count`` images in [0, 1] (NHWC) conditioned on random latents of ``label``."""
    rng = Pcg32(seed, stream=21)
    labels = np.full(count, int(label))
    e = _draw_latents(bank, labels, rng)
    z = rng.normal(0.0, 1.0, (count, generator.noise_dim)).astype(np.float32)
    out = g_forward(z, e, generator)
    return range_convert(out.transpose(0, 2, 3, 1))


def _check_classes(labels, what: str):
    present = set(int(v) for v in labels)
    missing = [EmotionLabel(c).slug for c in range(NUM_CLASSES) if c not in present]
    if missing:
        raise ClassMissing(f"{what} lack class(es): {', '.join(missing)}")


def train_gan(paintings: PaintingSet, eeg: EegDataset, encoder: EncoderModel,
              config: GanConfig | None = None, generator: GeneratorModel | None = None):
    """Alternate one discriminator and one generator Adam step per iteration.

    Each real painting of class ``y`` is paired with the latent of a uniformly
    drawn EEG epoch of class ``y``; fakes are generated from those latents and
    scored by the discriminator against the same labels.  Augmentation with
    the current ADA probability is applied to every image the discriminator
    sees.
    """
    config = config or GanConfig()
    _check_classes(paintings.labels, "paintings")
    _check_classes(eeg.labels, "EEG epochs")
    bank = latent_bank(eeg, encoder)
    all_lat = np.concatenate([bank[c] for c in range(NUM_CLASSES)])
    if generator is None:
        generator = init_generator(
            encoder.latent_dim, config.noise_dim, config.seed,
            latent_mean=all_lat.mean(axis=0), latent_scale=all_lat.std(axis=0) + 1e-3,
        )
    elif generator.latent_dim != encoder.latent_dim:
        raise EncoderMismatch(f"generator latent {generator.latent_dim} != encoder latent {encoder.latent_dim}")
    disc = init_discriminator(config.seed)

    real_all = _to_chw(paintings.images)
    if real_all.shape[1:] != (3, IMAGE_SIZE, IMAGE_SIZE):
        raise ShapeMismatch(f"paintings must be {IMAGE_SIZE}x{IMAGE_SIZE}")
    labels_all = paintings.labels
    rng = Pcg32(config.seed, stream=13)
    g_state = ad.AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    d_state = ad.AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2)
    ada = AdaState(p=0.0, target=config.ada_target, step=config.ada_step, window=deque(maxlen=config.ada_window))
    gp, dp = dict(generator.params), dict(disc.params)
    report = GanReport()
    b = config.batch

    for step in range(config.steps):
        idx = rng.integers(0, len(labels_all), b)
        y = labels_all[idx]
        e = standardize_latent(_draw_latents(bank, y, rng), generator)
        z = rng.normal(0.0, 1.0, (b, config.noise_dim)).astype(np.float32)
        fake = g_forward_t(_const(gp), z, e).data
        ap_real = sample_augment(b, ada.p, rng)
        ap_fake = sample_augment(b, ada.p, rng)

        tape = ad.Tape()
        dv = {k: tape.variable(v) for k, v in dp.items()}
        real_logits = d_forward_t(dv, augment_t(ad.Tensor(real_all[idx]), ap_real), y)
        fake_logits = d_forward_t(dv, augment_t(ad.Tensor(fake), ap_fake), y)
        loss_d, _ = gan_losses(real_logits, fake_logits)
        grads = tape.backward(loss_d)
        dp, d_state = ad.adam_step(dp, {k: grads[v] for k, v in dv.items()}, d_state)
        ada = ada_update(ada, real_logits.data)

        z = rng.normal(0.0, 1.0, (b, config.noise_dim)).astype(np.float32)
        ap_gen = sample_augment(b, ada.p, rng)
        tape = ad.Tape()
        gv = {k: tape.variable(v) for k, v in gp.items()}
        fake_t = g_forward_t(gv, z, e)
        logits = d_forward_t(_const(dp), augment_t(fake_t, ap_gen), y)
        loss_g = ad.mean(ad.softplus(ad.mul(logits, -1.0)))
        grads = tape.backward(loss_g)
        gp, g_state = ad.adam_step(gp, {k: grads[v] for k, v in gv.items()}, g_state)

        report.d_losses.append(float(loss_d.data))
        report.g_losses.append(float(loss_g.data))
        report.p_trajectory.append(ada.p)
        done = step + 1
        if config.report_every and (done % config.report_every == 0 or done == config.steps):
            snap = replace(generator, params=gp)
            stats = {}
            for c in range(NUM_CLASSES):
                imgs = sample_class_images(snap, bank, c, config.report_samples, derive_seed(config.seed, c))
                cs = [color_stats(im) for im in imgs]
                stats[EmotionLabel(c).slug] = {
                    "coldness": float(np.mean([s.coldness for s in cs])),
                    "value": float(np.mean([s.value for s in cs])),
                }
            report.color_checkpoints.append({"step": done, "classes": stats})
            log.info("step %d  L_D %.4f  L_G %.4f  p %.2f", done, report.d_losses[-1], report.g_losses[-1], ada.p)

    return replace(generator, params=gp), DiscriminatorModel(dp), report


def generate_painting(epoch: EegEpoch, encoder: EncoderModel, generator: GeneratorModel,
                      seed: int, count: int) -> list[np.ndarray]:
    """Encode ``epoch`` once and map ``count`` seeded noise vectors to (H, W, 3) images in [0, 1]."""
    if generator.latent_dim != encoder.latent_dim:
        raise EncoderMismatch(f"generator latent {generator.latent_dim} != encoder latent {encoder.latent_dim}")
    if count <= 0:
        return []
    latent = encode_epochs([epoch], encoder)[0]
    rng = Pcg32(seed, stream=31)
    z = rng.normal(0.0, 1.0, (count, generator.noise_dim)).astype(np.float32)
    out = g_forward(z, np.repeat(latent[None], count, axis=0), generator)
    return [range_convert(img.transpose(1, 2, 0)) for img in out]
