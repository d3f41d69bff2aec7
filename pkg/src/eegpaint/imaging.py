"""Images as float ``(H, W, 3)`` arrays in [0, 1]: procedural paintings, colour
statistics, bicubic upscaling and PPM/PNG files."""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import BadFactor, BadSize, MalformedPpm
from .labels import EmotionLabel
from .rng import Pcg32

PAINTING_SIZES = (16, 32, 64)
UPSCALE_FACTORS = (2, 4, 8, 16)
CATMULL_ROM_A = -0.5


def check_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)) or img.min() < 0 or img.max() > 1:
        raise ValueError("image values must be finite and within [0, 1]")
    return img


# --------------------------------------------------------------------------
# colour statistics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ColorStats:
    mean_r: float
    mean_g: float
    mean_b: float
    coldness: float
    value: float
    saturation: float

    def as_vector(self) -> np.ndarray:
        return np.array([self.coldness, self.value, self.saturation])


def color_stats(image) -> ColorStats:
    """Channel means, coldness (mean blue - mean red), HSV value and saturation means.

    Saturation averages ``(max - min) / max`` over pixels whose max exceeds
    0.05; it is 0 when no pixel qualifies.
    """
    img = check_image(image)
    mean = img.reshape(-1, 3).mean(axis=0)
    mx = img.max(axis=2)
    mn = img.min(axis=2)
    lit = mx > 0.05
    sat = float(np.mean((mx[lit] - mn[lit]) / mx[lit])) if np.any(lit) else 0.0
    return ColorStats(
        mean_r=float(mean[0]),
        mean_g=float(mean[1]),
        mean_b=float(mean[2]),
        coldness=float(mean[2] - mean[0]),
        value=float(mx.mean()),
        saturation=sat,
    )


def range_convert(image, src=(-1.0, 1.0), dst=(0.0, 1.0)) -> np.ndarray:
    """Affine map from ``src`` to ``dst``; inputs are clamped to ``src`` first."""
    a = np.clip(np.asarray(image, dtype=np.float64), min(src), max(src))
    out = dst[0] + (a - src[0]) * (dst[1] - dst[0]) / (src[1] - src[0])
    return np.clip(out, min(dst), max(dst))


# --------------------------------------------------------------------------
# procedural paintings
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Palette:
    hues: tuple[tuple[float, float], ...]   # degrees; one interval is picked per colour
    saturation: tuple[float, float]
    value: tuple[float, float]
    blobs: tuple[int, int] = (3, 8)


PALETTES = {
    EmotionLabel.SADNESS: Palette(((195.0, 245.0),), (0.35, 0.75), (0.35, 0.75)),
    EmotionLabel.ANGER: Palette(((-20.0, 28.0),), (0.6, 0.95), (0.18, 0.48)),
    EmotionLabel.HAPPINESS: Palette(((45.0, 75.0), (80.0, 150.0)), (0.55, 0.9), (0.78, 1.0)),
}

# Fear draws one of these per image.
FEAR_MIXTURE = (
    Palette(((255.0, 300.0),), (0.2, 0.6), (0.12, 0.45)),   # bruised violet, dark
    Palette(((70.0, 110.0),), (0.3, 0.7), (0.25, 0.6)),     # sickly green
    Palette(((-10.0, 15.0),), (0.7, 0.95), (0.4, 0.8)),     # blood red
    Palette(((205.0, 240.0),), (0.6, 0.95), (0.4, 0.85)),   # cold night blue
    Palette(((0.0, 360.0),), (0.0, 0.15), (0.1, 0.85)),     # ash grey
)


def hsv_to_rgb(h, s, v) -> np.ndarray:
    """Vectorised HSV (hue in degrees) to RGB, all channels in [0, 1]."""
    h = np.mod(np.asarray(h, dtype=np.float64), 360.0) / 60.0
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    i = np.floor(h).astype(int) % 6
    f = h - np.floor(h)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    table = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)]
    out = np.zeros(np.broadcast(h, s, v).shape + (3,))
    for k, (r, g, b) in enumerate(table):
        m = i == k
        out[..., 0] = np.where(m, r, out[..., 0])
        out[..., 1] = np.where(m, g, out[..., 1])
        out[..., 2] = np.where(m, b, out[..., 2])
    return out


def _draw_color(pal: Palette, rng: Pcg32) -> np.ndarray:
    lo, hi = pal.hues[rng.integers(0, len(pal.hues))]
    h = rng.uniform(lo, hi)
    s = rng.uniform(*pal.saturation)
    v = rng.uniform(*pal.value)
    return hsv_to_rgb(h, s, v)


def synth_painting(label, seed: int, size: int = 32) -> np.ndarray:
    """Deterministic procedural "painting" in the palette of ``label``.

    A vertical gradient between two palette colours is overlaid with 3-8
    soft rotated elliptical blobs (Gaussian alpha falloff, opacity 0.5-0.9),
    each in another palette colour.  Fear first picks one palette from a
    five-way mixture per image.
    """
    if size not in PAINTING_SIZES:
        raise BadSize(f"size must be one of {PAINTING_SIZES}")
    label = EmotionLabel.parse(label)
    rng = Pcg32(seed, stream=3)
    if label == EmotionLabel.FEAR:
        pal = FEAR_MIXTURE[rng.integers(0, len(FEAR_MIXTURE))]
    else:
        pal = PALETTES[label]
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    top, bottom = _draw_color(pal, rng), _draw_color(pal, rng)
    tilt = rng.uniform(-0.3, 0.3)
    mix = np.clip(yy + tilt * (xx - 0.5), 0, 1)[..., None]
    img = top * (1 - mix) + bottom * mix
    n_blobs = rng.integers(pal.blobs[0], pal.blobs[1] + 1)
    for _ in range(n_blobs):
        cx, cy = rng.uniform(0, 1), rng.uniform(0, 1)
        rx, ry = rng.uniform(0.08, 0.35), rng.uniform(0.08, 0.35)
        ang = rng.uniform(0, math.pi)
        opacity = rng.uniform(0.5, 0.9)
        color = _draw_color(pal, rng)
        dx, dy = xx - cx, yy - cy
        u = (dx * math.cos(ang) + dy * math.sin(ang)) / rx
        v = (-dx * math.sin(ang) + dy * math.cos(ang)) / ry
        alpha = (opacity * np.exp(-(u * u + v * v)))[..., None]
        img = img * (1 - alpha) + color * alpha
    return np.clip(img, 0.0, 1.0)


# --------------------------------------------------------------------------
# bicubic upscaling
# --------------------------------------------------------------------------

def catmull_rom(d, a: float = CATMULL_ROM_A) -> np.ndarray:
    d = np.abs(np.asarray(d, dtype=np.float64))
    near = ((a + 2) * d - (a + 3)) * d * d + 1
    far = ((a * d - 5 * a) * d + 8 * a) * d - 4 * a
    return np.where(d <= 1, near, np.where(d < 2, far, 0.0))


def _taps(n_in: int, factor: int):
    out = np.arange(n_in * factor)
    x = (out + 0.5) / factor - 0.5
    x0 = np.floor(x)
    t = x - x0
    offsets = np.arange(-1, 3)
    idx = np.clip(x0[:, None].astype(np.int64) + offsets, 0, n_in - 1)
    w = catmull_rom(t[:, None] - offsets)
    return np.ascontiguousarray(idx), np.ascontiguousarray(w)


def bicubic_upscale(image, factor: int, clamp: bool = True) -> np.ndarray:
    """Separable Catmull-Rom (a = -0.5) upscaling with edge-clamped taps.

    Output pixel centres map to input coordinates ``(o + 0.5) / factor - 0.5``.
    With ``clamp=False`` the result is not clipped to [0, 1] (the filter is
    then exactly linear in the image).
    """
    if factor not in UPSCALE_FACTORS:
        raise BadFactor(f"factor must be one of {UPSCALE_FACTORS}, got {factor}")
    img = check_image(image) if clamp else np.asarray(image, dtype=np.float64)
    h, w, c = img.shape
    idx, wt = _taps(w, factor)
    rows = kernels.resample_last_axis(np.ascontiguousarray(img.transpose(0, 2, 1).reshape(h * c, w)), idx, wt)
    img = rows.reshape(h, c, w * factor)                                   # (h, c, W)
    idx, wt = _taps(h, factor)
    cols = kernels.resample_last_axis(np.ascontiguousarray(img.transpose(1, 2, 0).reshape(-1, h)), idx, wt)
    out = cols.reshape(c, w * factor, h * factor).transpose(2, 1, 0)
    out = np.ascontiguousarray(out)
    return np.clip(out, 0.0, 1.0) if clamp else out


# --------------------------------------------------------------------------
# files
# --------------------------------------------------------------------------

def to_bytes(image) -> np.ndarray:
    """Quantise to uint8 with round-half-away-from-zero (values are nonnegative)."""
    img = check_image(image)
    return np.floor(img * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def write_ppm(image, path) -> None:
    q = to_bytes(image)
    h, w, _ = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    for _ in range(4):
        m = _PPM_TOKEN.match(raw, pos)
        if not m:
            raise MalformedPpm("truncated PPM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P6":
        raise MalformedPpm("not a binary PPM (P6)")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise MalformedPpm("non-numeric PPM header field") from None
    if maxval != 255 or w < 1 or h < 1:
        raise MalformedPpm("only 8-bit PPMs with positive size are supported")
    if pos >= len(raw) or not raw[pos:pos + 1].isspace():
        raise MalformedPpm("missing whitespace after PPM header")
    body = raw[pos + 1:]
    if len(body) != w * h * 3:
        raise MalformedPpm(f"PPM body has {len(body)} bytes, expected {w * h * 3}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w, 3) / 255.0


def write_png(image, path) -> None:
    from PIL import Image

    Image.fromarray(to_bytes(image), mode="RGB").save(path, format="PNG")
