"""JSON pipeline configuration.  Unknown keys anywhere are errors."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..cgan import GanConfig
from ..encoder import EncoderHyper
from ..errors import ConfigError
from ..features import DEFAULT_BANDS, DEFAULT_THETA, BandDef
from ..labels import NUM_CLASSES


@dataclass
class EncoderSection:
    hidden: int = 16
    latent: int = 16
    lam: float = 1e-3
    lr: float = 1e-3
    batch: int = 16
    passes: int = 30
    val_fraction: float = 0.2


@dataclass
class GanSection:
    noise_dim: int = 64
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    batch: int = 32
    steps: int = 3000
    ada_target: float = 0.6
    ada_step: float = 0.01
    ada_window: int = 64


@dataclass
class PathsSection:
    eeg_csv: str | None = None
    paintings_dir: str | None = None
    encoder_ckpt: str | None = None
    generator_ckpt: str | None = None
    discriminator_ckpt: str | None = None
    out_dir: str | None = None


@dataclass
class PipelineConfig:
    seed: int = 42
    channels: int = 8
    rate_hz: float = 250.0
    gain: int = 24
    bands: list = field(default_factory=lambda: [[b.name, b.lo_hz, b.hi_hz] for b in DEFAULT_BANDS])
    montage_theta: float = DEFAULT_THETA
    encoder: EncoderSection = field(default_factory=EncoderSection)
    gan: GanSection = field(default_factory=GanSection)
    image_size: int = 32
    upscale: int = 16
    paths: PathsSection = field(default_factory=PathsSection)

    def __post_init__(self):
        _positive(self, ("channels", "rate_hz", "gain", "montage_theta", "image_size", "upscale"))
        _positive(self.encoder, ("hidden", "latent", "lr", "batch", "passes"))
        _positive(self.gan, ("noise_dim", "lr", "batch", "steps", "ada_step", "ada_window"))
        if self.encoder.latent <= NUM_CLASSES:
            raise ConfigError(
                f"latent dim must exceed class count (encoder.latent={self.encoder.latent}, classes={NUM_CLASSES})"
            )
        if self.encoder.lam < 0:
            raise ConfigError("encoder.lam must be nonnegative")
        if not 0 <= self.encoder.val_fraction < 1:
            raise ConfigError("encoder.val_fraction must lie in [0, 1)")
        if self.image_size != 32:
            raise ConfigError("image_size must be 32 (the generator architecture is fixed)")
        for i, b in enumerate(self.bands):
            if not (isinstance(b, (list, tuple)) and len(b) == 3):
                raise ConfigError(f"bands[{i}] must be [name, lo_hz, hi_hz]")
            try:
                BandDef(str(b[0]), float(b[1]), float(b[2])).check(self.rate_hz)
            except ValueError as exc:
                raise ConfigError(f"bands[{i}]: {exc}") from None

    @property
    def band_defs(self) -> tuple[BandDef, ...]:
        return tuple(BandDef(str(n), float(lo), float(hi)) for n, lo, hi in self.bands)

    def encoder_hyper(self) -> EncoderHyper:
        e = self.encoder
        return EncoderHyper(hidden=e.hidden, latent=e.latent, lam=e.lam, lr=e.lr, batch=e.batch,
                            passes=e.passes, seed=self.seed, val_fraction=e.val_fraction,
                            bands=self.band_defs, theta=self.montage_theta)

    def gan_config(self) -> GanConfig:
        g = self.gan
        return GanConfig(noise_dim=g.noise_dim, lr=g.lr, beta1=g.beta1, beta2=g.beta2, batch=g.batch,
                         steps=g.steps, ada_target=g.ada_target, ada_step=g.ada_step,
                         ada_window=g.ada_window, seed=self.seed)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "config")


def _positive(obj, names):
    for n in names:
        v = getattr(obj, n)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            raise ConfigError(f"{n} must be a positive number, got {v!r}")


_SECTIONS = {"encoder": EncoderSection, "gan": GanSection, "paths": PathsSection}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is PipelineConfig:
            kwargs[key] = _build(_SECTIONS[key], value, f"{where}.{key}")
            continue
        default = getattr(defaults, key)
        if isinstance(value, bool) or (isinstance(default, int) and not isinstance(value, int)):
            raise ConfigError(f"{where}.{key} must be an integer, got {value!r}")
        if isinstance(default, float) and not isinstance(value, (int, float)):
            raise ConfigError(f"{where}.{key} must be a number, got {value!r}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def load_config(path=None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return PipelineConfig.from_dict(data)
