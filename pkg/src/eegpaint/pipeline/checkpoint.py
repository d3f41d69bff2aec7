"""Binary checkpoint format.

Little-endian layout::

    b"EEGC"                      magic
    u16                          format version (1)
    u8 + bytes                   model kind (ASCII): encoder | generator | discriminator
    u32                          tensor count
    per tensor:
        u16 + bytes              name (UTF-8, unique)
        u8                       ndim
        u32 * ndim               shape
        f32 * prod(shape)        row-major payload
    u32                          CRC32 (zlib) of every preceding byte
"""
from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from ..cgan import DiscriminatorModel, GeneratorModel
from ..encoder import EncoderModel
from ..errors import CrcError, UnknownKind, VersionError
from ..features import DEFAULT_BANDS, BandDef

MAGIC = b"EEGC"
VERSION = 1
KINDS = ("encoder", "generator", "discriminator")


def encode_tensors(kind: str, tensors: dict, version: int = VERSION) -> bytes:
    if kind not in KINDS:
        raise UnknownKind(f"unknown model kind {kind!r}")
    out = bytearray(MAGIC)
    out += struct.pack("<H", version)
    k = kind.encode("ascii")
    out += struct.pack("<B", len(k)) + k
    out += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb)) + nb
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def decode_tensors(raw: bytes):
    """Return ``(kind, {name: float32 array})`` after validating CRC and version."""
    if len(raw) < 4 + 2 + 1 + 4 + 4:
        raise CrcError("checkpoint truncated (CRC cannot be verified)")
    body, (stored,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(body) & 0xFFFFFFFF != stored:
        raise CrcError("checkpoint CRC32 mismatch: file is corrupted")
    if body[:4] != MAGIC:
        raise UnknownKind("not a checkpoint (bad magic)")
    (version,) = struct.unpack_from("<H", body, 4)
    if version != VERSION:
        raise VersionError(f"checkpoint version {version} unsupported (expected {VERSION})")
    pos = 6
    (klen,) = struct.unpack_from("<B", body, pos)
    kind = body[pos + 1:pos + 1 + klen].decode("ascii", errors="replace")
    pos += 1 + klen
    if kind not in KINDS:
        raise UnknownKind(f"unknown model kind {kind!r}")
    (count,) = struct.unpack_from("<I", body, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", body, pos)
        name = body[pos + 2:pos + 2 + nlen].decode("utf-8")
        pos += 2 + nlen
        (ndim,) = struct.unpack_from("<B", body, pos)
        shape = struct.unpack_from(f"<{ndim}I", body, pos + 1)
        pos += 1 + 4 * ndim
        size = int(np.prod(shape, dtype=np.int64)) * 4
        if name in tensors:
            raise UnknownKind(f"duplicate tensor name {name!r}")
        tensors[name] = np.frombuffer(body, dtype="<f4", count=size // 4, offset=pos).reshape(shape).astype(np.float32)
        pos += size
    if pos != len(body):
        raise CrcError("checkpoint has trailing bytes before the CRC")
    return kind, tensors


# --------------------------------------------------------------------------
# model <-> tensor table
# --------------------------------------------------------------------------

def _bands_tensor(bands) -> np.ndarray:
    return np.array([[b.lo_hz, b.hi_hz] for b in bands], dtype=np.float32)


def _bands_from_tensor(arr) -> tuple[BandDef, ...]:
    default = {(b.lo_hz, b.hi_hz): b.name for b in DEFAULT_BANDS}
    return tuple(
        BandDef(default.get((float(lo), float(hi)), f"band{i}"), float(lo), float(hi))
        for i, (lo, hi) in enumerate(arr)
    )


def model_to_tensors(model):
    if isinstance(model, EncoderModel):
        t = {name: getattr(model, name) for name in (
            "base_adjacency", "delta_upper", "w1", "w2", "wp", "wc", "feature_mean", "feature_scale")}
        t["bands"] = _bands_tensor(model.bands)
        return "encoder", t
    if isinstance(model, GeneratorModel):
        t = dict(model.params)
        t["latent_mean"] = model.latent_mean
        t["latent_scale"] = model.latent_scale
        t["noise_dim"] = np.array([model.noise_dim], dtype=np.float32)
        return "generator", t
    if isinstance(model, DiscriminatorModel):
        return "discriminator", dict(model.params)
    raise UnknownKind(f"cannot checkpoint {type(model).__name__}")


def model_from_tensors(kind: str, t: dict):
    t = dict(t)
    if kind == "encoder":
        bands = _bands_from_tensor(t.pop("bands"))
        return EncoderModel(bands=bands, **t)
    if kind == "generator":
        noise_dim = int(t.pop("noise_dim")[0])
        mean, scale = t.pop("latent_mean"), t.pop("latent_scale")
        return GeneratorModel(t, noise_dim, mean, scale)
    if kind == "discriminator":
        return DiscriminatorModel(t)
    raise UnknownKind(f"unknown model kind {kind!r}")


def save_checkpoint(model, path) -> None:
    kind, tensors = model_to_tensors(model)
    Path(path).write_bytes(encode_tensors(kind, tensors))


def load_checkpoint(path, expect: str | None = None):
    kind, tensors = decode_tensors(Path(path).read_bytes())
    if expect is not None and kind != expect:
        raise UnknownKind(f"{path}: expected a {expect} checkpoint, found {kind}")
    return model_from_tensors(kind, tensors)
