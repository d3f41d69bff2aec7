"""Cyton packet parsing, stream resynchronisation, epoch IO and synthetic EEG.

Cyton frames are 33 bytes::

    0      0xA0 header
    1      sample index (0..255)
    2..25  eight channels, 24-bit big-endian two's complement
    26..31 aux bytes (accelerometer, kept opaque)
    32     footer, 0xC0..0xCF
"""
from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import BadDuration, InvalidEpoch, InvalidFooter, InvalidHeader, SchemaError, UnsupportedGain, WrongLength
from .labels import EmotionLabel
from .rng import Pcg32

FRAME_LEN = 33
HEADER = 0xA0
N_CHANNELS = 8
DEFAULT_RATE_HZ = 250.0
DEFAULT_GAIN = 24
VALID_GAINS = (1, 2, 4, 6, 8, 12, 24)
VREF = 4.5
COUNT_MAX = (1 << 23) - 1

BAND_NAMES = ("delta", "theta", "alpha", "beta", "gamma")
# Sinusoid placement bands for synthesis; they match the default feature bands.
SYNTH_BANDS = ((1.0, 4.0), (4.0, 8.0), (8.0, 14.0), (14.0, 31.0), (31.0, 50.0))
# Per-class amplitude (µV) for delta, theta, alpha, beta, gamma.  Picked for
# linear separability in band-power space, not for physiological realism.
AMPLITUDE_TABLE = {
    EmotionLabel.ANGER: (4.0, 4.0, 6.0, 14.0, 8.0),
    EmotionLabel.SADNESS: (6.0, 8.0, 16.0, 4.0, 2.0),
    EmotionLabel.FEAR: (10.0, 12.0, 4.0, 6.0, 10.0),
    EmotionLabel.HAPPINESS: (4.0, 4.0, 6.0, 8.0, 16.0),
}
NOISE_SIGMA_UV = 2.0
SINES_PER_BAND = 3


# --------------------------------------------------------------------------
# packets
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CytonPacket:
    sample_index: int
    channel_counts: tuple[int, ...]
    aux: bytes = bytes(6)
    footer: int = 0xC0

    def __post_init__(self):
        if not 0 <= self.sample_index <= 255:
            raise ValueError("sample_index out of range")
        if len(self.channel_counts) != N_CHANNELS:
            raise ValueError("expected 8 channel counts")
        for c in self.channel_counts:
            if not -(1 << 23) <= c <= COUNT_MAX:
                raise ValueError(f"channel count {c} outside 24-bit range")
        if len(self.aux) != 6:
            raise ValueError("aux must be 6 bytes")
        if self.footer & 0xF0 != 0xC0:
            raise ValueError("footer must be in 0xC0..0xCF")


@dataclass(frozen=True)
class Sample:
    sample_index: int
    channels_uv: tuple[float, ...]


def parse_packet(raw: bytes) -> CytonPacket:
    if len(raw) != FRAME_LEN:
        raise WrongLength(f"expected {FRAME_LEN} bytes, got {len(raw)}")
    raw = bytes(raw)
    if raw[0] != HEADER:
        raise InvalidHeader(f"header byte 0x{raw[0]:02X} != 0xA0")
    if raw[32] & 0xF0 != 0xC0:
        raise InvalidFooter(f"footer byte 0x{raw[32]:02X} not in 0xC0..0xCF")
    counts = tuple(
        int.from_bytes(raw[2 + 3 * i:5 + 3 * i], "big", signed=True) for i in range(N_CHANNELS)
    )
    return CytonPacket(raw[1], counts, raw[26:32], raw[32])


def serialize_packet(packet: CytonPacket) -> bytes:
    body = b"".join(c.to_bytes(3, "big", signed=True) for c in packet.channel_counts)
    return bytes((HEADER, packet.sample_index)) + body + bytes(packet.aux) + bytes((packet.footer,))


def counts_to_microvolts(count, gain: int = DEFAULT_GAIN):
    """ADC counts to µV: ``count * 4.5e6 / (gain * (2**23 - 1))``.

    Works on scalars or arrays.
    """
    if gain not in VALID_GAINS:
        raise UnsupportedGain(f"gain {gain} not in {VALID_GAINS}")
    scale = VREF * 1e6 / (gain * COUNT_MAX)
    if isinstance(count, (int, np.integer)):
        return float(count) * scale
    return np.asarray(count, dtype=np.float64) * scale


def packet_to_sample(packet: CytonPacket, gain: int = DEFAULT_GAIN) -> Sample:
    uv = counts_to_microvolts(np.asarray(packet.channel_counts), gain)
    return Sample(packet.sample_index, tuple(float(v) for v in uv))


@dataclass
class ResyncResult:
    packets: list[CytonPacket]
    skipped: int
    remainder: bytes

    def __iter__(self):
        return iter((self.packets, self.skipped, self.remainder))


def resync_stream(data: bytes) -> ResyncResult:
    """Split a byte stream into frames, skipping corruption.

    Candidate frames are positions with a 0xA0 header and a valid footer 32
    bytes later.  Overlapping candidates are resolved by weighted interval
    selection, where each frame scores one point plus one for every side that
    abuts another candidate (or the buffer edge).  Genuine frames in a
    stream sit back to back, so they win over accidental header/footer
    coincidences.  Ties go to the later candidate: a spurious header in
    damaged bytes reaches forward into the next genuine frame.  A trailing
    incomplete frame starting with 0xA0 is returned as ``remainder`` so the
    caller can prepend it to the next chunk.
    """
    buf = np.frombuffer(bytes(data), dtype=np.uint8)
    n = buf.shape[0]
    cands = kernels.scan_frames(buf)
    chosen = kernels.select_frames(cands, n)
    packets = [parse_packet(buf[p:p + FRAME_LEN].tobytes()) for p in chosen]
    tail_from = int(chosen[-1]) + FRAME_LEN if len(chosen) else 0
    remainder_at = n
    tail = buf[max(tail_from, n - FRAME_LEN + 1):]
    hits = np.flatnonzero(tail == HEADER)
    if hits.size:
        remainder_at = max(tail_from, n - FRAME_LEN + 1) + int(hits[0])
    skipped = n - FRAME_LEN * len(packets) - (n - remainder_at)
    return ResyncResult(packets, int(skipped), buf[remainder_at:].tobytes())


class StreamDecoder:
    """Incremental wrapper around :func:`resync_stream` for chunked input."""

    def __init__(self, gain: int = DEFAULT_GAIN):
        self.gain = gain
        self.pending = b""
        self.skipped = 0
        self.packets = 0

    def feed(self, chunk: bytes) -> list[Sample]:
        res = resync_stream(self.pending + bytes(chunk))
        self.pending = res.remainder
        self.skipped += res.skipped
        self.packets += len(res.packets)
        return [packet_to_sample(p, self.gain) for p in res.packets]

    def close(self) -> None:
        self.skipped += len(self.pending)
        self.pending = b""


# --------------------------------------------------------------------------
# epochs
# --------------------------------------------------------------------------

@dataclass
class EegEpoch:
    data: np.ndarray
    rate_hz: float = DEFAULT_RATE_HZ
    label: EmotionLabel | None = None
    subject: str | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[0] < 1:
            raise InvalidEpoch("epoch data must be a channels x samples matrix")
        if self.rate_hz <= 0 or self.data.shape[1] < self.rate_hz:
            raise InvalidEpoch("epoch must hold at least one second of samples")
        if not np.all(np.isfinite(self.data)):
            raise InvalidEpoch("epoch data must be finite")
        if self.label is not None:
            self.label = EmotionLabel.parse(self.label)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class EegDataset:
    epochs: list[EegEpoch] = field(default_factory=list)

    def __post_init__(self):
        if self.epochs:
            rate = self.epochs[0].rate_hz
            ch = self.epochs[0].n_channels
            for e in self.epochs:
                if e.rate_hz != rate or e.n_channels != ch:
                    raise InvalidEpoch("epochs must share rate and channel count")

    def __len__(self):
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    @property
    def labels(self) -> list[EmotionLabel | None]:
        return [e.label for e in self.epochs]

    def class_counts(self) -> dict[EmotionLabel, int]:
        counts = {lab: 0 for lab in EmotionLabel}
        for e in self.epochs:
            if e.label is not None:
                counts[e.label] += 1
        return counts


def epochs_from_samples(samples: Sequence[Sample], rate_hz: float, seconds: float) -> list[EegEpoch]:
    """Cut consecutive samples into non-overlapping windows of ``seconds``."""
    size = int(round(rate_hz * seconds))
    out = []
    for start in range(0, len(samples) - size + 1, size):
        block = np.array([s.channels_uv for s in samples[start:start + size]]).T
        out.append(EegEpoch(block, rate_hz))
    return out


# --------------------------------------------------------------------------
# CSV
# --------------------------------------------------------------------------

FIXED_COLUMNS = ("label", "subject", "rate_hz", "ch", "samples")
_DATA_COL = re.compile(r"^c(\d+)_s(\d+)$")


def _data_columns(ch: int, samples: int) -> list[str]:
    return [f"c{c}_s{s}" for c in range(ch) for s in range(samples)]


def save_epochs_csv(dataset: EegDataset | Iterable[EegEpoch], path) -> None:
    """Write one epoch per row; data columns ``c<channel>_s<sample>``, channel-major."""
    epochs = list(dataset)
    if not epochs:
        raise SchemaError("refusing to write an empty dataset")
    ch, ns = epochs[0].data.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(FIXED_COLUMNS) + _data_columns(ch, ns))
        for e in epochs:
            if e.data.shape != (ch, ns):
                raise SchemaError("all epochs in a CSV must share shape")
            row = [
                e.label.slug if e.label is not None else "",
                e.subject or "",
                repr(float(e.rate_hz)),
                str(ch),
                str(ns),
            ]
            row.extend(f"{v:.9g}" for v in e.data.ravel())
            w.writerow(row)


def load_epochs_csv(path, require_labels: bool = True) -> EegDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError("no header")
        if tuple(header[:5]) != FIXED_COLUMNS:
            raise SchemaError(f"header must start with {','.join(FIXED_COLUMNS)}")
        grid = [_DATA_COL.match(h) for h in header[5:]]
        if not grid or not all(grid):
            raise SchemaError("data columns must be named c<channel>_s<sample>")
        ch = max(int(m.group(1)) for m in grid) + 1
        ns = max(int(m.group(2)) for m in grid) + 1
        if header[5:] != _data_columns(ch, ns):
            raise SchemaError("data columns must form a complete channel-major grid")
        epochs = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"row {lineno}: {len(row)} columns, header has {len(header)}")
            try:
                rate = float(row[2])
                row_ch, row_ns = int(row[3]), int(row[4])
            except ValueError as exc:
                raise SchemaError(f"row {lineno}: {exc}") from None
            if (row_ch, row_ns) != (ch, ns):
                raise SchemaError(
                    f"row {lineno}: ch={row_ch} samples={row_ns} but header declares ch={ch} samples={ns}"
                )
            label = None
            if row[0]:
                try:
                    label = EmotionLabel.parse(row[0])
                except ValueError as exc:
                    raise SchemaError(f"row {lineno}, column label: {exc}") from None
            elif require_labels:
                raise SchemaError(f"row {lineno}, column label: missing label")
            try:
                data = np.array([float(v) for v in row[5:]]).reshape(ch, ns)
            except ValueError as exc:
                raise SchemaError(f"row {lineno}: bad data value ({exc})") from None
            try:
                epochs.append(EegEpoch(data, rate, label, row[1] or None))
            except InvalidEpoch as exc:
                raise SchemaError(f"row {lineno}: {exc}") from None
    try:
        return EegDataset(epochs)
    except InvalidEpoch as exc:
        raise SchemaError(str(exc)) from None


# --------------------------------------------------------------------------
# synthetic EEG
# --------------------------------------------------------------------------

def synth_epoch(
    label: EmotionLabel,
    seed: int,
    rate_hz: float = DEFAULT_RATE_HZ,
    seconds: float = 5.0,
    n_channels: int = N_CHANNELS,
    noise_sigma: float = NOISE_SIGMA_UV,
    subject: str | None = None,
) -> EegEpoch:
    """Class-conditioned synthetic EEG.

    Every channel is, per band, ``amplitude * sum_k sin(2 pi f_k t + phi_k) /
    sqrt(K)`` with ``K = 3`` frequencies drawn uniformly inside the band
    (0.5 Hz clear of its edges) and uniform phases, plus white Gaussian noise.
    Draw order from ``Pcg32(seed)``: for each channel, for each band,
    K frequencies then K phases; then the noise matrix.
    """
    if seconds < 1:
        raise BadDuration(f"seconds must be >= 1, got {seconds}")
    if rate_hz < 100:
        raise BadDuration(f"rate_hz must be >= 100, got {rate_hz}")
    label = EmotionLabel.parse(label)
    rng = Pcg32(seed)
    n = int(round(rate_hz * seconds))
    t = np.arange(n) / rate_hz
    amps = AMPLITUDE_TABLE[label]
    data = np.zeros((n_channels, n))
    norm = 1.0 / math.sqrt(SINES_PER_BAND)
    for c in range(n_channels):
        for (lo, hi), amp in zip(SYNTH_BANDS, amps):
            freqs = rng.uniform(lo + 0.5, hi - 0.5, SINES_PER_BAND)
            phases = rng.uniform(0.0, 2 * math.pi, SINES_PER_BAND)
            for f, ph in zip(freqs, phases):
                data[c] += amp * norm * np.sin(2 * math.pi * f * t + ph)
    data += rng.normal(0.0, noise_sigma, (n_channels, n))
    return EegEpoch(data, float(rate_hz), label, subject)


def synth_dataset(
    per_class: int,
    seed: int,
    classes: Sequence[EmotionLabel] = tuple(EmotionLabel),
    rate_hz: float = DEFAULT_RATE_HZ,
    seconds: float = 5.0,
    n_channels: int = N_CHANNELS,
    noise_sigma: float = NOISE_SIGMA_UV,
    subjects: Sequence[str] = ("s0",),
) -> EegDataset:
    """``per_class`` epochs per class, interleaved by class, subjects round-robin."""
    from .rng import derive_seed

    epochs = []
    for i in range(per_class):
        for lab in classes:
            s = derive_seed(seed, int(lab), i)
            subj = subjects[i % len(subjects)] if subjects else None
            epochs.append(synth_epoch(lab, s, rate_hz, seconds, n_channels, noise_sigma, subj))
    return EegDataset(epochs)
