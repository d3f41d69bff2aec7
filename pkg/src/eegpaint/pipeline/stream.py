"""Live generation from a Cyton byte stream."""
from __future__ import annotations

import logging
import socket
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..cgan import GeneratorModel, generate_painting
from ..encoder import EncoderModel, predict
from ..ingest import DEFAULT_GAIN, EegEpoch, StreamDecoder
from ..rng import derive_seed
from .outputs import save_image

log = logging.getLogger(__name__)
CHUNK = 4096


@contextmanager
def open_source(spec: str) -> Iterator[Iterable[bytes]]:
    """``stdin`` / ``-``, ``tcp:HOST:PORT``, ``file:PATH`` or a bare path -> iterator of byte chunks."""
    if spec in ("stdin", "-"):
        yield _chunks(sys.stdin.buffer)
    elif spec.startswith("tcp:"):
        host, _, port = spec[4:].rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad TCP source {spec!r}; expected tcp:HOST:PORT")
        try:
            sock = socket.create_connection((host, int(port)), timeout=30)
        except OSError as exc:
            raise ConnectionError(f"cannot connect to {host}:{port}: {exc}") from exc
        with sock:
            yield _socket_chunks(sock)
    else:
        path = spec[5:] if spec.startswith("file:") else spec
        with open(path, "rb") as fh:
            yield _chunks(fh)


def _chunks(fh):
    while True:
        block = fh.read(CHUNK)
        if not block:
            return
        yield block


def _socket_chunks(sock):
    while True:
        block = sock.recv(CHUNK)
        if not block:
            return
        yield block


def run_stream(chunks: Iterable[bytes], encoder: EncoderModel, generator: GeneratorModel,
               out_dir, window_seconds: float, rate_hz: float = 250.0, gain: int = DEFAULT_GAIN,
               seed: int = 0, upscale: int = 1) -> dict:
    """Decode frames, cut ``window_seconds`` windows and write one image per full window."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    size = int(round(window_seconds * rate_hz))
    if size < rate_hz:
        raise ValueError("window must hold at least one second of samples")
    decoder = StreamDecoder(gain)
    buffer: list[tuple[float, ...]] = []
    written = []
    reported_skip = 0
    for chunk in chunks:
        for s in decoder.feed(chunk):
            buffer.append(s.channels_uv)
            if len(buffer) == size:
                epoch = EegEpoch(np.array(buffer).T, rate_hz)
                buffer = []
                k = len(written)
                label, _ = predict(epoch, encoder)
                img = generate_painting(epoch, encoder, generator, derive_seed(seed, k), 1)[0]
                written.append(save_image(img, out_dir / f"window{k:04d}_{label.slug}", upscale))
        if decoder.skipped != reported_skip:
            log.warning("resync: skipped %d corrupt byte(s)", decoder.skipped - reported_skip)
            reported_skip = decoder.skipped
    decoder.close()
    log.info("stream ended: packets=%d skipped_bytes=%d images=%d", decoder.packets, decoder.skipped, len(written))
    return {
        "command": "stream",
        "images": len(written),
        "packets": decoder.packets,
        "skipped_bytes": decoder.skipped,
        "leftover_samples": len(buffer),
        "files": [str(p) for p in written],
    }
