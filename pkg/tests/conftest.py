import numpy as np
import pytest

from eegpaint.ingest import CytonPacket, serialize_packet
from eegpaint.rng import Pcg32


def random_packet(rng: Pcg32) -> CytonPacket:
    counts = tuple(int(v) for v in rng.integers(-(1 << 23), 1 << 23, 8))
    aux = bytes(int(v) for v in rng.integers(0, 256, 6))
    return CytonPacket(int(rng.integers(0, 256)), counts, aux, 0xC0 | int(rng.integers(0, 16)))


def packet_stream(n: int, seed: int = 0) -> tuple[list[CytonPacket], bytes]:
    rng = Pcg32(seed, stream=77)
    pkts = [random_packet(rng) for _ in range(n)]
    return pkts, b"".join(serialize_packet(p) for p in pkts)


@pytest.fixture
def rng():
    return Pcg32(1234)


@pytest.fixture(scope="session")
def small_dataset():
    from eegpaint.ingest import synth_dataset

    return synth_dataset(30, 5, subjects=("a", "b"))


@pytest.fixture(scope="session")
def small_encoder(small_dataset):
    from eegpaint.encoder import EncoderHyper, train_encoder

    model, _ = train_encoder(small_dataset, EncoderHyper(passes=8, seed=3))
    return model


@pytest.fixture(scope="session")
def tiny_generator(small_encoder, small_dataset):
    from eegpaint.cgan import GanConfig, PaintingSet, train_gan
    from eegpaint.imaging import synth_painting

    labels = np.arange(16) % 4
    imgs = np.stack([synth_painting(int(c), 500 + i) for i, c in enumerate(labels)])
    g, d, _ = train_gan(PaintingSet(imgs, labels), small_dataset, small_encoder,
                        GanConfig(steps=3, batch=4, report_every=0))
    return g, d
