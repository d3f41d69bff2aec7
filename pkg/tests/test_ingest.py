import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import packet_stream
from eegpaint.errors import BadDuration, InvalidFooter, InvalidHeader, SchemaError, UnsupportedGain, WrongLength
from eegpaint.features import DEFAULT_BANDS, band_powers
from eegpaint.ingest import (
    CytonPacket, EegDataset, StreamDecoder, counts_to_microvolts, epochs_from_samples, load_epochs_csv,
    packet_to_sample, parse_packet, resync_stream, save_epochs_csv, serialize_packet, synth_dataset, synth_epoch,
)
from eegpaint.labels import EmotionLabel


def frame(counts_bytes=bytes(24), index=0, footer=0xC0, header=0xA0):
    return bytes([header, index]) + counts_bytes + bytes(6) + bytes([footer])


def test_zero_packet():
    p = parse_packet(frame())
    assert p.sample_index == 0
    assert p.channel_counts == (0,) * 8


def test_twos_complement():
    body = b"\x00\x00\x01" + b"\xff\xff\xff" + bytes(18)
    p = parse_packet(frame(body))
    assert p.channel_counts[0] == 1
    assert p.channel_counts[1] == -1


def test_bad_frames():
    with pytest.raises(InvalidHeader):
        parse_packet(frame(header=0xA1))
    with pytest.raises(InvalidFooter):
        parse_packet(frame(footer=0xB0))
    with pytest.raises(WrongLength):
        parse_packet(frame()[:-1])


@settings(max_examples=200, deadline=None)
@given(
    idx=st.integers(0, 255),
    counts=st.lists(st.integers(-(1 << 23), (1 << 23) - 1), min_size=8, max_size=8),
    aux=st.binary(min_size=6, max_size=6),
    foot=st.integers(0, 15),
)
def test_packet_round_trip(idx, counts, aux, foot):
    p = CytonPacket(idx, tuple(counts), aux, 0xC0 | foot)
    raw = serialize_packet(p)
    assert len(raw) == 33
    assert parse_packet(raw) == p


def test_microvolts():
    assert counts_to_microvolts(0) == 0.0
    assert counts_to_microvolts((1 << 23) - 1, 24) == pytest.approx(187500.0, abs=1e-9)
    assert counts_to_microvolts(1, 24) == pytest.approx(0.022352, rel=1e-4)
    with pytest.raises(UnsupportedGain):
        counts_to_microvolts(1, 3)


@given(st.integers(-(1 << 23) + 1, (1 << 23) - 1))
def test_microvolts_odd(c):
    assert counts_to_microvolts(-c) == -counts_to_microvolts(c)


def test_resync_examples():
    pkts, raw = packet_stream(3)
    res = resync_stream(raw)
    assert res.packets == pkts and res.skipped == 0 and res.remainder == b""

    res = resync_stream(bytes([1, 2, 3, 4, 5]) + raw)
    assert res.packets == pkts and res.skipped == 5

    res = resync_stream(raw[:33] + raw[33:43])
    assert len(res.packets) == 1 and len(res.remainder) == 10


def test_resync_byte_accounting(rng):
    _, raw = packet_stream(40, seed=2)
    buf = bytearray(raw)
    for pos in rng.integers(0, len(buf), 25):
        buf[int(pos)] = int(rng.integers(0, 256))
    packets, skipped, rem = resync_stream(bytes(buf))
    assert 33 * len(packets) + skipped + len(rem) == len(buf)
    for p in packets:
        assert parse_packet(serialize_packet(p)) == p


def test_stream_decoder_chunking():
    pkts, raw = packet_stream(20, seed=4)
    noisy = raw[:100] + b"\x13" * 7 + raw[100:]
    dec = StreamDecoder()
    out = []
    for i in range(0, len(noisy), 17):
        out += dec.feed(noisy[i:i + 17])
    dec.close()
    whole = resync_stream(noisy)
    assert len(out) == len(whole.packets)
    assert dec.skipped == whole.skipped + len(whole.remainder)
    assert out[0] == packet_to_sample(whole.packets[0])


def test_epochs_from_samples():
    pkts, raw = packet_stream(600, seed=5)
    samples = [packet_to_sample(p) for p in pkts]
    epochs = epochs_from_samples(samples, 250.0, 2.0)
    assert len(epochs) == 1
    assert epochs[0].data.shape == (8, 500)


def test_csv_round_trip(tmp_path):
    ds = synth_dataset(3, 9, classes=[EmotionLabel.ANGER, EmotionLabel.FEAR], seconds=1.0, subjects=("x", "y"))
    ds = EegDataset(ds.epochs[:5] + synth_dataset(5, 10, seconds=1.0).epochs[:5])
    path = tmp_path / "e.csv"
    save_epochs_csv(ds, path)
    back = load_epochs_csv(path)
    assert len(back) == 10
    for a, b in zip(ds, back):
        assert a.label == b.label and a.rate_hz == b.rate_hz and a.subject == b.subject
        np.testing.assert_allclose(b.data, a.data, rtol=1e-6, atol=1e-9)


def test_csv_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(SchemaError, match="no header"):
        load_epochs_csv(empty)

    ds = synth_dataset(1, 1, classes=[EmotionLabel.ANGER], seconds=1.0)
    good = tmp_path / "g.csv"
    save_epochs_csv(ds, good)
    header, row = good.read_text().splitlines()
    cols = header.split(",")
    # drop channel 7 from the header and data: 7 channels while the row declares 8
    keep = [i for i, c in enumerate(cols) if not c.startswith("c7_")]
    vals = row.split(",")
    bad = tmp_path / "b.csv"
    bad.write_text(",".join(cols[i] for i in keep) + "\n" + ",".join(vals[i] for i in keep) + "\n")
    with pytest.raises(SchemaError, match="row 2"):
        load_epochs_csv(bad)

    nolabel = tmp_path / "n.csv"
    nolabel.write_text(header + "\n" + "," + row.split(",", 1)[1] + "\n")
    with pytest.raises(SchemaError, match="label"):
        load_epochs_csv(nolabel)
    assert load_epochs_csv(nolabel, require_labels=False).epochs[0].label is None


def test_synth_determinism_and_bands():
    a = synth_epoch(EmotionLabel.HAPPINESS, 77)
    b = synth_epoch(EmotionLabel.HAPPINESS, 77)
    assert np.array_equal(a.data, b.data)
    names = [band.name for band in DEFAULT_BANDS]
    p = band_powers(a).mean(axis=0)
    assert p[names.index("gamma")] > p[names.index("alpha")]
    p = band_powers(synth_epoch(EmotionLabel.SADNESS, 77)).mean(axis=0)
    assert p[names.index("alpha")] > p[names.index("gamma")]
    with pytest.raises(BadDuration):
        synth_epoch(EmotionLabel.ANGER, 1, seconds=0.5)


def test_nearest_centroid_separability():
    ds = synth_dataset(100, 21)
    x = np.stack([np.log(band_powers(e)).ravel() for e in ds])
    y = np.array([int(lab) for lab in ds.labels])
    cents = np.stack([x[y == c].mean(axis=0) for c in range(4)])
    pred = np.argmin(((x[:, None, :] - cents[None]) ** 2).sum(-1), axis=1)
    assert (pred == y).mean() >= 0.99
