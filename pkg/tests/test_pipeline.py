import json
import logging
import socket
import threading

import numpy as np
import pytest
from PIL import Image

from eegpaint.cgan import init_discriminator, init_generator
from eegpaint.encoder import init_encoder
from eegpaint.errors import ConfigError, CrcError, NeedTwoGroups, UnknownKind, VersionError
from eegpaint.ingest import (
    COUNT_MAX, VREF, CytonPacket, EegDataset, load_epochs_csv, serialize_packet, synth_dataset, synth_epoch,
)
from eegpaint.labels import EmotionLabel
from eegpaint.pipeline import PipelineConfig, evaluate_fairness, load_checkpoint, load_config, save_checkpoint
from eegpaint.pipeline.checkpoint import decode_tensors, encode_tensors, model_to_tensors
from eegpaint.pipeline.cli import load_paintings, main
from eegpaint.pipeline.stream import open_source, run_stream
from eegpaint.rng import Pcg32

TINY = {
    "seed": 42,
    "encoder": {"passes": 6},
    "gan": {"steps": 4, "batch": 8},
}


def epoch_bytes(seconds: float, seed: int = 0) -> bytes:
    """A Cyton byte recording of a synthetic Happiness epoch."""
    ep = synth_epoch(EmotionLabel.HAPPINESS, seed, seconds=seconds)
    scale = VREF * 1e6 / (24 * COUNT_MAX)
    counts = np.round(ep.data / scale).astype(np.int64).T
    return b"".join(
        serialize_packet(CytonPacket(i % 256, tuple(int(c) for c in row))) for i, row in enumerate(counts)
    )


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    lines = [json.loads(line) for line in out.out.splitlines() if line.strip()]
    return code, lines, out.err


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------

@pytest.mark.parametrize("make", [lambda: init_encoder(8), lambda: init_generator(16), init_discriminator])
def test_checkpoint_round_trip(tmp_path, make):
    model = make()
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    back = load_checkpoint(path)
    kind, a = model_to_tensors(model)
    kind2, b = model_to_tensors(back)
    assert kind == kind2 and a.keys() == b.keys()
    for k in a:
        assert np.asarray(a[k]).tobytes() == np.asarray(b[k]).tobytes(), k


def test_checkpoint_errors(tmp_path, small_encoder):
    raw = bytearray(encode_tensors("encoder", model_to_tensors(small_encoder)[1]))
    raw[len(raw) // 2] ^= 0x01
    with pytest.raises(CrcError):
        decode_tensors(bytes(raw))
    with pytest.raises(VersionError):
        decode_tensors(encode_tensors("encoder", {"a": np.zeros(2)}, version=999))
    with pytest.raises(UnknownKind):
        encode_tensors("painter", {})
    path = tmp_path / "g.ckpt"
    save_checkpoint(init_generator(16), path)
    with pytest.raises(UnknownKind):
        load_checkpoint(path, "encoder")


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

def test_config(tmp_path):
    assert load_config().encoder.latent == 16
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"encoder": {"latent": 4}}))
    with pytest.raises(ConfigError, match="latent dim must exceed class count"):
        load_config(p)
    p.write_text(json.dumps({"encoder": {"latnet": 8}}))
    with pytest.raises(ConfigError, match="latnet"):
        load_config(p)
    p.write_text(json.dumps({"gan": {"steps": 0}}))
    with pytest.raises(ConfigError):
        load_config(p)
    cfg = PipelineConfig.from_dict(TINY)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.gan_config().steps == 4 and cfg.encoder_hyper().seed == 42


# --------------------------------------------------------------------------
# fairness
# --------------------------------------------------------------------------

def test_fairness_needs_two_groups(small_encoder):
    with pytest.raises(NeedTwoGroups):
        evaluate_fairness(small_encoder, synth_dataset(3, 1, subjects=("solo",)))


def test_fairness_report_shape(small_encoder, small_dataset):
    rep = evaluate_fairness(small_encoder, small_dataset)
    assert set(rep.accuracy) == {"a", "b"}
    assert rep.gap == max(rep.accuracy.values()) - min(rep.accuracy.values())
    assert all(0 <= v <= 1 for v in rep.accuracy.values())
    for g, cm in rep.confusion.items():
        assert cm.sum() == rep.counts[g]
    assert evaluate_fairness(small_encoder, small_dataset).to_json() == rep.to_json()


# --------------------------------------------------------------------------
# streaming
# --------------------------------------------------------------------------

def test_stream_windows(tmp_path, small_encoder, tiny_generator, caplog):
    g, _ = tiny_generator
    raw = epoch_bytes(10.0)
    chunks = [raw[i:i + 1000] for i in range(0, len(raw), 1000)]
    s = run_stream(chunks, small_encoder, g, tmp_path / "a", 5.0)
    assert s["images"] == 2 and s["skipped_bytes"] == 0

    garbage = bytes(int(v) for v in Pcg32(3).integers(0, 0xA0, 100))
    cut = 33 * 700
    noisy = raw[:cut] + garbage + raw[cut:]
    chunks = [noisy[i:i + 999] for i in range(0, len(noisy), 999)]
    with caplog.at_level(logging.INFO):
        s2 = run_stream(chunks, small_encoder, g, tmp_path / "b", 5.0)
    assert s2["images"] == 2 and s2["skipped_bytes"] == 100
    assert "skipped_bytes=100" in caplog.text

    assert run_stream([], small_encoder, g, tmp_path / "c", 5.0)["images"] == 0


def test_open_source_file_and_tcp(tmp_path):
    p = tmp_path / "r.bin"
    p.write_bytes(b"abc" * 5000)
    with open_source(f"file:{p}") as chunks:
        assert b"".join(chunks) == b"abc" * 5000
    with open_source(str(p)) as chunks:
        assert len(b"".join(chunks)) == 15000

    server = socket.socket()
    server.bind(("127.0.0.1", 0))
    server.listen(1)
    port = server.getsockname()[1]

    def serve():
        conn, _ = server.accept()
        conn.sendall(b"xyz" * 3000)
        conn.close()

    t = threading.Thread(target=serve)
    t.start()
    with open_source(f"tcp:127.0.0.1:{port}") as chunks:
        assert b"".join(chunks) == b"xyz" * 3000
    t.join()
    server.close()

    with pytest.raises(ConnectionError):
        with open_source(f"tcp:127.0.0.1:{port}"):
            pass


# --------------------------------------------------------------------------
# CLI
# --------------------------------------------------------------------------

@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "config.json"
    cfg.write_text(json.dumps(TINY))
    assert main(["synth-data", "--per-class", "12", "--seed", "42", "--seconds", "2",
                 "--out-eeg", str(root / "eeg.csv"), "--out-paintings", str(root / "paint")]) == 0
    assert main(["train-encoder", "--config", str(cfg), "--data", str(root / "eeg.csv"),
                 "--out-ckpt", str(root / "enc.ckpt")]) == 0
    assert main(["train-gan", "--config", str(cfg), "--paintings", str(root / "paint"),
                 "--eeg", str(root / "eeg.csv"), "--encoder-ckpt", str(root / "enc.ckpt"),
                 "--out-g", str(root / "g.ckpt"), "--out-d", str(root / "d.ckpt")]) == 0
    return root


def test_synth_data_cli(tmp_path, capsys):
    code, lines, _ = run_cli(capsys, "synth-data", "--per-class", 10, "--seed", 3, "--seconds", 1,
                             "--out-eeg", tmp_path / "e.csv", "--out-paintings", tmp_path / "p")
    assert code == 0 and lines[0]["epochs"] == 40 and lines[0]["paintings"] == 40
    assert len(load_epochs_csv(tmp_path / "e.csv")) == 40
    ps = load_paintings(tmp_path / "p")
    assert len(ps) == 40 and np.bincount(ps.labels).tolist() == [10] * 4
    assert (tmp_path / "p" / "sadness_9.ppm").exists()
    run_cli(capsys, "synth-data", "--per-class", 10, "--seed", 3, "--seconds", 1,
            "--out-eeg", tmp_path / "e2.csv", "--out-paintings", tmp_path / "p2")
    assert (tmp_path / "e.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()
    for f in (tmp_path / "p").iterdir():
        assert f.read_bytes() == (tmp_path / "p2" / f.name).read_bytes()


def test_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth-data", "--per-class", "0", "--out-eeg", str(tmp_path / "e.csv"),
              "--out-paintings", str(tmp_path / "p")])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_corrupt_checkpoint_cli(workspace, tmp_path, capsys):
    raw = bytearray((workspace / "enc.ckpt").read_bytes())
    raw[100] ^= 0xFF
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(bytes(raw))
    code, lines, err = run_cli(capsys, "eval-fairness", "--encoder-ckpt", bad, "--data", workspace / "eeg.csv")
    assert code == 1 and "CRC" in err and not lines


def test_bad_config_cli(workspace, tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"encoder": {"latent": 4}}))
    code, _, err = run_cli(capsys, "train-encoder", "--config", cfg, "--data", workspace / "eeg.csv",
                           "--out-ckpt", tmp_path / "x.ckpt")
    assert code == 1 and "latent dim must exceed class count" in err


def test_generate_cli(workspace, tmp_path, capsys):
    ds = load_epochs_csv(workspace / "eeg.csv")
    from eegpaint.ingest import save_epochs_csv
    save_epochs_csv(EegDataset(ds.epochs[:2]), tmp_path / "two.csv")
    args = ["generate", "--encoder-ckpt", workspace / "enc.ckpt", "--g-ckpt", workspace / "g.ckpt",
            "--epoch-csv", tmp_path / "two.csv", "--seed", 5, "--count", 3]
    code, lines, _ = run_cli(capsys, *args, "--out-dir", tmp_path / "o1")
    assert code == 0 and lines[0]["images"] == 6
    names = sorted(p.name for p in (tmp_path / "o1").glob("*.png"))
    assert len(names) == 6 and names[0].startswith("epoch000_")
    run_cli(capsys, *args, "--out-dir", tmp_path / "o2")
    for p in (tmp_path / "o1").iterdir():
        assert p.read_bytes() == (tmp_path / "o2" / p.name).read_bytes()

    code, lines, _ = run_cli(capsys, *args[:-2], "--count", 1, "--upscale", 16, "--out-dir", tmp_path / "o3")
    with Image.open(lines[0]["files"][0]) as im:
        assert im.size == (512, 512)


def test_stream_cli(workspace, tmp_path, capsys):
    rec = tmp_path / "rec.bin"
    rec.write_bytes(epoch_bytes(10.0, seed=2))
    code, lines, err = run_cli(capsys, "stream", "--source", rec, "--encoder-ckpt", workspace / "enc.ckpt",
                               "--g-ckpt", workspace / "g.ckpt", "--window-seconds", 5,
                               "--out-dir", tmp_path / "s")
    assert code == 0 and lines[0]["images"] == 2
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    code, lines, _ = run_cli(capsys, "stream", "--source", f"file:{empty}", "--encoder-ckpt",
                             workspace / "enc.ckpt", "--g-ckpt", workspace / "g.ckpt",
                             "--window-seconds", 5, "--out-dir", tmp_path / "s2")
    assert code == 0 and lines[0]["images"] == 0


def test_eval_fairness_cli(workspace, capsys):
    code, lines, _ = run_cli(capsys, "eval-fairness", "--encoder-ckpt", workspace / "enc.ckpt",
                             "--data", workspace / "eeg.csv")
    assert code == 0
    rep = lines[0]
    assert rep["groups"] == ["s0", "s1"] and rep["gap"] >= 0
