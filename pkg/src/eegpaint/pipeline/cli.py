"""``eegpaint`` command line.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Machine-readable
results are single JSON lines on stdout; logs go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path

import numpy as np

from ..cgan import PaintingSet, train_gan, generate_painting
from ..encoder import predict, train_encoder
from ..errors import EegPaintError, EncoderMismatch, SchemaError
from ..imaging import read_ppm, synth_painting, write_ppm
from ..ingest import load_epochs_csv, save_epochs_csv, synth_dataset
from ..labels import EmotionLabel
from ..rng import derive_seed
from .checkpoint import load_checkpoint, save_checkpoint
from .config import load_config
from .fairness import evaluate_fairness
from .outputs import save_image
from .stream import open_source, run_stream

log = logging.getLogger("eegpaint")
PAINTING_NAME = re.compile(r"^([a-z]+)_(\d+)\.ppm$")


def _emit(obj: dict) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")
    sys.stdout.flush()


def _pick(cli_value, cfg_value, name: str):
    value = cli_value if cli_value is not None else cfg_value
    if value is None:
        raise EegPaintError(f"--{name} is required (or set it under paths in the config)")
    return value


def load_paintings(folder) -> PaintingSet:
    """Read ``<class>_<index>.ppm`` files, ordered by class code then index."""
    entries = []
    for p in Path(folder).iterdir():
        m = PAINTING_NAME.match(p.name)
        if not m:
            continue
        try:
            lab = EmotionLabel.parse(m.group(1))
        except ValueError:
            raise SchemaError(f"{p.name}: unknown class {m.group(1)!r}") from None
        entries.append((int(lab), int(m.group(2)), p))
    if not entries:
        raise SchemaError(f"no <class>_<index>.ppm paintings in {folder}")
    entries.sort()
    return PaintingSet(np.stack([read_ppm(p) for _, _, p in entries]), np.array([c for c, _, _ in entries]))


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_synth_data(args, parser) -> int:
    if args.per_class < 1:
        parser.error("--per-class must be at least 1")
    classes = [EmotionLabel.parse(c) for c in args.classes.split(",")] if args.classes else list(EmotionLabel)
    subjects = [f"s{i}" for i in range(args.subjects)]
    ds = synth_dataset(args.per_class, args.seed, classes, args.rate, args.seconds,
                       noise_sigma=args.noise_sigma, subjects=subjects)
    Path(args.out_eeg).parent.mkdir(parents=True, exist_ok=True)
    save_epochs_csv(ds, args.out_eeg)
    out = Path(args.out_paintings)
    out.mkdir(parents=True, exist_ok=True)
    n_paint = args.paintings_per_class or args.per_class
    for lab in classes:
        for i in range(n_paint):
            img = synth_painting(lab, derive_seed(args.seed, 100 + int(lab), i), args.size)
            write_ppm(img, out / f"{lab.slug}_{i}.ppm")
    _emit({"command": "synth-data", "epochs": len(ds), "paintings": n_paint * len(classes),
           "eeg": str(args.out_eeg), "paintings_dir": str(out)})
    return 0


def cmd_train_encoder(args, parser) -> int:
    cfg = load_config(args.config)
    data = _pick(args.data, cfg.paths.eeg_csv, "data")
    out = _pick(args.out_ckpt, cfg.paths.encoder_ckpt, "out-ckpt")
    ds = load_epochs_csv(data)
    model, report = train_encoder(ds, cfg.encoder_hyper())
    save_checkpoint(model, out)
    _emit({
        "command": "train-encoder",
        "train_accuracy": report.train_accuracy,
        "val_accuracy": report.val_accuracy,
        "final_loss": report.losses[-1] if report.losses else None,
        "confusion": report.confusion.tolist(),
        "checkpoint": str(out),
    })
    return 0


def cmd_train_gan(args, parser) -> int:
    cfg = load_config(args.config)
    encoder = load_checkpoint(_pick(args.encoder_ckpt, cfg.paths.encoder_ckpt, "encoder-ckpt"), "encoder")
    paintings = load_paintings(_pick(args.paintings, cfg.paths.paintings_dir, "paintings"))
    eeg = load_epochs_csv(_pick(args.eeg, cfg.paths.eeg_csv, "eeg"))
    out_g = _pick(args.out_g, cfg.paths.generator_ckpt, "out-g")
    out_d = _pick(args.out_d, cfg.paths.discriminator_ckpt, "out-d")
    g, d, report = train_gan(paintings, eeg, encoder, cfg.gan_config())
    save_checkpoint(g, out_g)
    save_checkpoint(d, out_d)
    tail = max(1, min(100, len(report.d_losses)))
    _emit({
        "command": "train-gan",
        "steps": len(report.d_losses),
        "d_loss": float(np.mean(report.d_losses[-tail:])),
        "g_loss": float(np.mean(report.g_losses[-tail:])),
        "ada_p": report.p_trajectory[-1] if report.p_trajectory else 0.0,
        "colors": report.color_checkpoints[-1] if report.color_checkpoints else None,
        "generator": str(out_g),
        "discriminator": str(out_d),
    })
    return 0


def cmd_generate(args, parser) -> int:
    if args.count < 0:
        parser.error("--count must be nonnegative")
    if args.upscale not in (1, 2, 4, 8, 16):
        parser.error("--upscale must be one of 1, 2, 4, 8, 16")
    cfg = load_config(args.config)
    encoder = load_checkpoint(_pick(args.encoder_ckpt, cfg.paths.encoder_ckpt, "encoder-ckpt"), "encoder")
    generator = load_checkpoint(_pick(args.g_ckpt, cfg.paths.generator_ckpt, "g-ckpt"), "generator")
    if generator.latent_dim != encoder.latent_dim:
        raise EncoderMismatch(f"generator expects latent {generator.latent_dim}, encoder produces {encoder.latent_dim}")
    ds = load_epochs_csv(_pick(args.epoch_csv, cfg.paths.eeg_csv, "epoch-csv"), require_labels=False)
    out = Path(_pick(args.out_dir, cfg.paths.out_dir, "out-dir"))
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, epoch in enumerate(ds):
        label, _ = predict(epoch, encoder)
        images = generate_painting(epoch, encoder, generator, derive_seed(args.seed, i), args.count)
        for k, img in enumerate(images):
            files.append(str(save_image(img, out / f"epoch{i:03d}_{label.slug}_{k:02d}", args.upscale)))
    _emit({"command": "generate", "images": len(files), "files": files})
    return 0


def cmd_stream(args, parser) -> int:
    if args.window_seconds <= 0:
        parser.error("--window-seconds must be positive")
    cfg = load_config(args.config)
    encoder = load_checkpoint(_pick(args.encoder_ckpt, cfg.paths.encoder_ckpt, "encoder-ckpt"), "encoder")
    generator = load_checkpoint(_pick(args.g_ckpt, cfg.paths.generator_ckpt, "g-ckpt"), "generator")
    if generator.latent_dim != encoder.latent_dim:
        raise EncoderMismatch(f"generator expects latent {generator.latent_dim}, encoder produces {encoder.latent_dim}")
    out = _pick(args.out_dir, cfg.paths.out_dir, "out-dir")
    with open_source(args.source) as chunks:
        summary = run_stream(chunks, encoder, generator, out, args.window_seconds, cfg.rate_hz,
                             cfg.gain, args.seed, args.upscale)
    _emit(summary)
    return 0


def cmd_eval_fairness(args, parser) -> int:
    cfg = load_config(args.config)
    encoder = load_checkpoint(_pick(args.encoder_ckpt, cfg.paths.encoder_ckpt, "encoder-ckpt"), "encoder")
    ds = load_epochs_csv(_pick(args.data, cfg.paths.eeg_csv, "data"))
    report = evaluate_fairness(encoder, ds)
    _emit({"command": "eval-fairness", **report.to_json()})
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="eegpaint", description="EEG emotion to painting pipeline")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth-data", help="write a synthetic EEG CSV and painting folder")
    s.add_argument("--classes", default=None, help="comma-separated class names (default: all four)")
    s.add_argument("--per-class", type=int, default=200)
    s.add_argument("--paintings-per-class", type=int, default=None)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--subjects", type=int, default=2)
    s.add_argument("--seconds", type=float, default=5.0)
    s.add_argument("--rate", type=float, default=250.0)
    s.add_argument("--noise-sigma", type=float, default=2.0)
    s.add_argument("--size", type=int, default=32, choices=(16, 32, 64))
    s.add_argument("--out-eeg", required=True)
    s.add_argument("--out-paintings", required=True)
    s.set_defaults(func=cmd_synth_data)

    s = sub.add_parser("train-encoder", help="train the graph emotion encoder")
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--out-ckpt")
    s.set_defaults(func=cmd_train_encoder)

    s = sub.add_parser("train-gan", help="train the conditional GAN")
    s.add_argument("--config")
    s.add_argument("--paintings")
    s.add_argument("--eeg")
    s.add_argument("--encoder-ckpt")
    s.add_argument("--out-g")
    s.add_argument("--out-d")
    s.set_defaults(func=cmd_train_gan)

    s = sub.add_parser("generate", help="paint every epoch of a CSV")
    s.add_argument("--config")
    s.add_argument("--encoder-ckpt")
    s.add_argument("--g-ckpt")
    s.add_argument("--epoch-csv")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--upscale", type=int, default=1)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("stream", help="paint live from a Cyton byte stream")
    s.add_argument("--config")
    s.add_argument("--source", required=True, help="PATH, file:PATH, stdin or tcp:HOST:PORT")
    s.add_argument("--encoder-ckpt")
    s.add_argument("--g-ckpt")
    s.add_argument("--window-seconds", type=float, default=5.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--upscale", type=int, default=1)
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("eval-fairness", help="per-subject accuracy gap of an encoder")
    s.add_argument("--config")
    s.add_argument("--encoder-ckpt")
    s.add_argument("--data")
    s.set_defaults(func=cmd_eval_fairness)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, parser)
    except (EegPaintError, OSError, ValueError) as exc:
        print(f"eegpaint {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
