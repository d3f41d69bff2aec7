"""Regularised graph neural network that encodes EEG features into an emotion latent.

Forward pass for standardised features ``X`` (electrodes x bands)::

    A_eff = normalize(relu(A_base + dA) with zero diagonal)
    H1 = leaky_relu(A_eff X W1)
    H2 = leaky_relu(A_eff H1 W2)
    latent = leaky_relu(vec(H2) Wp)        # length L > number of classes
    logits = latent Wc

``dA`` is learnable, symmetric (stored as its strict upper triangle) and
L1-penalised.  Features are standardised per band (shared over electrodes,
which keeps the model equivariant to electrode relabelling).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ClassMissing, InsufficientData, ShapeMismatch
from .features import DEFAULT_BANDS, DEFAULT_THETA, BandDef, default_montage, extract_features
from .ingest import EegDataset, EegEpoch
from .labels import NUM_CLASSES, EmotionLabel
from .rng import Pcg32

TRAINABLE = ("delta_upper", "w1", "w2", "wp", "wc")
MIN_EPOCHS = 40


@dataclass
class EncoderModel:
    base_adjacency: np.ndarray
    delta_upper: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    wp: np.ndarray
    wc: np.ndarray
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    bands: tuple[BandDef, ...] = DEFAULT_BANDS

    def __post_init__(self):
        n = self.base_adjacency.shape[0]
        b, h = self.w1.shape
        if self.latent_dim <= NUM_CLASSES:
            raise ValueError(f"latent dim must exceed class count ({self.latent_dim} <= {NUM_CLASSES})")
        expect = {
            "base_adjacency": (n, n),
            "delta_upper": (n * (n - 1) // 2,),
            "w2": (h, h),
            "wp": (n * h, self.latent_dim),
            "wc": (self.latent_dim, NUM_CLASSES),
            "feature_mean": (b,),
            "feature_scale": (b,),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ShapeMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if len(self.bands) != b:
            raise ShapeMismatch("band list does not match W1")

    @property
    def n_nodes(self) -> int:
        return self.base_adjacency.shape[0]

    @property
    def n_bands(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.wp.shape[1]

    def params(self) -> dict:
        return {k: getattr(self, k) for k in TRAINABLE}

    def replace(self, **arrays) -> "EncoderModel":
        fields = {k: getattr(self, k) for k in self.__dataclass_fields__}
        fields.update(arrays)
        return EncoderModel(**fields)

    @property
    def delta_adjacency(self) -> np.ndarray:
        return upper_to_full(self.delta_upper, self.n_nodes)


@dataclass
class EncoderHyper:
    hidden: int = 16
    latent: int = 16
    lam: float = 1e-3
    lr: float = 1e-3
    batch: int = 16
    passes: int = 30
    seed: int = 0
    val_fraction: float = 0.2
    bands: tuple[BandDef, ...] = DEFAULT_BANDS
    theta: float = DEFAULT_THETA


@dataclass
class TrainReport:
    losses: list[float] = field(default_factory=list)
    train_accuracy: float = 0.0
    val_accuracy: float = 0.0
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64))
    val_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _scatter_matrix(n: int, dtype) -> np.ndarray:
    """``(n*n, n(n-1)/2)`` 0/1 matrix mapping a strict upper triangle to a symmetric matrix."""
    iu = np.triu_indices(n, k=1)
    m = len(iu[0])
    p = np.zeros((n * n, m), dtype=dtype)
    k = np.arange(m)
    p[iu[0] * n + iu[1], k] = 1
    p[iu[1] * n + iu[0], k] = 1
    return p


def upper_to_full(upper, n: int) -> np.ndarray:
    out = np.zeros((n, n), dtype=np.asarray(upper).dtype)
    iu = np.triu_indices(n, k=1)
    out[iu] = upper
    out[(iu[1], iu[0])] = upper
    return out


def full_to_upper(mat) -> np.ndarray:
    mat = np.asarray(mat)
    return mat[np.triu_indices(mat.shape[0], k=1)].copy()


def init_encoder(
    n_nodes: int,
    base_adjacency: np.ndarray | None = None,
    hyper: EncoderHyper | None = None,
    dtype=np.float32,
) -> EncoderModel:
    """He-initialised weights, zero ``dA``, identity feature scaling."""
    hyper = hyper or EncoderHyper()
    if hyper.latent <= NUM_CLASSES:
        raise ValueError(f"latent dim must exceed class count ({hyper.latent} <= {NUM_CLASSES})")
    if base_adjacency is None:
        base_adjacency = default_montage(n_nodes, hyper.theta).adjacency
    b, h, L = len(hyper.bands), hyper.hidden, hyper.latent
    rng = Pcg32(hyper.seed, stream=1)
    return EncoderModel(
        base_adjacency=np.asarray(base_adjacency, dtype=dtype),
        delta_upper=np.zeros(n_nodes * (n_nodes - 1) // 2, dtype=dtype),
        w1=ad.he_normal(rng, (b, h), b, dtype),
        w2=ad.he_normal(rng, (h, h), h, dtype),
        wp=ad.he_normal(rng, (n_nodes * h, L), n_nodes * h, dtype),
        wc=ad.he_normal(rng, (L, NUM_CLASSES), L, dtype),
        feature_mean=np.zeros(b, dtype=dtype),
        feature_scale=np.ones(b, dtype=dtype),
        bands=tuple(hyper.bands),
    )


# --------------------------------------------------------------------------
# graph forward pass on tensors
# --------------------------------------------------------------------------

def effective_adjacency_t(delta_upper, base: np.ndarray) -> ad.Tensor:
    n = base.shape[0]
    delta_upper = ad.as_tensor(delta_upper)
    dtype = delta_upper.dtype
    delta = ad.reshape(ad.matmul(_scatter_matrix(n, dtype), ad.reshape(delta_upper, (-1, 1))), (n, n))
    off_diag = (1 - np.eye(n)).astype(dtype)
    a = ad.mul(ad.relu(ad.add(ad.Tensor(base.astype(dtype)), delta)), ad.Tensor(off_diag))
    a_hat = ad.add(a, ad.Tensor(np.eye(n, dtype=dtype)))
    s = ad.power(ad.sum(a_hat, axis=1, keepdims=True), -0.5)
    return ad.mul(a_hat, ad.matmul(s, ad.transpose(s)))


def effective_adjacency(model: EncoderModel) -> np.ndarray:
    return effective_adjacency_t(ad.Tensor(model.delta_upper), model.base_adjacency).data


def _graph_mix(adj: ad.Tensor, h: ad.Tensor) -> ad.Tensor:
    # apply the (n, n) adjacency to every sample of an (N, n, f) batch
    batch, n, f = h.shape
    flat = ad.reshape(ad.transpose(h, (1, 0, 2)), (n, batch * f))
    mixed = ad.reshape(ad.matmul(adj, flat), (n, batch, f))
    return ad.transpose(mixed, (1, 0, 2))


def forward_t(p: dict, x, base: np.ndarray):
    """Latent and logits tensors for standardised features ``x`` of shape ``(N, n, bands)``."""
    x = ad.as_tensor(x)
    batch, n, b = x.shape
    adj = effective_adjacency_t(p["delta_upper"], base)
    w1, w2 = ad.as_tensor(p["w1"]), ad.as_tensor(p["w2"])
    h = w1.shape[1]
    xw = ad.reshape(ad.matmul(ad.reshape(x, (batch * n, b)), w1), (batch, n, h))
    h1 = ad.leaky_relu(_graph_mix(adj, xw))
    hw = ad.reshape(ad.matmul(ad.reshape(h1, (batch * n, h)), w2), (batch, n, h))
    h2 = ad.leaky_relu(_graph_mix(adj, hw))
    latent = ad.leaky_relu(ad.matmul(ad.reshape(h2, (batch, n * h)), p["wp"]))
    logits = ad.matmul(latent, p["wc"])
    return latent, logits


def standardize(features: np.ndarray, model: EncoderModel) -> np.ndarray:
    return (features - model.feature_mean) / model.feature_scale


def encoder_forward(features, model: EncoderModel):
    """``(latent, logits)`` for one ``(n, bands)`` feature matrix or an ``(N, n, bands)`` batch."""
    f = np.asarray(features)
    single = f.ndim == 2
    if single:
        f = f[None]
    if f.shape[1:] != (model.n_nodes, model.n_bands):
        raise ShapeMismatch(f"features {f.shape[1:]} do not match model ({model.n_nodes}, {model.n_bands})")
    dtype = model.w1.dtype
    x = standardize(f, model).astype(dtype)
    params = {k: ad.Tensor(v) for k, v in model.params().items()}
    latent, logits = forward_t(params, x, model.base_adjacency)
    if single:
        return latent.data[0], logits.data[0]
    return latent.data, logits.data


def encoder_loss(logits, labels, delta_upper, lam: float) -> ad.Tensor:
    """Cross-entropy plus ``lam * ||dA||_1`` over the full symmetric ``dA``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    ce = ad.softmax_cross_entropy(logits, labels)
    if lam == 0:
        return ce
    l1 = ad.mul(ad.sum(ad.abs(delta_upper)), 2.0 * lam)
    return ad.add(ce, l1)


# --------------------------------------------------------------------------
# training and inference
# --------------------------------------------------------------------------

def _check_dataset(dataset: EegDataset):
    if len(dataset) < MIN_EPOCHS:
        raise InsufficientData(f"need at least {MIN_EPOCHS} labelled epochs, got {len(dataset)}")
    if any(lab is None for lab in dataset.labels):
        raise InsufficientData("every epoch needs a label")
    missing = [lab.slug for lab, c in dataset.class_counts().items() if c == 0]
    if missing:
        raise ClassMissing(f"no epochs for class(es): {', '.join(missing)}")


def stratified_split(labels: np.ndarray, val_fraction: float, rng: Pcg32):
    train, val = [], []
    for c in range(NUM_CLASSES):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        k = int(round(len(idx) * val_fraction))
        val.extend(idx[:k])
        train.extend(idx[k:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(val, dtype=np.int64))


def confusion_matrix(truth, pred) -> np.ndarray:
    cm = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(cm, (np.asarray(truth, dtype=np.int64), np.asarray(pred, dtype=np.int64)), 1)
    return cm


def train_encoder(dataset: EegDataset, hyper: EncoderHyper | None = None):
    """Mini-batch Adam on cross-entropy + L1(dA).  Deterministic in ``hyper.seed``."""
    hyper = hyper or EncoderHyper()
    _check_dataset(dataset)
    feats = np.stack([extract_features(e, hyper.bands) for e in dataset])
    labels = np.array([int(lab) for lab in dataset.labels], dtype=np.int64)
    rng = Pcg32(hyper.seed, stream=2)
    train_idx, val_idx = stratified_split(labels, hyper.val_fraction, rng)

    model = init_encoder(feats.shape[1], hyper=hyper)
    tr = feats[train_idx]
    mean = tr.mean(axis=(0, 1))
    scale = tr.std(axis=(0, 1)) + 1e-6
    model = model.replace(feature_mean=mean.astype(np.float32), feature_scale=scale.astype(np.float32))
    x_all = standardize(feats, model).astype(np.float32)

    state = ad.AdamState(lr=hyper.lr)
    params = model.params()
    report = TrainReport(val_indices=val_idx)
    for _ in range(hyper.passes):
        order = train_idx[rng.permutation(len(train_idx))]
        total, count = 0.0, 0
        for start in range(0, len(order), hyper.batch):
            sel = order[start:start + hyper.batch]
            tape = ad.Tape()
            pv = {k: tape.variable(v) for k, v in params.items()}
            _, logits = forward_t(pv, x_all[sel], model.base_adjacency)
            loss = encoder_loss(logits, labels[sel], pv["delta_upper"], hyper.lam)
            g = tape.backward(loss)
            params, state = ad.adam_step(params, {k: g[v] for k, v in pv.items()}, state)
            total += float(loss.data) * len(sel)
            count += len(sel)
        report.losses.append(total / count)

    model = model.replace(**params)
    pred = predict_features(feats, model)
    report.train_accuracy = float(np.mean(pred[train_idx] == labels[train_idx]))
    if len(val_idx):
        report.val_accuracy = float(np.mean(pred[val_idx] == labels[val_idx]))
        report.confusion = confusion_matrix(labels[val_idx], pred[val_idx])
    return model, report


def predict_features(features: np.ndarray, model: EncoderModel) -> np.ndarray:
    _, logits = encoder_forward(features, model)
    return np.argmax(logits, axis=-1)


def encode_epoch(epoch: EegEpoch, model: EncoderModel) -> np.ndarray:
    latent, _ = encoder_forward(extract_features(epoch, model.bands), model)
    return latent


def encode_epochs(epochs: Sequence[EegEpoch], model: EncoderModel) -> np.ndarray:
    feats = np.stack([extract_features(e, model.bands) for e in epochs])
    latent, _ = encoder_forward(feats, model)
    return latent


def predict(epoch: EegEpoch, model: EncoderModel):
    """Most likely label (lowest code wins ties) and the four class probabilities."""
    _, logits = encoder_forward(extract_features(epoch, model.bands), model)
    probs = ad.softmax(logits.astype(np.float64))
    return EmotionLabel(int(np.argmax(probs))), probs
