"""Per-subject accuracy disparity of the emotion encoder."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..encoder import EncoderModel, confusion_matrix, predict_features
from ..errors import InsufficientData, NeedTwoGroups
from ..features import extract_features
from ..ingest import EegDataset


@dataclass
class FairnessReport:
    accuracy: dict[str, float]
    counts: dict[str, int]
    confusion: dict[str, np.ndarray] = field(repr=False)
    gap: float = 0.0

    @property
    def best_group(self) -> str:
        return max(self.accuracy, key=lambda g: (self.accuracy[g], g))

    @property
    def worst_group(self) -> str:
        return min(self.accuracy, key=lambda g: (self.accuracy[g], g))

    def to_json(self) -> dict:
        return {
            "groups": sorted(self.accuracy),
            "accuracy": self.accuracy,
            "counts": self.counts,
            "gap": self.gap,
            "best_group": self.best_group,
            "worst_group": self.worst_group,
            "confusion": {g: m.tolist() for g, m in self.confusion.items()},
        }


def evaluate_fairness(model: EncoderModel, dataset: EegDataset) -> FairnessReport:
    """Accuracy per subject tag and the max pairwise gap (max minus min)."""
    if any(lab is None for lab in dataset.labels):
        raise InsufficientData("fairness evaluation needs labelled epochs")
    groups = [e.subject or "" for e in dataset]
    names = sorted(set(groups))
    if len(names) < 2:
        raise NeedTwoGroups(f"need at least two subject groups, found {len(names)}")
    feats = np.stack([extract_features(e, model.bands) for e in dataset])
    truth = np.array([int(lab) for lab in dataset.labels])
    pred = predict_features(feats, model)
    g = np.array(groups)
    acc, counts, conf = {}, {}, {}
    for name in names:
        m = g == name
        acc[name] = float(np.mean(pred[m] == truth[m]))
        counts[name] = int(m.sum())
        conf[name] = confusion_matrix(truth[m], pred[m])
    gap = max(acc.values()) - min(acc.values())
    return FairnessReport(acc, counts, conf, float(gap))
