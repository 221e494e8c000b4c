"""Permutation feature importance for a fitted KNN model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import knn
from .features import FEATURE_NAMES, LabeledSample, to_matrix
from .labels import EmptyTestSet, derive_rng

IMPORTANCE_CSV_HEADER = "feature,raw_drop,relative_importance"


@dataclass
class ImportanceReport:
    relative: np.ndarray  # sums to 1
    raw_drops: np.ndarray  # mean accuracy drop per feature, clamped at 0
    repeats: int
    baseline_accuracy: float

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.relative.tolist()))

    def to_csv(self) -> str:
        lines = [IMPORTANCE_CSV_HEADER]
        for name, drop, rel in zip(FEATURE_NAMES, self.raw_drops, self.relative):
            lines.append(f"{name},{float(drop)!r},{float(rel)!r}")
        return "\n".join(lines) + "\n"


def permutation_importance(model: knn.KnnModel, test: Sequence[LabeledSample], repeats: int = 10,
                           seed: int = 0) -> ImportanceReport:
    if not test:
        raise EmptyTestSet("permutation importance needs test samples")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    X, y = to_matrix(test)
    base_pred, _ = knn.predict_many(model, X)
    baseline = float(np.mean(base_pred == y))

    drops = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        rng = derive_rng(seed, "importance", j)
        accs = []
        for _ in range(repeats):
            Xp = X.copy()
            Xp[:, j] = X[rng.permutation(X.shape[0]), j]
            pred, _ = knn.predict_many(model, Xp)
            accs.append(np.mean(pred == y))
        drops[j] = baseline - float(np.mean(accs))

    clamped = np.clip(drops, 0.0, None)
    total = clamped.sum()
    # no feature matters: split evenly so the fractions still sum to one
    relative = clamped / total if total > 0 else np.full(X.shape[1], 1.0 / X.shape[1])
    return ImportanceReport(relative, clamped, repeats, baseline)
