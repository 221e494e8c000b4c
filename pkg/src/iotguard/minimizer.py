"""Training-set reduction by stratified random dropout."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import knn
from .evaluation import evaluate
from .features import LabeledSample
from .labels import EmptyTrain, derive_rng


@dataclass
class MinimizeResult:
    reduced_train: list[LabeledSample]
    size_curve: list[tuple[int, float]]  # accepted sizes only, strictly decreasing
    final_accuracy: float
    met_threshold: bool
    rejected: Optional[tuple[int, float]] = None  # first size that fell below threshold
    filtered_out: int = 0

    def curve_csv(self) -> str:
        lines = ["train_size,accuracy"] + [f"{n},{a!r}" for n, a in self.size_curve]
        return "\n".join(lines) + "\n"


def _drop_step(groups: dict, step_fraction: float, floor: int, rng: np.random.Generator) -> dict:
    out = {}
    for cls, members in groups.items():
        n = len(members)
        drop = min(math.ceil(step_fraction * n), max(n - floor, 0))
        if drop <= 0:
            out[cls] = members
            continue
        gone = set(rng.choice(n, size=drop, replace=False).tolist())
        out[cls] = [m for i, m in enumerate(members) if i not in gone]
    return out


def minimize(train: Sequence[LabeledSample], test: Sequence[LabeledSample], threshold: float = 0.95,
             step_fraction: float = 0.1, seed: int = 0, k: int = knn.DEFAULT_K, normalize: bool = True,
             signaling_filter: Optional[Callable[[LabeledSample], bool]] = None) -> MinimizeResult:
    """Shrink ``train`` while accuracy on the fixed ``test`` set stays at or above ``threshold``.

    Each step drops ``ceil(step_fraction * n_c)`` random samples from every
    class (never below ``k`` per class), refits and re-scores. The last size
    that still met the threshold is returned; there is no backtracking.
    ``signaling_filter`` marks windows to discard before the loop starts.
    """
    if not 0.0 < step_fraction < 1.0:
        raise ValueError("step_fraction must lie strictly between 0 and 1")
    filtered = 0
    if signaling_filter is not None:
        kept = [s for s in train if not signaling_filter(s)]
        filtered = len(train) - len(kept)
        train = kept
    if not train:
        raise EmptyTrain("no training samples to minimise")

    model = knn.fit(train, k=k, normalize=normalize)
    acc = evaluate(model, test).overall_accuracy
    curve = [(len(train), acc)]
    if acc < threshold:
        return MinimizeResult(list(train), curve, acc, False, filtered_out=filtered)

    rng = derive_rng(seed, "minimize")
    groups: dict = {}
    for s in train:
        groups.setdefault(s.label, []).append(s)
    groups = dict(sorted(groups.items()))
    best, best_acc, rejected = list(train), acc, None
    while True:
        candidate = _drop_step(groups, step_fraction, k, rng)
        flat = [s for members in candidate.values() for s in members]
        if len(flat) >= len(best):
            break  # every class is at the k floor
        acc = evaluate(knn.fit(flat, k=k, normalize=normalize), test).overall_accuracy
        if acc < threshold:
            rejected = (len(flat), acc)
            break
        groups, best, best_acc = candidate, flat, acc
        curve.append((len(flat), acc))
    return MinimizeResult(best, curve, best_acc, True, rejected, filtered)
