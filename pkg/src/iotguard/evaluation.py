"""Splitting, accuracy reports, the polling-interval sweep and latency timing."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import knn
from .features import FEATURE_NAMES, LabeledSample, fit_normalizer, samples_from_traces, to_matrix
from .flow_stats import PollingConfig
from .labels import (ClassTooSmall, EmptyTestSet, InsufficientWindows, N_CLASSES, TrafficClass,
                     derive_rng)
from .trace_io import Trace

SWEEP_CSV_HEADER = ("interval,overall_acc,acc_switch,acc_camera,acc_hub,acc_ddos,"
                    "std_icmp,std_tcp,std_udp,std_count,std_size,std_div")
REPORT_CSV_HEADER = "class,test_count,correct,accuracy"
DEFAULT_INTERVALS = (1, 4, 8, 16, 24, 32, 48, 60, 90, 120)


def _by_class(samples: Sequence[LabeledSample]) -> dict[TrafficClass, list[int]]:
    groups: dict[TrafficClass, list[int]] = {}
    for i, s in enumerate(samples):
        groups.setdefault(s.label, []).append(i)
    return dict(sorted(groups.items()))


def balance(samples: Sequence[LabeledSample], seed: int) -> list[LabeledSample]:
    """Downsample every class (uniformly, without replacement) to the smallest class size."""
    groups = _by_class(samples)
    if not groups:
        return []
    m = min(len(g) for g in groups.values())
    out = []
    for cls, idx in groups.items():
        rng = derive_rng(seed, "balance", int(cls))
        keep = np.sort(rng.choice(len(idx), size=m, replace=False))
        out.extend(samples[idx[i]] for i in keep)
    return out


def split_balance(samples: Sequence[LabeledSample], train_fraction: float = 0.75,
                  seed: int = 0) -> tuple[list[LabeledSample], list[LabeledSample]]:
    """Balance classes by downsampling, then split each class ``train_fraction`` / rest."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    groups = _by_class(samples)
    small = {c.token: len(g) for c, g in groups.items() if len(g) < 2}
    if small:
        raise ClassTooSmall(f"classes with fewer than 2 samples: {small}")
    balanced = balance(samples, seed)
    pool = _by_class(balanced)
    train, test = [], []
    for cls, idx in pool.items():
        m = len(idx)
        n_train = min(max(1, math.floor(m * train_fraction + 1e-9)), m - 1)
        order = derive_rng(seed, "split", int(cls)).permutation(m)
        train.extend(balanced[idx[i]] for i in order[:n_train])
        test.extend(balanced[idx[i]] for i in order[n_train:])
    return train, test


@dataclass
class EvalReport:
    per_class_accuracy: dict[TrafficClass, float]
    overall_accuracy: float
    confusion: np.ndarray  # rows = true class, cols = predicted
    class_counts: dict[TrafficClass, int]

    def accuracy(self, cls: TrafficClass) -> float:
        return self.per_class_accuracy.get(cls, float("nan"))

    def to_csv(self) -> str:
        lines = [REPORT_CSV_HEADER]
        for cls in TrafficClass:
            n = self.class_counts.get(cls, 0)
            if n:
                lines.append(f"{cls.token},{n},{int(self.confusion[cls, cls])},{self.per_class_accuracy[cls]!r}")
        total = int(self.confusion.sum())
        lines.append(f"overall,{total},{int(np.trace(self.confusion))},{self.overall_accuracy!r}")
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = f"{'class':<14}{'n':>7}{'acc':>9}"
        rows = [head, "-" * len(head)]
        for cls in TrafficClass:
            if self.class_counts.get(cls):
                rows.append(f"{cls.token:<14}{self.class_counts[cls]:>7}{self.per_class_accuracy[cls]:>9.4f}")
        rows.append(f"{'overall':<14}{int(self.confusion.sum()):>7}{self.overall_accuracy:>9.4f}")
        return "\n".join(rows)


def report_from_predictions(y_true: np.ndarray, y_pred: np.ndarray) -> EvalReport:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise EmptyTestSet("evaluation needs at least one test sample")
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (y_true, y_pred), 1)
    counts = {TrafficClass(c): int(n) for c, n in enumerate(confusion.sum(axis=1)) if n}
    per_class = {c: float(confusion[c, c] / n) for c, n in counts.items()}
    return EvalReport(per_class, float(np.trace(confusion) / y_true.size), confusion, counts)


def evaluate(model: knn.KnnModel, test: Sequence[LabeledSample]) -> EvalReport:
    if not test:
        raise EmptyTestSet("evaluation needs at least one test sample")
    X, y = to_matrix(test)
    pred, _ = knn.predict_many(model, X)
    return report_from_predictions(y, pred)


def feature_std(samples: Sequence[LabeledSample]) -> np.ndarray:
    """Per-feature std-dev of min-max scaled features, averaged over classes.

    Scaling is fitted on all given samples; the spread is measured within each
    class (windows of one device category) and the class values are averaged.
    """
    X, y = to_matrix(samples)
    Z = fit_normalizer(X).transform(X)
    per_class = [Z[y == c].std(axis=0) for c in np.unique(y)]
    return np.mean(per_class, axis=0)


@dataclass
class SweepEntry:
    report: EvalReport
    feature_std: np.ndarray
    n_windows: dict[TrafficClass, int]


@dataclass
class SweepResult:
    entries: dict[int, SweepEntry]

    def to_csv(self) -> str:
        lines = [SWEEP_CSV_HEADER]
        for interval in sorted(self.entries):
            e = self.entries[interval]
            accs = ",".join(repr(float(e.report.accuracy(c))) for c in TrafficClass)
            stds = ",".join(repr(float(s)) for s in e.feature_std)
            lines.append(f"{interval},{e.report.overall_accuracy!r},{accs},{stds}")
        return "\n".join(lines) + "\n"


def corpus_origin(*traces: Trace) -> int:
    """Earliest timestamp across ``traces``, floored to a whole second."""
    firsts = [int(t.timestamp[0]) for t in traces if len(t)]
    return (min(firsts) // 1_000_000) * 1_000_000 if firsts else 0


def labeled_windows(benign: Trace, attack: Trace, labels: Mapping[str, TrafficClass],
                    cfg: PollingConfig) -> list[LabeledSample]:
    """Benign windows labelled by device category; every attack-trace window is DDoS."""
    return samples_from_traces([(benign, labels, None), (attack, {}, TrafficClass.DDOS)], cfg)


def run_interval(benign: Trace, attack: Trace, labels: Mapping[str, TrafficClass], interval: int,
                 seed: int, k: int = knn.DEFAULT_K, normalize: bool = True,
                 origin: Optional[int] = None) -> SweepEntry:
    """bucket -> extract -> balance/split -> fit -> evaluate, for one polling interval."""
    if origin is None:
        origin = corpus_origin(benign, attack)
    cfg = PollingConfig(interval, origin)
    samples = labeled_windows(benign, attack, labels, cfg)
    counts = {c: 0 for c in sorted(set(labels.values()) | {TrafficClass.DDOS})}
    for s in samples:
        counts[s.label] = counts.get(s.label, 0) + 1
    short = {c.token: n for c, n in counts.items() if n < k}
    if short:
        raise InsufficientWindows(interval, f"fewer than k={k} windows for {short}")
    train, test = split_balance(samples, 0.75, seed)
    model = knn.fit(train, k=k, normalize=normalize)
    return SweepEntry(evaluate(model, test), feature_std(samples), counts)


def sweep_intervals(benign: Trace, attack: Trace, intervals: Iterable[int], seed: int,
                    labels: Mapping[str, TrafficClass], k: int = knn.DEFAULT_K,
                    normalize: bool = True, origin: Optional[int] = None) -> SweepResult:
    intervals = sorted(set(int(i) for i in intervals))
    bad = [i for i in intervals if not 1 <= i <= 120]
    if bad:
        raise ValueError(f"intervals outside [1, 120]: {bad}")
    if origin is None:
        origin = corpus_origin(benign, attack)
    return SweepResult({i: run_interval(benign, attack, labels, i, seed, k, normalize, origin)
                        for i in intervals})


@dataclass(frozen=True)
class LatencyStats:
    mean_ms: float
    p95_ms: float
    trials: int


def benchmark_latency(model: knn.KnnModel, queries: np.ndarray, trials: int = 100,
                      warmup: int = 5) -> LatencyStats:
    """Wall-clock time of single predictions, cycling through ``queries``."""
    queries = np.asarray(queries, dtype=np.float64).reshape(-1, len(FEATURE_NAMES))
    if queries.shape[0] == 0:
        raise ValueError("benchmark needs at least one query")
    times = []
    for i in range(warmup + trials):
        q = queries[i % queries.shape[0]]
        t0 = time.perf_counter_ns()
        knn.predict(model, q)
        elapsed = time.perf_counter_ns() - t0
        if i >= warmup:
            times.append(elapsed / 1e6)
    arr = np.array(times)
    return LatencyStats(float(arr.mean()), float(np.percentile(arr, 95)), trials)
