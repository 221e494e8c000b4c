"""The six stateless per-window features and min-max scaling."""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .flow_stats import NonCumulativeStat, PollingConfig, bucket_direct
from .labels import EmptyInput, EmptyWindow, MalformedRow, TrafficClass
from .trace_io import Trace

FEATURE_NAMES = ("icmp_pct", "tcp_pct", "udp_pct", "packet_count", "mean_packet_size", "ip_diversity")
N_FEATURES = len(FEATURE_NAMES)
FEATURES_CSV_HEADER = "device,window_index," + ",".join(FEATURE_NAMES) + ",label"


@dataclass(frozen=True)
class FeatureVector:
    icmp_pct: float
    tcp_pct: float
    udp_pct: float
    packet_count: float
    mean_packet_size: float
    ip_diversity: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "FeatureVector":
        values = [float(v) for v in values]
        if len(values) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} feature values, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class LabeledSample:
    features: FeatureVector
    label: TrafficClass
    device: str = ""
    window_index: int = 0


def extract(stat: NonCumulativeStat) -> FeatureVector:
    n = stat.packets
    if n <= 0:
        raise EmptyWindow(f"{stat.device} window {stat.window_index} has no packets")
    return FeatureVector(
        icmp_pct=100.0 * stat.icmp / n,
        tcp_pct=100.0 * stat.tcp / n,
        udp_pct=100.0 * stat.udp / n,
        packet_count=float(n),
        mean_packet_size=stat.bytes / n,
        ip_diversity=len(stat.dst_ip_counts) / n,
    )


def extract_matrix(stats: Sequence[NonCumulativeStat]) -> np.ndarray:
    """Stack :func:`extract` over ``stats`` into an ``(n, 6)`` array."""
    out = np.empty((len(stats), N_FEATURES), dtype=np.float64)
    for i, s in enumerate(stats):
        out[i] = extract(s).as_array()
    return out


def label_stats(stats: Iterable[NonCumulativeStat], labels: Mapping[str, TrafficClass],
                default: Optional[TrafficClass] = None) -> list[LabeledSample]:
    """Attach class labels by device; devices without a label are skipped unless ``default``."""
    out = []
    for s in stats:
        label = labels.get(s.device, default)
        if label is None:
            continue
        out.append(LabeledSample(extract(s), TrafficClass(label), s.device, s.window_index))
    return out


def samples_from_traces(traces: Sequence[tuple[Trace, Mapping[str, TrafficClass], Optional[TrafficClass]]],
                        cfg: PollingConfig) -> list[LabeledSample]:
    samples: list[LabeledSample] = []
    for trace, labels, default in traces:
        samples.extend(label_stats(bucket_direct(trace, cfg), labels, default))
    return samples


def to_matrix(samples: Sequence[LabeledSample]) -> tuple[np.ndarray, np.ndarray]:
    X = np.array([astuple(s.features) for s in samples], dtype=np.float64).reshape(-1, N_FEATURES)
    y = np.array([int(s.label) for s in samples], dtype=np.int64)
    return X, y


@dataclass(frozen=True)
class Normalizer:
    """Per-feature bounds fitted on training data."""

    mins: np.ndarray
    maxs: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        span = self.maxs - self.mins
        degenerate = span <= 0
        scaled = (X - self.mins) / np.where(degenerate, 1.0, span)
        scaled = np.clip(scaled, 0.0, 1.0)
        return np.where(degenerate, 0.0, scaled)

    def __eq__(self, other):
        if not isinstance(other, Normalizer):
            return NotImplemented
        return np.array_equal(self.mins, other.mins) and np.array_equal(self.maxs, other.maxs)

    __hash__ = None


def fit_normalizer(samples: Sequence[FeatureVector] | np.ndarray) -> Normalizer:
    if isinstance(samples, np.ndarray):
        X = samples.reshape(-1, N_FEATURES).astype(np.float64)
    else:
        X = np.array([astuple(v) for v in samples], dtype=np.float64).reshape(-1, N_FEATURES)
    if X.shape[0] == 0:
        raise EmptyInput("cannot fit a normalizer on zero samples")
    return Normalizer(X.min(axis=0), X.max(axis=0))


def apply_normalizer(n: Normalizer, v: FeatureVector) -> FeatureVector:
    return FeatureVector.from_array(n.transform(v.as_array()))


def samples_to_csv(samples: Iterable[LabeledSample]) -> str:
    lines = [FEATURES_CSV_HEADER]
    for s in samples:
        vals = ",".join(repr(float(x)) for x in astuple(s.features))
        lines.append(f"{s.device},{s.window_index},{vals},{s.label.token}")
    return "\n".join(lines) + "\n"


def features_to_csv(stats: Sequence[NonCumulativeStat], labels: Mapping[str, TrafficClass]) -> str:
    """Feature rows for every stat; the label column is empty for unlabeled devices."""
    lines = [FEATURES_CSV_HEADER]
    for s in stats:
        vals = ",".join(repr(float(x)) for x in astuple(extract(s)))
        label = labels.get(s.device)
        lines.append(f"{s.device},{s.window_index},{vals},{label.token if label is not None else ''}")
    return "\n".join(lines) + "\n"


def read_features_csv(text: str) -> list[tuple[str, int, FeatureVector, Optional[TrafficClass]]]:
    lines = text.split("\n")
    if not lines or lines[0].rstrip("\r") != FEATURES_CSV_HEADER:
        raise MalformedRow(1, f"header must be {FEATURES_CSV_HEADER!r}")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != N_FEATURES + 3:
            raise MalformedRow(lineno, f"expected {N_FEATURES + 3} columns, got {len(fields)}")
        try:
            window = int(fields[1])
            vec = FeatureVector.from_array(float(x) for x in fields[2:2 + N_FEATURES])
            label = TrafficClass.parse(fields[-1]) if fields[-1].strip() else None
        except ValueError as exc:
            raise MalformedRow(lineno, str(exc)) from None
        rows.append((fields[0], window, vec, label))
    return rows
