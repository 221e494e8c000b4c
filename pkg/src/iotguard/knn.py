"""Brute-force k-nearest-neighbours over the six window features.

Neighbour selection is a stable sort on Euclidean distance, so equal
distances resolve to the lower training-row index. A vote tie goes to the
class whose voters have the smaller summed distance, then to the class
declared first in :class:`TrafficClass`.

Model file layout (little-endian)::

    b"KNN1"  k:u32  N:u32  d:u32  flags:u32     flags bit 0 = min-max scaling on
    mins[d]:f64  maxs[d]:f64
    rows[N*d]:f64 (row-major)
    labels[N]:u8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import N_FEATURES, FeatureVector, LabeledSample, Normalizer, fit_normalizer, to_matrix
from .labels import BadMagic, LengthMismatch, N_CLASSES, SingleClass, TooFewSamples, TrafficClass

MAGIC = b"KNN1"
_HEADER = struct.Struct("<4sIIII")
FLAG_NORMALIZED = 1
DEFAULT_K = 5
_CHUNK = 256


def validate_k(k: int) -> int:
    if not isinstance(k, (int, np.integer)) or k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class Prediction:
    label: TrafficClass
    neighbor_votes: dict[TrafficClass, int]
    mean_neighbor_distance: float


@dataclass(frozen=True, eq=False)
class KnnModel:
    k: int
    training_matrix: np.ndarray  # (N, 6), scaled when normalizer is set
    labels: np.ndarray  # (N,) class codes
    normalizer: Optional[Normalizer] = None
    metric: str = field(default="euclidean")

    @property
    def n_rows(self) -> int:
        return int(self.training_matrix.shape[0])

    def prepare(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64).reshape(-1, N_FEATURES)
        return self.normalizer.transform(X) if self.normalizer is not None else X


def fit(samples: Sequence[LabeledSample], k: int = DEFAULT_K, normalize: bool = True) -> KnnModel:
    k = validate_k(k)
    if len(samples) < k:
        raise TooFewSamples(f"need at least k={k} samples, got {len(samples)}")
    X, y = to_matrix(samples)
    return fit_arrays(X, y, k, normalize)


def fit_arrays(X: np.ndarray, y: np.ndarray, k: int = DEFAULT_K, normalize: bool = True) -> KnnModel:
    k = validate_k(k)
    X = np.array(X, dtype=np.float64).reshape(-1, N_FEATURES)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] != y.shape[0]:
        raise LengthMismatch("feature rows and labels differ in length")
    if X.shape[0] < k:
        raise TooFewSamples(f"need at least k={k} samples, got {X.shape[0]}")
    if np.unique(y).size < 2:
        raise SingleClass("training data must contain at least two classes")
    norm = fit_normalizer(X) if normalize else None
    rows = norm.transform(X) if norm is not None else X
    rows.setflags(write=False)
    labels = y.astype(np.uint8)
    labels.setflags(write=False)
    return KnnModel(k, rows, labels, norm)


def _distances(rows: np.ndarray, Q: np.ndarray) -> np.ndarray:
    # feature-by-feature accumulation keeps the summation order fixed
    d2 = np.zeros((Q.shape[0], rows.shape[0]))
    diff = np.empty_like(d2)
    cols = np.ascontiguousarray(rows.T)
    for f in range(rows.shape[1]):
        np.subtract(Q[:, f, None], cols[f][None, :], out=diff)
        np.multiply(diff, diff, out=diff)
        d2 += diff
    return np.sqrt(d2, out=d2)


def _nearest(D: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows, ordered by (distance, row index).

    Same result as a stable argsort truncated to k, in linear time per row:
    everything strictly closer than the k-th distance is taken, and the
    remaining slots go to the lowest-index rows at exactly that distance.
    """
    kth = np.partition(D, k - 1, axis=1)[:, k - 1:k]
    closer = D < kth
    room = k - closer.sum(axis=1, keepdims=True)
    at_kth = D == kth
    take = closer | (at_kth & (np.cumsum(at_kth, axis=1) <= room))
    idx = np.nonzero(take)[1].reshape(D.shape[0], k)  # ascending row index
    order = np.argsort(np.take_along_axis(D, idx, axis=1), axis=1, kind="stable")
    return np.take_along_axis(idx, order, axis=1)


def _vote(model: KnnModel, Q: np.ndarray):
    """Neighbour votes for prepared queries: (labels, votes[q, C], mean_dist[q])."""
    k = model.k
    D = _distances(model.training_matrix, Q)
    idx = _nearest(D, k)
    nd = np.take_along_axis(D, idx, axis=1)
    nl = model.labels[idx].astype(np.int64)
    q = Q.shape[0]
    votes = np.zeros((q, N_CLASSES), dtype=np.int64)
    dsum = np.zeros((q, N_CLASSES))
    rows = np.repeat(np.arange(q), k)
    np.add.at(votes, (rows, nl.ravel()), 1)
    np.add.at(dsum, (rows, nl.ravel()), nd.ravel())
    top = votes.max(axis=1, keepdims=True)
    score = np.where(votes == top, dsum, np.inf)
    label = np.argmin(score, axis=1)  # first minimum = earliest declared class
    return label, votes, nd.mean(axis=1)


def predict(model: KnnModel, v: FeatureVector | np.ndarray) -> Prediction:
    x = v.as_array() if isinstance(v, FeatureVector) else np.asarray(v, dtype=np.float64)
    label, votes, mean_d = _vote(model, model.prepare(x))
    counts = {TrafficClass(c): int(n) for c, n in enumerate(votes[0]) if n}
    return Prediction(TrafficClass(int(label[0])), counts, float(mean_d[0]))


def predict_many(model: KnnModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batch predictions for raw feature rows: (label codes, mean neighbour distance)."""
    Q = model.prepare(X)
    labels = np.empty(Q.shape[0], dtype=np.int64)
    dists = np.empty(Q.shape[0])
    for lo in range(0, Q.shape[0], _CHUNK):
        lab, _, md = _vote(model, Q[lo:lo + _CHUNK])
        labels[lo:lo + _CHUNK] = lab
        dists[lo:lo + _CHUNK] = md
    return labels, dists


def serialize(model: KnnModel) -> bytes:
    n, d = model.training_matrix.shape
    flags = FLAG_NORMALIZED if model.normalizer is not None else 0
    if model.normalizer is not None:
        mins, maxs = model.normalizer.mins, model.normalizer.maxs
    else:
        mins, maxs = np.zeros(d), np.zeros(d)
    return b"".join([
        _HEADER.pack(MAGIC, model.k, n, d, flags),
        np.asarray(mins, dtype="<f8").tobytes(),
        np.asarray(maxs, dtype="<f8").tobytes(),
        np.ascontiguousarray(model.training_matrix, dtype="<f8").tobytes(),
        np.asarray(model.labels, dtype=np.uint8).tobytes(),
    ])


def deserialize(data: bytes) -> KnnModel:
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagic("not a KNN1 model file")
    if len(data) < _HEADER.size:
        raise LengthMismatch("truncated model header")
    _, k, n, d, flags = _HEADER.unpack_from(data, 0)
    if d != N_FEATURES:
        raise LengthMismatch(f"model has {d} features, expected {N_FEATURES}")
    expected = _HEADER.size + 8 * (2 * d + n * d) + n
    if len(data) != expected:
        raise LengthMismatch(f"model file is {len(data)} bytes, header implies {expected}")
    off = _HEADER.size
    mins = np.frombuffer(data, "<f8", d, off).astype(np.float64)
    maxs = np.frombuffer(data, "<f8", d, off + 8 * d).astype(np.float64)
    off += 16 * d
    rows = np.frombuffer(data, "<f8", n * d, off).astype(np.float64).reshape(n, d)
    labels = np.frombuffer(data, np.uint8, n, off + 8 * n * d).copy()
    if labels.size and labels.max() >= N_CLASSES:
        raise LengthMismatch("label byte outside the class range")
    rows.setflags(write=False)
    labels.setflags(write=False)
    norm = Normalizer(mins, maxs) if flags & FLAG_NORMALIZED else None
    return KnnModel(validate_k(k), rows, labels, norm)
