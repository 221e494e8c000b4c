"""Shared test data generators."""

import math

import numpy as np

from iotguard.trace_io import Trace


def random_trace(rng: np.random.Generator, n: int, n_devices: int = 3, span_s: float = 300.0,
                 n_dst: int = 6, origin_us: int = 0) -> Trace:
    """Unstructured random packets, including some before ``origin_us``."""
    lead = int(0.05 * span_s * 1e6)
    ts = rng.integers(origin_us - lead, origin_us + int(span_s * 1e6), size=n)
    proto = rng.integers(0, 4, size=n)
    syn = (proto == 1) & (rng.random(n) < 0.3)
    return Trace(ts, rng.integers(0, n_devices, size=n), [f"dev-{i}" for i in range(n_devices)],
                 rng.integers(1, 2**32 - 1, size=n), 167772160 + rng.integers(0, n_dst, size=n),
                 proto, rng.integers(0, 1515, size=n), syn, "random")


def oracle_knn(train_X, train_y, queries, k, normalize=True):
    """Plain-Python k-NN with the documented tie rules, used as a reference.

    Returns one ``(label, votes_by_class)`` pair per query.
    """
    train_X = [list(map(float, r)) for r in train_X]
    queries = [list(map(float, q)) for q in queries]
    d = len(train_X[0])
    if normalize:
        lo = [min(r[j] for r in train_X) for j in range(d)]
        hi = [max(r[j] for r in train_X) for j in range(d)]

        def scale(row):
            out = []
            for j, x in enumerate(row):
                if hi[j] <= lo[j]:
                    out.append(0.0)
                else:
                    out.append(min(1.0, max(0.0, (x - lo[j]) / (hi[j] - lo[j]))))
            return out

        train_X = [scale(r) for r in train_X]
        queries = [scale(q) for q in queries]
    results = []
    for q in queries:
        dists = []
        for i, r in enumerate(train_X):
            acc = 0.0
            for j in range(d):
                acc += (q[j] - r[j]) * (q[j] - r[j])
            dists.append((math.sqrt(acc), i))
        dists.sort()
        votes, dsum = {}, {}
        for dist, i in dists[:k]:
            c = int(train_y[i])
            votes[c] = votes.get(c, 0) + 1
            dsum[c] = dsum.get(c, 0.0) + dist
        best = min(votes, key=lambda c: (-votes[c], dsum[c], c))
        results.append((best, votes))
    return results
