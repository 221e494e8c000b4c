"""Single-query latency and model size as the training set grows."""

import argparse

import numpy as np

from iotguard import knn
from iotguard.evaluation import benchmark_latency

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--sizes", default="100,500,1820,5000,20000")
ap.add_argument("--trials", type=int, default=100)
ap.add_argument("--seed", type=int, default=0)
args = ap.parse_args()

rng = np.random.default_rng(args.seed)
queries = rng.random((200, 6))
print(f"{'rows':>7} {'mean ms':>9} {'p95 ms':>9} {'KB':>9}")
for n in (int(s) for s in args.sizes.split(",")):
    model = knn.fit_arrays(rng.random((n, 6)), np.arange(n) % 4)
    st = benchmark_latency(model, queries, args.trials)
    print(f"{n:>7} {st.mean_ms:9.4f} {st.p95_ms:9.4f} {len(knn.serialize(model)) / 1000:9.1f}")
