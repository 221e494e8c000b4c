"""Shrink the 24 s training set while accuracy stays above a floor."""

import argparse

from iotguard.evaluation import labeled_windows, split_balance
from iotguard.flow_stats import PollingConfig
from iotguard.minimizer import minimize
from iotguard.synth import build_corpus

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=7)
ap.add_argument("--threshold", type=float, default=0.95)
ap.add_argument("--step", type=float, default=0.1)
args = ap.parse_args()

corpus = build_corpus(args.seed)
samples = labeled_windows(corpus.benign, corpus.attack, corpus.labels, PollingConfig(24, 0))
train, test = split_balance(samples, 0.75, args.seed)
res = minimize(train, test, args.threshold, args.step, args.seed)
for n, acc in res.size_curve:
    print(f"{n:6d}  {acc:.4f}")
if res.rejected:
    print(f"stopped: {res.rejected[0]} rows gave {res.rejected[1]:.4f}")
print(f"kept {len(res.reduced_train)} of {len(train)} rows")
