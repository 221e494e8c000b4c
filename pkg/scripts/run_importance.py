"""Permutation importance of the six features at 24 s."""

import argparse

from iotguard import knn
from iotguard.evaluation import labeled_windows, split_balance
from iotguard.flow_stats import PollingConfig
from iotguard.importance import permutation_importance
from iotguard.synth import build_corpus

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seed", type=int, default=7)
ap.add_argument("--repeats", type=int, default=10)
ap.add_argument("--interval", type=int, default=24)
args = ap.parse_args()

corpus = build_corpus(args.seed)
samples = labeled_windows(corpus.benign, corpus.attack, corpus.labels, PollingConfig(args.interval, 0))
train, test = split_balance(samples, 0.75, args.seed)
rep = permutation_importance(knn.fit(train), test, args.repeats, args.seed)
print(f"baseline accuracy {rep.baseline_accuracy:.4f}")
for name, share in sorted(rep.as_dict().items(), key=lambda kv: -kv[1]):
    print(f"{name:<18} {100 * share:6.2f}%  " + "#" * int(round(50 * share)))
