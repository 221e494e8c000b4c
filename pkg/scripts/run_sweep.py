"""Accuracy and feature spread across polling intervals on the synthetic corpus."""

import argparse
import sys

from iotguard.evaluation import DEFAULT_INTERVALS, sweep_intervals
from iotguard.features import FEATURE_NAMES
from iotguard.labels import TrafficClass
from iotguard.synth import build_corpus


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--hours", type=float, default=5.0)
    ap.add_argument("--intervals", default=",".join(map(str, DEFAULT_INTERVALS)))
    ap.add_argument("--csv", help="also write the sweep CSV here")
    args = ap.parse_args()

    corpus = build_corpus(args.seed, hours=args.hours)
    intervals = [int(x) for x in args.intervals.split(",")]
    res = sweep_intervals(corpus.benign, corpus.attack, intervals, args.seed, corpus.labels, origin=0)
    print(f"{'T':>4} {'overall':>8} {'ddos':>7}  " + " ".join(f"{n[:8]:>8}" for n in FEATURE_NAMES))
    for t, e in sorted(res.entries.items()):
        stds = " ".join(f"{s:8.4f}" for s in e.feature_std)
        print(f"{t:>4} {e.report.overall_accuracy:8.4f} {e.report.accuracy(TrafficClass.DDOS):7.4f}  {stds}")
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(res.to_csv())
        print(f"wrote {args.csv}", file=sys.stderr)


if __name__ == "__main__":
    main()
