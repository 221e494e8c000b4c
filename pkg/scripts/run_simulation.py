"""Seeded controller runs: benign devices plus one flooding device at 24 s polling."""

import argparse

from iotguard import knn
from iotguard.evaluation import labeled_windows, split_balance
from iotguard.flow_stats import PollingConfig
from iotguard.labels import derive_rng
from iotguard.sdn_sim import ControllerConfig, run_simulation, summarize, summary_table
from iotguard.synth import AttackKind, AttackSpec, build_corpus, default_profiles, device_ip, generate_attack, generate_benign


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--runs", type=int, default=50)
    ap.add_argument("--duration", type=float, default=900.0)
    ap.add_argument("--show", type=int, default=1, help="print the event table of the first N runs")
    args = ap.parse_args()

    corpus = build_corpus(args.seed)
    samples = labeled_windows(corpus.benign, corpus.attack, corpus.labels, PollingConfig(24, 0))
    model = knn.fit(split_balance(samples, 0.75, args.seed)[0])
    cfg = ControllerConfig()
    latencies, benign_removed = [], 0
    for run in range(args.runs):
        rng = derive_rng(args.seed, "script-sim", run)
        traces = {f"{c.token}-{run}": generate_benign(p, f"{c.token}-{run}", args.duration, args.seed * 1000 + run)
                  for c, p in default_profiles().items()}
        spec = AttackSpec(list(AttackKind)[run % 3], device_ip(next(iter(traces))),
                          rate=float(rng.uniform(25, 100)), duration=600,
                          start_us=int(rng.uniform(0, 300) * 1e6))
        traces["attacker"] = generate_attack(spec, "attacker", args.seed * 1000 + run)
        events = run_simulation(traces, model, cfg, args.duration, origin=0)
        if run < args.show:
            print(summary_table(events, cfg), "\n")
        out = summarize(events)
        first = traces["attacker"].timestamp[0] / 1e6
        removed = out["attacker"].removed
        latencies.append(float("inf") if removed is None else removed - first)
        benign_removed += sum(o.removed is not None for d, o in out.items() if d != "attacker")
    on_time = sum(lat <= cfg.detection_deadline for lat in latencies)
    print(f"removed within {cfg.detection_deadline:.0f} s: {on_time}/{args.runs}; "
          f"worst {max(latencies):.1f} s; benign removed: {benign_removed}")


if __name__ == "__main__":
    main()
