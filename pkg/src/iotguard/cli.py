"""``iotguard`` command line.

All randomness flows from ``--seed`` through :func:`iotguard.labels.derive_rng`,
which hashes ``(seed, stream name, ...)`` into a numpy ``SeedSequence``.
Every file written gets a ``<file>.manifest.json`` next to it recording the
subcommand, flags, seed, inputs and tool version.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, knn
from .evaluation import (DEFAULT_INTERVALS, balance, benchmark_latency, corpus_origin,
                         labeled_windows, run_interval, split_balance, sweep_intervals)
from .features import LabeledSample, features_to_csv, read_features_csv, samples_to_csv
from .flow_stats import PollingConfig, bucket_direct, stats_to_csv
from .importance import permutation_importance
from .labels import IoTGuardError, TrafficClass
from .minimizer import minimize
from .sdn_sim import ControllerConfig, events_to_jsonl, run_simulation, summary_table
from .synth import (AttackKind, AttackSpec, build_corpus, default_profiles, device_ip,
                    generate_attack, generate_benign, override_profile, read_labels_csv)
from .trace_io import AttributionRule, Trace, read_csv, read_pcap, write_csv


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- output helpers ------------------------------------------------------------

class Run:
    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.argv = list(argv)
        self.inputs: list[str] = []

    def read_text(self, path) -> str:
        self.inputs.append(str(path))
        return Path(path).read_text(encoding="utf-8")

    def read_bytes(self, path) -> bytes:
        self.inputs.append(str(path))
        return Path(path).read_bytes()

    def manifest(self, output: str) -> dict:
        flags = {k: v for k, v in vars(self.args).items() if k != "func"}
        return {
            "subcommand": self.args.command,
            "argv": self.argv,
            "flags": flags,
            "seed": flags.get("seed"),
            "inputs": self.inputs,
            "output": output,
            "tool_version": __version__,
        }

    def emit(self, data, path: Optional[str]) -> None:
        """Write ``data`` atomically to ``path`` (plus manifest), or to stdout."""
        if path is None:
            sys.stdout.write(data if isinstance(data, str) else data.decode("latin-1"))
            return
        _atomic_write(path, data)
        _atomic_write(path + ".manifest.json", json.dumps(self.manifest(path), indent=2, default=str) + "\n")


def _atomic_write(path: str, data) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- shared corpus options -----------------------------------------------------

def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("corpus (synthesised from --seed when --trace is absent)")
    g.add_argument("--trace", help="benign trace CSV")
    g.add_argument("--attack-trace", help="attack trace CSV; every window is labelled DDoS")
    g.add_argument("--labels", help="device,label CSV for the benign trace")
    g.add_argument("--hours", type=float, default=5.0, help="synthetic benign hours per device")
    g.add_argument("--devices-per-category", type=int, default=4)
    g.add_argument("--runs-per-kind", type=int, default=18, help="600 s flood runs per attack kind")


def _load_corpus(run: Run):
    a = run.args
    if a.trace is None:
        c = build_corpus(a.seed, a.devices_per_category, a.hours, a.runs_per_kind)
        return c.benign, c.attack, c.labels, 0
    if a.labels is None:
        raise UsageError("--trace requires --labels")
    benign = read_csv(run.read_text(a.trace), a.trace)
    attack = read_csv(run.read_text(a.attack_trace), a.attack_trace) if a.attack_trace else Trace.empty()
    labels = read_labels_csv(run.read_text(a.labels))
    attack_devices = set(attack.devices)
    labels = {d: c for d, c in labels.items() if d not in attack_devices}
    return benign, attack, labels, corpus_origin(benign, attack)


def _split(run: Run, interval: int):
    benign, attack, labels, origin = _load_corpus(run)
    samples = labeled_windows(benign, attack, labels, PollingConfig(interval, origin))
    return split_balance(samples, 0.75, run.args.seed)


def _intervals(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad interval list {text!r}") from None
    if not values or any(not 1 <= v <= 120 for v in values):
        raise argparse.ArgumentTypeError("intervals must be integers in [1, 120]")
    return values


def _interval(text: str) -> int:
    values = _intervals(text)
    if len(values) != 1:
        raise argparse.ArgumentTypeError(f"expected a single interval, got {text!r}")
    return values[0]


def _odd_k(text: str) -> int:
    try:
        return knn.validate_k(int(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


# -- subcommands ---------------------------------------------------------------

def cmd_synth(run: Run) -> int:
    a = run.args
    profiles = default_profiles()
    for item in a.set or []:
        key, _, value = item.partition("=")
        cat, _, field = key.partition(".")
        cls = TrafficClass.parse(cat)
        if cls not in profiles or not field or not value:
            raise UsageError(f"bad --set {item!r}; expected CATEGORY.FIELD=VALUE")
        current = getattr(profiles[cls], field, None)
        if current is None or field == "category":
            raise UsageError(f"unknown profile field {field!r}")
        parsed = (tuple(float(x) for x in value.split(":")) if isinstance(current, tuple)
                  else type(current)(value))
        profiles[cls] = override_profile(profiles[cls], **{field: parsed})

    if a.mode == "corpus":
        if not a.out:
            raise UsageError("synth corpus needs --out DIR")
        c = build_corpus(a.seed, a.devices_per_category, a.hours, a.runs_per_kind, profiles=profiles)
        out = Path(a.out)
        run.emit(write_csv(c.benign), str(out / "benign.csv"))
        run.emit(write_csv(c.attack), str(out / "attack.csv"))
        run.emit(c.labels_csv(), str(out / "labels.csv"))
        return 0
    if a.mode == "benign":
        cls = TrafficClass.parse(a.category)
        if cls not in profiles:
            raise UsageError("--category must be a benign device category")
        device = a.device or f"{a.category}-0"
        trace = generate_benign(profiles[cls], device, a.duration, a.seed)
    else:
        device = a.device or "attacker-0"
        spec = AttackSpec(AttackKind.parse(a.attack), a.victim or device_ip("victim"), rate=a.rate,
                          duration=a.duration, spoof_sources=not a.no_spoof, packet_size=a.packet_size)
        trace = generate_attack(spec, device, a.seed)
    run.emit(write_csv(trace), a.out)
    return 0


def cmd_ingest(run: Run) -> int:
    a = run.args
    trace = read_pcap(run.read_bytes(a.pcap), AttributionRule(a.attribution), a.pcap)
    run.emit(write_csv(trace), a.out)
    return 0


def cmd_features(run: Run) -> int:
    a = run.args
    trace = read_csv(run.read_text(a.trace), a.trace)
    labels = read_labels_csv(run.read_text(a.labels)) if a.labels else {}
    origin = a.origin if a.origin is not None else corpus_origin(trace)
    stats = bucket_direct(trace, PollingConfig(a.interval, origin))
    if a.stats_out:
        run.emit(stats_to_csv(stats), a.stats_out)
    run.emit(features_to_csv(stats, labels), a.out)
    return 0


def _labeled_rows(run: Run, path: str) -> list[LabeledSample]:
    rows = read_features_csv(run.read_text(path))
    return [LabeledSample(vec, label, dev, w) for dev, w, vec, label in rows if label is not None]


def cmd_train(run: Run) -> int:
    a = run.args
    samples = _labeled_rows(run, a.features)
    if a.balance:
        samples = balance(samples, a.seed)
    model = knn.fit(samples, k=a.k, normalize=not a.no_normalize)
    run.emit(knn.serialize(model), a.out)
    print(f"trained k={model.k} on {model.n_rows} rows", file=sys.stderr)
    return 0


def cmd_classify(run: Run) -> int:
    a = run.args
    model = knn.deserialize(run.read_bytes(a.model))
    rows = read_features_csv(run.read_text(a.features))
    X = np.array([v.as_array() for _, _, v, _ in rows]).reshape(-1, 6)
    labels, dists = knn.predict_many(model, X)
    lines = ["device,window_index,label,mean_neighbor_distance"]
    for (dev, w, _, _), lab, d in zip(rows, labels, dists):
        lines.append(f"{dev},{w},{TrafficClass(int(lab)).token},{float(d)!r}")
    run.emit("\n".join(lines) + "\n", a.out)
    return 0


def cmd_eval(run: Run) -> int:
    a = run.args
    benign, attack, labels, origin = _load_corpus(run)
    entry = run_interval(benign, attack, labels, a.interval, a.seed, a.k, not a.no_normalize, origin)
    print(entry.report.table(), file=sys.stderr)
    run.emit(entry.report.to_csv(), a.out)
    return 0


def cmd_sweep(run: Run) -> int:
    a = run.args
    benign, attack, labels, origin = _load_corpus(run)
    result = sweep_intervals(benign, attack, a.intervals, a.seed, labels, a.k, not a.no_normalize, origin)
    for interval, e in sorted(result.entries.items()):
        print(f"interval {interval:>3}s  overall {e.report.overall_accuracy:.4f}", file=sys.stderr)
    run.emit(result.to_csv(), a.out)
    return 0


def cmd_minimize(run: Run) -> int:
    a = run.args
    train, test = _split(run, a.interval)
    filt = None
    if a.signaling_max_packets > 0:
        limit = a.signaling_max_packets
        filt = lambda s: s.features.packet_count <= limit  # noqa: E731
    res = minimize(train, test, a.threshold, a.step, a.seed, a.k, not a.no_normalize, filt)
    print(f"{len(train)} -> {len(res.reduced_train)} rows, accuracy {res.final_accuracy:.4f}, "
          f"met_threshold={res.met_threshold}", file=sys.stderr)
    if a.model_out:
        run.emit(knn.serialize(knn.fit(res.reduced_train, a.k, not a.no_normalize)), a.model_out)
    if a.train_out:
        run.emit(samples_to_csv(res.reduced_train), a.train_out)
    run.emit(res.curve_csv(), a.out)
    return 0


def cmd_importance(run: Run) -> int:
    a = run.args
    train, test = _split(run, a.interval)
    model = knn.fit(train, k=a.k, normalize=not a.no_normalize)
    rep = permutation_importance(model, test, a.repeats, a.seed)
    run.emit(rep.to_csv(), a.out)
    return 0


def cmd_simulate(run: Run) -> int:
    a = run.args
    model = knn.deserialize(run.read_bytes(a.model))
    traces: dict[str, Trace] = {}
    for path in a.trace:
        t = read_csv(run.read_text(path), path)
        for dev in t.devices:
            traces[dev] = Trace.concat([traces[dev], t.for_device(dev)]) if dev in traces else t.for_device(dev)
    cfg = ControllerConfig(a.interval, a.promote_after, a.confirm_after, a.deadline)
    events = run_simulation(traces, model, cfg, a.duration)
    print(summary_table(events, cfg), file=sys.stderr)
    run.emit(events_to_jsonl(events), a.out)
    return 0


def cmd_bench(run: Run) -> int:
    a = run.args
    if a.model:
        model = knn.deserialize(run.read_bytes(a.model))
        if not a.features:
            raise UsageError("--model requires --features for the query set")
        rows = read_features_csv(run.read_text(a.features))
        queries = np.array([v.as_array() for _, _, v, _ in rows]).reshape(-1, 6)
    else:
        # no model given: balanced corpus training rows, cut to --rows
        train, test = _split(run, 24)
        per_class = a.rows // 4
        groups: dict = {}
        for s in train:
            groups.setdefault(s.label, []).append(s)
        subset = [s for g in groups.values() for s in g[:per_class]]
        model = knn.fit(subset, k=a.k)
        queries = np.array([s.features.as_array() for s in test])
    stats = benchmark_latency(model, queries, a.trials)
    size = len(knn.serialize(model))
    out = ("rows,trials,mean_ms,p95_ms,model_bytes\n"
           f"{model.n_rows},{stats.trials},{stats.mean_ms!r},{stats.p95_ms!r},{size}\n")
    print(f"N={model.n_rows}: mean {stats.mean_ms:.4f} ms, p95 {stats.p95_ms:.4f} ms, "
          f"model {size / 1000:.1f} KB", file=sys.stderr)
    run.emit(out, a.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="iotguard", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        sp.set_defaults(func=func)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-o", "--out", help="output path (stdout when omitted)")
        return sp

    s = add("synth", cmd_synth, "generate benign/attack traces or a full labelled corpus")
    s.add_argument("--mode", choices=["corpus", "benign", "attack"], default="corpus")
    s.add_argument("--hours", type=float, default=5.0)
    s.add_argument("--devices-per-category", type=int, default=4)
    s.add_argument("--runs-per-kind", type=int, default=18)
    s.add_argument("--category", default="camera", help="benign mode: switch|camera|hub")
    s.add_argument("--device", help="device identifier")
    s.add_argument("--duration", type=float, default=600.0, help="seconds (benign/attack modes)")
    s.add_argument("--attack", default="udp", help="attack mode: icmp|tcp_syn|udp")
    s.add_argument("--victim", help="attack victim IPv4")
    s.add_argument("--rate", type=float, default=100.0)
    s.add_argument("--packet-size", type=int, default=60)
    s.add_argument("--no-spoof", action="store_true")
    s.add_argument("--set", action="append", metavar="CATEGORY.FIELD=VALUE",
                   help="override a device profile field, e.g. camera.packets_per_window=8")

    s = add("ingest", cmd_ingest, "convert a classic pcap capture to the canonical trace CSV")
    s.add_argument("pcap")
    s.add_argument("--attribution", choices=["mac", "ip"], default="mac")

    s = add("features", cmd_features, "bucket a trace into polling windows and extract features")
    s.add_argument("trace")
    s.add_argument("--interval", type=_interval, default=24)
    s.add_argument("--labels")
    s.add_argument("--origin", type=int, help="window origin in microseconds")
    s.add_argument("--stats-out", help="also write the non-cumulative statistics CSV")

    s = add("train", cmd_train, "fit a KNN model on a labelled feature CSV")
    s.add_argument("features")
    s.add_argument("--k", type=_odd_k, default=knn.DEFAULT_K)
    s.add_argument("--no-normalize", action="store_true")
    s.add_argument("--balance", action="store_true", help="downsample classes to equal size first")

    s = add("classify", cmd_classify, "label feature rows with a trained model")
    s.add_argument("model")
    s.add_argument("features")

    for name, func, help_ in [("eval", cmd_eval, "balance, split 75/25, fit and evaluate at one interval"),
                              ("sweep", cmd_sweep, "evaluate across polling intervals"),
                              ("minimize", cmd_minimize, "shrink the training set under an accuracy floor"),
                              ("importance", cmd_importance, "permutation feature importance")]:
        s = add(name, func, help_)
        _add_corpus_args(s)
        s.add_argument("--k", type=_odd_k, default=knn.DEFAULT_K)
        s.add_argument("--no-normalize", action="store_true")
        if name == "sweep":
            s.add_argument("--intervals", type=_intervals, default=list(DEFAULT_INTERVALS))
        else:
            s.add_argument("--interval", type=_interval, default=24)
        if name == "minimize":
            s.add_argument("--threshold", type=float, default=0.95)
            s.add_argument("--step", type=float, default=0.1)
            s.add_argument("--signaling-max-packets", type=int, default=0,
                           help="drop training windows with at most this many packets before minimising")
            s.add_argument("--model-out")
            s.add_argument("--train-out")
        if name == "importance":
            s.add_argument("--repeats", type=int, default=10)

    s = add("simulate", cmd_simulate, "replay traces through the two-phase VLAN controller")
    s.add_argument("--model", required=True)
    s.add_argument("--trace", action="append", required=True, help="trace CSV (repeatable)")
    s.add_argument("--interval", type=_interval, default=24)
    s.add_argument("--deadline", type=float, default=120.0)
    s.add_argument("--promote-after", type=int, default=3)
    s.add_argument("--confirm-after", type=int, default=1)
    s.add_argument("--duration", type=float, help="simulated seconds (default: until the last packet)")

    s = add("bench", cmd_bench, "single-prediction latency and model size")
    _add_corpus_args(s)
    s.add_argument("--model")
    s.add_argument("--features", help="query feature CSV (with --model)")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--rows", type=int, default=1820, help="training rows when no --model is given")
    s.add_argument("--k", type=_odd_k, default=knn.DEFAULT_K)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 1
        return args.func(Run(args, argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (IoTGuardError, ValueError, OSError, KeyError) as exc:
        print(f"iotguard: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
