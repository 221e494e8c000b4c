"""Discrete-event model of the two-phase VLAN controller.

Devices join the unverified VLAN. Each polling tick the controller classifies
every device that sent traffic during that interval:

* phase I, benign label: after ``promote_after`` consecutive benign labels the
  device moves to the verified VLAN;
* phase I, DDoS label: the device is flagged and enters phase II;
* phase II, DDoS label: after ``confirm_attack_after`` consecutive DDoS labels
  the device is removed;
* phase II, benign label: back to phase I.

Verified devices keep being classified, but only for the log.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from . import knn
from .evaluation import corpus_origin
from .features import extract
from .flow_stats import PollingConfig, bucket_direct
from .labels import DeviceRemoved, TrafficClass
from .trace_io import Trace


class Vlan(enum.Enum):
    UNVERIFIED = "Unverified"
    VERIFIED = "Verified"


class Phase(enum.Enum):
    PHASE_I = "PhaseI"
    PHASE_II = "PhaseII"
    REMOVED = "Removed"


class EventKind(enum.Enum):
    JOINED = "Joined"
    CLASSIFIED = "Classified"
    PROMOTED = "Promoted"
    FLAGGED = "Flagged"
    REMOVED = "Removed"


@dataclass(frozen=True)
class ControllerConfig:
    polling_interval: int = 24
    promote_after: int = 3
    confirm_attack_after: int = 1
    detection_deadline: float = 120.0

    def __post_init__(self):
        if self.promote_after < 1 or self.confirm_attack_after < 1:
            raise ValueError("promote_after and confirm_attack_after must be >= 1")
        if self.detection_deadline < self.polling_interval:
            raise ValueError("detection_deadline must be at least one polling interval")
        PollingConfig(self.polling_interval)

    @property
    def history_length(self) -> int:
        return max(self.promote_after, self.confirm_attack_after)


@dataclass(frozen=True)
class DeviceState:
    device: str
    vlan: Vlan = Vlan.UNVERIFIED
    phase: Phase = Phase.PHASE_I
    history: tuple[TrafficClass, ...] = ()
    flagged_at: Optional[int] = None


@dataclass(frozen=True)
class SimEvent:
    time: float  # seconds since the simulation origin
    kind: EventKind
    device: str
    label: Optional[TrafficClass] = None

    def to_json(self) -> str:
        obj = {"t": self.time, "device": self.device, "event": self.kind.value}
        if self.label is not None:
            obj["label"] = self.label.token
        return json.dumps(obj)


def _trailing(history: Sequence[TrafficClass], ddos: bool) -> int:
    n = 0
    for label in reversed(history):
        if label.is_benign == ddos:
            break
        n += 1
    return n


def step(state: DeviceState, label: TrafficClass, cfg: ControllerConfig, time: float = 0.0,
         window_index: Optional[int] = None) -> tuple[DeviceState, list[SimEvent]]:
    if state.phase is Phase.REMOVED:
        raise DeviceRemoved(f"{state.device} was already removed")
    label = TrafficClass(label)
    dev = state.device
    events = [SimEvent(time, EventKind.CLASSIFIED, dev, label)]
    keep = cfg.history_length
    history = (state.history + (label,))[-keep:]

    if state.vlan is Vlan.VERIFIED:
        return replace(state, history=history), events

    if state.phase is Phase.PHASE_I:
        if not label.is_benign:
            events.append(SimEvent(time, EventKind.FLAGGED, dev))
            return replace(state, phase=Phase.PHASE_II, history=(), flagged_at=window_index), events
        state = replace(state, history=history)
    else:  # phase II
        if not label.is_benign:
            if _trailing(history, ddos=True) >= cfg.confirm_attack_after:
                events.append(SimEvent(time, EventKind.REMOVED, dev))
                return replace(state, phase=Phase.REMOVED, history=history), events
            return replace(state, history=history), events
        state = replace(state, phase=Phase.PHASE_I, history=(label,), flagged_at=None)

    if _trailing(state.history, ddos=False) >= cfg.promote_after:
        events.append(SimEvent(time, EventKind.PROMOTED, dev))
        state = replace(state, vlan=Vlan.VERIFIED)
    return state, events


def run_simulation(traces: Mapping[str, Trace], model: knn.KnnModel, cfg: ControllerConfig = ControllerConfig(),
                   duration: Optional[float] = None, origin: Optional[int] = None) -> list[SimEvent]:
    """Replay per-device traces through polling, feature extraction, KNN and :func:`step`.

    Every packet of ``traces[name]`` is attributed to device ``name``. Time is
    reported in seconds since ``origin`` (default: first packet, floored to a
    second); tick ``w`` is decided at ``(w + 1) * polling_interval``.
    """
    parts = []
    for name, trace in traces.items():
        if len(trace):
            parts.append(Trace(trace.timestamp, np.zeros(len(trace), dtype=np.int64), [name], trace.src_ip,
                               trace.dst_ip, trace.protocol, trace.size, trace.tcp_syn))
    if not parts:
        return []
    merged = Trace.concat(parts)
    if origin is None:
        origin = corpus_origin(merged)
    T = cfg.polling_interval
    if duration is None:
        duration = (int(merged.timestamp[-1]) - origin) / 1e6 + 1e-6
    n_ticks = math.ceil(duration / T)

    by_window: dict[int, list] = {}
    for stat in bucket_direct(merged, PollingConfig(T, origin)):
        by_window.setdefault(stat.window_index, []).append(stat)
    first_seen = {}
    for name in merged.devices:
        code = merged.devices.index(name)
        first_seen[name] = int(merged.timestamp[np.argmax(merged.device_codes == code)])

    states: dict[str, DeviceState] = {}
    log: list[SimEvent] = []
    for w in range(n_ticks):
        tick_events = []
        tick_time = float((w + 1) * T)
        for stat in by_window.get(w, ()):
            name = stat.device
            if name not in states:
                states[name] = DeviceState(name)
                tick_events.append(SimEvent((first_seen[name] - origin) / 1e6, EventKind.JOINED, name))
            if states[name].phase is Phase.REMOVED:
                continue
            label = knn.predict(model, extract(stat)).label
            states[name], evs = step(states[name], label, cfg, tick_time, w)
            tick_events.extend(evs)
        tick_events.sort(key=lambda e: e.time)
        log.extend(tick_events)
    return log


@dataclass
class DeviceOutcome:
    device: str
    joined: Optional[float] = None
    promoted: Optional[float] = None
    flagged: Optional[float] = None
    removed: Optional[float] = None
    classifications: int = 0

    @property
    def final_state(self) -> str:
        if self.removed is not None:
            return "Removed"
        if self.promoted is not None:
            return "Verified"
        return "Flagged" if self.flagged is not None else "Unverified"


def summarize(events: Iterable[SimEvent]) -> dict[str, DeviceOutcome]:
    """Per-device first occurrence of each lifecycle event."""
    out: dict[str, DeviceOutcome] = {}
    attr = {EventKind.JOINED: "joined", EventKind.PROMOTED: "promoted",
            EventKind.FLAGGED: "flagged", EventKind.REMOVED: "removed"}
    for e in events:
        o = out.setdefault(e.device, DeviceOutcome(e.device))
        if e.kind is EventKind.CLASSIFIED:
            o.classifications += 1
        elif getattr(o, attr[e.kind]) is None:
            setattr(o, attr[e.kind], e.time)
    return out


def summary_table(events: Iterable[SimEvent], cfg: ControllerConfig) -> str:
    def fmt(x):
        return "-" if x is None else f"{x:.1f}"

    rows = [f"{'device':<22}{'state':<12}{'joined':>9}{'promoted':>10}{'flagged':>9}{'removed':>9}{'in_deadline':>13}"]
    for name, o in sorted(summarize(events).items()):
        ok = "-" if o.removed is None else ("yes" if o.removed - o.joined <= cfg.detection_deadline else "NO")
        rows.append(f"{name:<22}{o.final_state:<12}{fmt(o.joined):>9}{fmt(o.promoted):>10}"
                    f"{fmt(o.flagged):>9}{fmt(o.removed):>9}{ok:>13}")
    return "\n".join(rows)


def events_to_jsonl(events: Iterable[SimEvent]) -> str:
    return "".join(e.to_json() + "\n" for e in events)
