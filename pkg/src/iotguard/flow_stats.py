"""Per-device non-cumulative statistics over fixed polling windows.

Two routes produce the same output:

* :func:`bucket_direct` assigns each packet to ``floor((t - origin) / T)``.
* :func:`poll_and_subtract` replays what an SDN controller sees: cumulative
  switch counters are read at every poll boundary and the previous reading is
  subtracted.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .labels import Protocol
from .trace_io import Trace, ip_to_str

US_PER_S = 1_000_000
STATS_CSV_HEADER = "device,window_index,packets,bytes,icmp,tcp,udp,other,unique_dst_ips"


@dataclass(frozen=True)
class PollingConfig:
    interval: int = 24  # seconds
    origin: int = 0  # microseconds; window 0 starts here

    def __post_init__(self):
        if not isinstance(self.interval, (int, np.integer)) or not 1 <= self.interval <= 120:
            raise ValueError(f"polling interval must be an integer in [1, 120], got {self.interval!r}")

    @property
    def interval_us(self) -> int:
        return int(self.interval) * US_PER_S


@dataclass
class NonCumulativeStat:
    device: str
    window_index: int
    packets: int
    bytes: int
    icmp: int
    tcp: int
    udp: int
    other: int
    dst_ip_counts: dict[str, int] = field(default_factory=dict)

    @property
    def unique_dst_ips(self) -> int:
        return len(self.dst_ip_counts)

    def key(self) -> tuple[str, int]:
        return self.device, self.window_index


def bucket_direct(trace: Trace, cfg: PollingConfig) -> list[NonCumulativeStat]:
    """One stat per non-empty (device, window), ordered by device then window."""
    keep = trace.timestamp >= cfg.origin
    if not np.any(keep):
        return []
    window = (trace.timestamp[keep] - cfg.origin) // cfg.interval_us
    dev = trace.device_codes[keep]
    size = trace.size[keep]
    proto = trace.protocol[keep]
    dst = trace.dst_ip[keep]

    # sort by (device, window, dst); group boundaries then fall out of diffs
    order = np.lexsort((dst, window, dev))
    dev, window, size, proto, dst = dev[order], window[order], size[order], proto[order], dst[order]
    n = dev.shape[0]
    new_group = np.ones(n, dtype=bool)
    new_group[1:] = (dev[1:] != dev[:-1]) | (window[1:] != window[:-1])
    starts = np.flatnonzero(new_group)
    new_dst = new_group.copy()
    new_dst[1:] |= dst[1:] != dst[:-1]
    dst_starts = np.flatnonzero(new_dst)

    packets = np.diff(np.append(starts, n))
    nbytes = np.add.reduceat(size, starts)
    proto_counts = np.stack([np.add.reduceat((proto == p).astype(np.int64), starts) for p in Protocol])
    dst_runs = np.diff(np.append(dst_starts, n))
    dst_group = np.searchsorted(starts, dst_starts, side="right") - 1

    names = trace.devices
    stats = []
    run = 0
    n_runs = dst_starts.shape[0]
    for g, s in enumerate(starts.tolist()):
        counts = {}
        while run < n_runs and dst_group[run] == g:
            counts[ip_to_str(int(dst[dst_starts[run]]))] = int(dst_runs[run])
            run += 1
        stats.append(NonCumulativeStat(
            device=names[dev[s]], window_index=int(window[s]), packets=int(packets[g]),
            bytes=int(nbytes[g]), icmp=int(proto_counts[0, g]), tcp=int(proto_counts[1, g]),
            udp=int(proto_counts[2, g]), other=int(proto_counts[3, g]), dst_ip_counts=counts))
    return stats


@dataclass
class CumulativeCounters:
    """Monotone per-device counters as a switch would report them."""

    packets_total: int = 0
    bytes_total: int = 0
    icmp: int = 0
    tcp: int = 0
    udp: int = 0
    other: int = 0
    dst_ip_counts: Counter = field(default_factory=Counter)

    def count(self, size: int, proto: int, dst: int) -> None:
        self.packets_total += 1
        self.bytes_total += size
        if proto == Protocol.ICMP:
            self.icmp += 1
        elif proto == Protocol.TCP:
            self.tcp += 1
        elif proto == Protocol.UDP:
            self.udp += 1
        else:
            self.other += 1
        self.dst_ip_counts[dst] += 1

    def snapshot(self) -> "CumulativeCounters":
        return CumulativeCounters(self.packets_total, self.bytes_total, self.icmp, self.tcp,
                                  self.udp, self.other, Counter(self.dst_ip_counts))


def _delta(device: str, window: int, now: CumulativeCounters, prev: CumulativeCounters) -> NonCumulativeStat:
    dst = now.dst_ip_counts - prev.dst_ip_counts  # Counter subtraction drops zeros
    return NonCumulativeStat(
        device=device, window_index=window,
        packets=now.packets_total - prev.packets_total, bytes=now.bytes_total - prev.bytes_total,
        icmp=now.icmp - prev.icmp, tcp=now.tcp - prev.tcp, udp=now.udp - prev.udp,
        other=now.other - prev.other,
        dst_ip_counts={ip_to_str(ip): c for ip, c in sorted(dst.items())})


def poll_and_subtract(trace: Trace, cfg: PollingConfig) -> list[NonCumulativeStat]:
    """Controller view: poll cumulative counters at each boundary and subtract.

    The first poll happens at ``origin``; its reading (traffic seen before the
    origin) is the baseline. Window ``j`` is the difference between the polls
    at ``origin + j*T`` and ``origin + (j+1)*T``. Zero deltas are not emitted.
    """
    names = trace.devices
    counters = [CumulativeCounters() for _ in names]
    last_poll = [CumulativeCounters() for _ in names]
    out: list[NonCumulativeStat] = []

    poll_index = 0  # number of polls performed so far
    next_poll = cfg.origin
    step = cfg.interval_us

    def poll():
        nonlocal poll_index
        for d, now in enumerate(counters):
            prev = last_poll[d]
            if poll_index > 0 and now.packets_total != prev.packets_total:
                out.append(_delta(names[d], poll_index - 1, now, prev))
            if now.packets_total != prev.packets_total or poll_index == 0:
                last_poll[d] = now.snapshot()
        poll_index += 1

    for ts, dev, size, proto, dst in zip(trace.timestamp.tolist(), trace.device_codes.tolist(),
                                         trace.size.tolist(), trace.protocol.tolist(), trace.dst_ip.tolist()):
        if ts >= next_poll:
            poll()
            next_poll += step
            if ts >= next_poll:
                # idle polls: every delta is zero, only the poll count moves
                skipped = (ts - next_poll) // step + 1
                poll_index += skipped
                next_poll += skipped * step
        counters[dev].count(size, proto, dst)
    if poll_index > 0:
        poll()
    out.sort(key=NonCumulativeStat.key)
    return out


def stats_to_csv(stats: Iterable[NonCumulativeStat]) -> str:
    lines = [STATS_CSV_HEADER]
    for s in stats:
        lines.append(f"{s.device},{s.window_index},{s.packets},{s.bytes},{s.icmp},{s.tcp},"
                     f"{s.udp},{s.other},{s.unique_dst_ips}")
    return "\n".join(lines) + "\n"


def device_totals(stats: Sequence[NonCumulativeStat]) -> dict[str, np.ndarray]:
    """Summed (packets, bytes, icmp, tcp, udp, other) per device."""
    totals: dict[str, np.ndarray] = {}
    for s in stats:
        row = np.array([s.packets, s.bytes, s.icmp, s.tcp, s.udp, s.other], dtype=np.int64)
        totals[s.device] = totals.get(s.device, 0) + row
    return totals
