"""Seeded benign device traffic and flood traffic.

Benign devices emit on/off bursts: burst starts form a Poisson process, each
burst carries ``1 + Poisson(burst_size - 1)`` packets spaced by exponential
gaps and addressed to one peer drawn from a Zipf-weighted pool. The burst
rate is solved so that the mean packet count over *non-empty* 24 s windows
hits ``packets_per_window``, which is the quantity the features observe.
"""

from __future__ import annotations

import enum
import ipaddress
import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

from .labels import Protocol, TrafficClass, derive_rng
from .trace_io import Trace, ip_to_int, ip_to_str

REFERENCE_INTERVAL = 24  # seconds
US = 1_000_000
MAX_FRAME = 1514
MIN_FLOOD_WINDOW_PACKETS = 500


@dataclass(frozen=True)
class DeviceProfile:
    category: TrafficClass
    protocol_mix: tuple[float, float, float, float]  # icmp, tcp, udp, other
    packets_per_window: float  # mean over non-empty reference windows
    burst_size: float  # mean packets per on-period; larger = burstier counts
    burst_gap: float  # mean seconds between packets inside a burst
    size_mean: float
    size_sd: float
    size_floor: int
    peer_pool: int
    peer_concentration: float  # Zipf exponent over the peer pool

    def __post_init__(self):
        if abs(sum(self.protocol_mix) - 1.0) > 1e-9 or min(self.protocol_mix) < 0:
            raise ValueError("protocol_mix must be non-negative and sum to 1")
        if min(self.size_mean, self.burst_gap) <= 0:
            raise ValueError("size_mean and burst_gap must be positive")
        if min(self.packets_per_window, self.burst_size, self.peer_pool) < 1:
            raise ValueError("packets_per_window, burst_size and peer_pool must be >= 1")

    def burst_rate(self, interval: float = REFERENCE_INTERVAL) -> float:
        """Bursts per second giving the target non-empty-window mean.

        With ``x = rate * T`` and ``m`` packets per burst the conditional mean
        is ``m x / (1 - exp(-x))``; solved by bisection (it is increasing in x).
        """
        ratio = self.packets_per_window / self.burst_size
        if ratio <= 1.0:
            return 1e-3 / interval
        lo, hi = 1e-9, 1.0
        while hi / (1 - math.exp(-hi)) < ratio:
            hi *= 2
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if mid / (1 - math.exp(-mid)) < ratio:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi) / interval


def default_profiles() -> dict[TrafficClass, DeviceProfile]:
    return {
        TrafficClass.SWITCH_TRIGGER: DeviceProfile(
            category=TrafficClass.SWITCH_TRIGGER,
            protocol_mix=(0.0, 0.0043, 0.9957, 0.0),
            packets_per_window=14.0, burst_size=10.0, burst_gap=0.1,
            size_mean=100.0, size_sd=18.0, size_floor=70,
            peer_pool=2, peer_concentration=2.0),
        TrafficClass.CAMERA: DeviceProfile(
            category=TrafficClass.CAMERA,
            protocol_mix=(0.0, 0.85, 0.12, 0.03),
            packets_per_window=6.9, burst_size=4.0, burst_gap=0.25,
            size_mean=950.0, size_sd=300.0, size_floor=70,
            peer_pool=2, peer_concentration=2.5),
        TrafficClass.HUB: DeviceProfile(
            category=TrafficClass.HUB,
            protocol_mix=(0.01, 0.38, 0.52, 0.09),
            packets_per_window=4.8, burst_size=1.75, burst_gap=0.8,
            size_mean=240.0, size_sd=90.0, size_floor=70,
            peer_pool=64, peer_concentration=0.3),
    }


def device_ip(device_id: str) -> str:
    """Stable private address for a device name (192.168.0.0/16)."""
    h = zlib.crc32(device_id.encode("utf-8"))
    return f"192.168.{(h >> 8) % 254 + 1}.{h % 253 + 2}"


def _public_ips(rng: np.random.Generator, n: int) -> np.ndarray:
    # 11.0.0.0 - 126.255.255.255: public unicast, avoids 10/8 and loopback
    return rng.integers(ip_to_int("11.0.0.0"), ip_to_int("126.255.255.255"), size=n, dtype=np.int64)


def _single_device_trace(device_id: str, t_us, src, dst, proto, size, syn, note: str) -> Trace:
    n = len(t_us)
    return Trace(t_us, np.zeros(n, dtype=np.int64), [device_id], src, dst, proto, size, syn, note)


def generate_benign(profile: DeviceProfile, device_id: str, duration: float, seed: int,
                    start_us: int = 0, src_ip: Optional[str] = None) -> Trace:
    """Benign traffic of one device over ``[start, start + duration)`` seconds."""
    note = f"synth benign {profile.category.token} {device_id} seed={seed}"
    if duration <= 0:
        return Trace.empty(note)
    rng = derive_rng(seed, "benign", device_id)
    peers_rng = derive_rng(seed, "peers", device_id)
    peers = _public_ips(peers_rng, profile.peer_pool)
    weights = 1.0 / np.arange(1, profile.peer_pool + 1) ** profile.peer_concentration
    weights /= weights.sum()

    rate = profile.burst_rate()
    n_bursts = rng.poisson(rate * duration)
    starts = np.sort(rng.uniform(0.0, duration, size=n_bursts))
    sizes = 1 + rng.poisson(profile.burst_size - 1.0, size=n_bursts)
    burst_of = np.repeat(np.arange(n_bursts), sizes)
    first_idx = np.cumsum(sizes) - sizes
    gaps = rng.exponential(profile.burst_gap, size=burst_of.size)
    gaps[first_idx] = 0.0  # first packet of a burst sits at the burst start
    offsets = np.cumsum(gaps)
    times = starts[burst_of] + offsets - offsets[first_idx][burst_of]
    first = np.zeros(burst_of.size, dtype=bool)
    first[first_idx] = True
    peer_of_burst = rng.choice(profile.peer_pool, size=n_bursts, p=weights)

    n = burst_of.size
    proto = rng.choice(4, size=n, p=np.asarray(profile.protocol_mix))
    size = np.clip(np.rint(rng.normal(profile.size_mean, profile.size_sd, size=n)),
                   profile.size_floor, MAX_FRAME).astype(np.int64)
    syn = (proto == Protocol.TCP) & first
    keep = times < duration
    t_us = start_us + np.floor(times[keep] * US).astype(np.int64)
    src = np.full(int(keep.sum()), ip_to_int(src_ip or device_ip(device_id)), dtype=np.int64)
    dst = peers[peer_of_burst[burst_of]][keep]
    return _single_device_trace(device_id, t_us, src, dst, proto[keep], size[keep], syn[keep], note)


class AttackKind(enum.Enum):
    ICMP = "icmp"
    TCP_SYN = "tcp_syn"
    UDP = "udp"

    @property
    def protocol(self) -> Protocol:
        return {AttackKind.ICMP: Protocol.ICMP, AttackKind.TCP_SYN: Protocol.TCP,
                AttackKind.UDP: Protocol.UDP}[self]

    @classmethod
    def parse(cls, token: str) -> "AttackKind":
        key = token.strip().lower().replace("-", "_")
        if key in ("syn", "tcp"):
            key = "tcp_syn"
        return cls(key)


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind
    victim_ip: str
    rate: float = 100.0  # packets per second
    duration: float = 600.0  # seconds
    spoof_sources: bool = True
    packet_size: int = 60
    start_us: int = 0
    spoof_pool: int = 4096

    def __post_init__(self):
        ipaddress.IPv4Address(self.victim_ip)
        if self.rate * REFERENCE_INTERVAL < MIN_FLOOD_WINDOW_PACKETS:
            raise ValueError(f"rate {self.rate}/s yields fewer than {MIN_FLOOD_WINDOW_PACKETS} "
                             f"packets per {REFERENCE_INTERVAL} s window")
        if self.duration < 0 or self.packet_size < 42:
            raise ValueError("duration must be >= 0 and packet_size >= 42")


def generate_attack(spec: AttackSpec, attacker_id: str, seed: int,
                    attacker_ip: Optional[str] = None) -> Trace:
    """Flood toward ``spec.victim_ip``: Poisson arrivals, small near-constant frames."""
    note = f"synth attack {spec.kind.value} {attacker_id} seed={seed}"
    rng = derive_rng(seed, "attack", attacker_id)
    n = rng.poisson(spec.rate * spec.duration)
    times = np.sort(rng.uniform(0.0, spec.duration, size=n))
    if spec.spoof_sources:
        pool = _public_ips(rng, spec.spoof_pool)
        src = pool[rng.integers(0, spec.spoof_pool, size=n)]
    else:
        src = np.full(n, ip_to_int(attacker_ip or device_ip(attacker_id)), dtype=np.int64)
    size = np.maximum(spec.packet_size + np.rint(rng.normal(0.0, 1.0, size=n)), 42).astype(np.int64)
    proto = np.full(n, int(spec.kind.protocol))
    syn = np.full(n, spec.kind is AttackKind.TCP_SYN)
    dst = np.full(n, ip_to_int(spec.victim_ip), dtype=np.int64)
    t_us = spec.start_us + np.floor(times * US).astype(np.int64)
    return _single_device_trace(attacker_id, t_us, src, dst, proto, size, syn, note)


@dataclass
class Corpus:
    benign: Trace
    attack: Trace
    labels: dict[str, TrafficClass]  # benign device -> category; attack devices map to DDoS

    def all_labels(self) -> dict[str, TrafficClass]:
        out = dict(self.labels)
        out.update({d: TrafficClass.DDOS for d in self.attack.devices})
        return out

    def labels_csv(self) -> str:
        return labels_to_csv(self.all_labels())


def labels_to_csv(labels: Mapping[str, TrafficClass]) -> str:
    return "device,label\n" + "".join(f"{d},{c.token}\n" for d, c in sorted(labels.items()))


def read_labels_csv(text: str) -> dict[str, TrafficClass]:
    lines = [l.rstrip("\r") for l in text.split("\n") if l.strip()]
    if not lines or lines[0] != "device,label":
        raise ValueError("labels file must start with header 'device,label'")
    out = {}
    for line in lines[1:]:
        device, _, token = line.partition(",")
        out[device] = TrafficClass.parse(token)
    return out


_CATEGORY_SLUG = {TrafficClass.SWITCH_TRIGGER: "switch", TrafficClass.CAMERA: "camera", TrafficClass.HUB: "hub"}


def build_corpus(seed: int, devices_per_category: int = 4, hours: float = 5.0, runs_per_kind: int = 18,
                 rate_range: tuple[float, float] = (25.0, 80.0),
                 profiles: Optional[Mapping[TrafficClass, DeviceProfile]] = None) -> Corpus:
    """Benign devices for each category plus back-to-back flood runs of each kind.

    Flood runs last 600 s and start on multiples of 600 s from time zero, so at
    any interval dividing 600 (1, 4, 8, 24, 120, ...) no flood window is cut
    short by the run edges.
    """
    profiles = dict(profiles or default_profiles())
    benign, labels = [], {}
    for cls, profile in profiles.items():
        for i in range(devices_per_category):
            dev = f"{_CATEGORY_SLUG[cls]}-{i}"
            labels[dev] = cls
            benign.append(generate_benign(profile, dev, hours * 3600.0, seed))
    victims = [device_ip(d) for d in labels]
    rng = derive_rng(seed, "corpus-attacks")
    attacks = []
    for kind in AttackKind:
        for j in range(runs_per_kind):
            spec = AttackSpec(kind, victims[int(rng.integers(len(victims)))],
                              rate=float(rng.uniform(*rate_range)), start_us=j * 600 * US)
            attacks.append(generate_attack(spec, f"flood-{kind.value}-{j}", seed))
    return Corpus(Trace.concat(benign, f"synthetic benign corpus seed={seed}"),
                  Trace.concat(attacks, f"synthetic attack corpus seed={seed}"), labels)


def override_profile(profile: DeviceProfile, **changes) -> DeviceProfile:
    return replace(profile, **changes)
