"""Packet traces: the canonical CSV format and a classic-pcap reader.

A :class:`Trace` keeps its packets column-wise (numpy arrays) so multi-million
packet flood captures stay cheap; iterating or indexing yields
:class:`PacketRecord` objects.
"""

from __future__ import annotations

import enum
import ipaddress
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .labels import BadMagic, MalformedRow, Protocol, Truncated, UnsupportedLinkType

CSV_HEADER = "timestamp_us,device,src_ip,dst_ip,protocol,size,tcp_syn"

PCAP_GLOBAL_HEADER_LEN = 24
PCAP_RECORD_HEADER_LEN = 16
LINKTYPE_ETHERNET = 1
ETHERTYPE_IPV4 = 0x0800
TCP_SYN = 0x02


@dataclass(frozen=True)
class PacketRecord:
    timestamp: int  # microseconds since epoch
    device: str
    src_ip: str
    dst_ip: str
    protocol: Protocol
    size: int  # original on-wire frame length
    tcp_syn: bool = False

    def __post_init__(self):
        if self.size < 0:
            raise ValueError("size must be non-negative")
        if self.tcp_syn and self.protocol is not Protocol.TCP:
            raise ValueError("tcp_syn requires protocol TCP")


@lru_cache(maxsize=65536)
def ip_to_str(value: int) -> str:
    return str(ipaddress.IPv4Address(int(value)))


@lru_cache(maxsize=65536)
def ip_to_int(text: str) -> int:
    return int(ipaddress.IPv4Address(text))


class Trace:
    """Timestamp-ordered packet records stored as parallel columns.

    Construction performs a stable sort on timestamp, so records sharing a
    timestamp keep their input order. Device names are interned into a sorted
    table; ``device_codes`` index into ``devices``.
    """

    __slots__ = (
        "timestamp", "device_codes", "devices", "src_ip", "dst_ip",
        "protocol", "size", "tcp_syn", "source_note",
    )

    def __init__(self, timestamp, device_codes, devices: Sequence[str], src_ip, dst_ip,
                 protocol, size, tcp_syn, source_note: str = ""):
        ts = np.asarray(timestamp, dtype=np.int64)
        n = ts.shape[0]
        codes = np.asarray(device_codes, dtype=np.int64)
        cols = [np.asarray(src_ip, dtype=np.uint32), np.asarray(dst_ip, dtype=np.uint32),
                np.asarray(protocol, dtype=np.uint8), np.asarray(size, dtype=np.int64),
                np.asarray(tcp_syn, dtype=bool)]
        if any(c.shape != (n,) for c in [codes, *cols]):
            raise ValueError("trace columns must be 1-D and of equal length")
        src, dst, proto, sz, syn = cols
        if n and (sz.min() < 0):
            raise ValueError("packet sizes must be non-negative")
        if n and proto.max() > Protocol.OTHER:
            raise ValueError("protocol code out of range")
        if np.any(syn & (proto != Protocol.TCP)):
            raise ValueError("tcp_syn set on a non-TCP packet")

        # intern only the names actually used, in sorted order
        names = list(devices)
        used = np.unique(codes) if n else np.empty(0, dtype=np.int64)
        if used.size and (used[0] < 0 or used[-1] >= len(names)):
            raise ValueError("device code out of range")
        kept = sorted({names[i] for i in used.tolist()})
        remap = np.zeros(max(len(names), 1), dtype=np.int64)
        position = {name: i for i, name in enumerate(kept)}
        for i, name in enumerate(names):
            remap[i] = position.get(name, 0)
        codes = remap[codes] if n else codes

        order = np.argsort(ts, kind="stable")
        if n and np.any(order != np.arange(n)):
            ts, codes, src, dst, proto, sz, syn = (
                a[order] for a in (ts, codes, src, dst, proto, sz, syn))

        self.timestamp = ts
        self.device_codes = codes
        self.devices = tuple(kept)
        self.src_ip = src
        self.dst_ip = dst
        self.protocol = proto
        self.size = sz
        self.tcp_syn = syn
        self.source_note = source_note

    @classmethod
    def empty(cls, source_note: str = "") -> "Trace":
        z = np.empty(0)
        return cls(z, z, (), z, z, z, z, z, source_note)

    @classmethod
    def from_records(cls, records: Iterable[PacketRecord], source_note: str = "") -> "Trace":
        records = list(records)
        devices: dict[str, int] = {}
        codes = [devices.setdefault(r.device, len(devices)) for r in records]
        return cls(
            [r.timestamp for r in records],
            codes,
            list(devices),
            [ip_to_int(r.src_ip) for r in records],
            [ip_to_int(r.dst_ip) for r in records],
            [int(r.protocol) for r in records],
            [r.size for r in records],
            [r.tcp_syn for r in records],
            source_note,
        )

    @classmethod
    def concat(cls, traces: Sequence["Trace"], source_note: str = "") -> "Trace":
        traces = [t for t in traces if len(t)]
        if not traces:
            return cls.empty(source_note)
        names: list[str] = []
        position: dict[str, int] = {}
        code_cols = []
        for t in traces:
            for d in t.devices:
                if d not in position:
                    position[d] = len(names)
                    names.append(d)
            table = np.array([position[d] for d in t.devices], dtype=np.int64)
            code_cols.append(table[t.device_codes])
        return cls(
            np.concatenate([t.timestamp for t in traces]),
            np.concatenate(code_cols),
            names,
            np.concatenate([t.src_ip for t in traces]),
            np.concatenate([t.dst_ip for t in traces]),
            np.concatenate([t.protocol for t in traces]),
            np.concatenate([t.size for t in traces]),
            np.concatenate([t.tcp_syn for t in traces]),
            source_note,
        )

    def __len__(self) -> int:
        return int(self.timestamp.shape[0])

    def record(self, i: int) -> PacketRecord:
        return PacketRecord(
            timestamp=int(self.timestamp[i]),
            device=self.devices[self.device_codes[i]],
            src_ip=ip_to_str(self.src_ip[i]),
            dst_ip=ip_to_str(self.dst_ip[i]),
            protocol=Protocol(int(self.protocol[i])),
            size=int(self.size[i]),
            tcp_syn=bool(self.tcp_syn[i]),
        )

    def __getitem__(self, i: int) -> PacketRecord:
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return self.record(i)

    def __iter__(self) -> Iterator[PacketRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @property
    def records(self) -> list[PacketRecord]:
        return list(self)

    def device_names(self) -> np.ndarray:
        """Per-packet device name column (object array)."""
        return np.asarray(self.devices, dtype=object)[self.device_codes] if len(self) else np.empty(0, dtype=object)

    def select(self, mask) -> "Trace":
        mask = np.asarray(mask)
        return Trace(self.timestamp[mask], self.device_codes[mask], self.devices, self.src_ip[mask],
                     self.dst_ip[mask], self.protocol[mask], self.size[mask], self.tcp_syn[mask],
                     self.source_note)

    def for_device(self, device: str) -> "Trace":
        if device not in self.devices:
            return Trace.empty(self.source_note)
        return self.select(self.device_codes == self.devices.index(device))

    def shifted(self, delta_us: int) -> "Trace":
        return Trace(self.timestamp + np.int64(delta_us), self.device_codes, self.devices, self.src_ip,
                     self.dst_ip, self.protocol, self.size, self.tcp_syn, self.source_note)

    def __eq__(self, other) -> bool:
        """Record-for-record equality; ``source_note`` is not compared."""
        if not isinstance(other, Trace) or len(self) != len(other):
            return NotImplemented if not isinstance(other, Trace) else False
        if not len(self):
            return True
        return (
            np.array_equal(self.timestamp, other.timestamp)
            and np.array_equal(self.device_names(), other.device_names())
            and np.array_equal(self.src_ip, other.src_ip)
            and np.array_equal(self.dst_ip, other.dst_ip)
            and np.array_equal(self.protocol, other.protocol)
            and np.array_equal(self.size, other.size)
            and np.array_equal(self.tcp_syn, other.tcp_syn)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Trace(n={len(self)}, devices={len(self.devices)}, note={self.source_note!r})"


# -- CSV ---------------------------------------------------------------------

def write_csv(trace: Trace) -> str:
    for d in trace.devices:
        if "," in d or "\n" in d or "\r" in d:
            raise ValueError(f"device identifier {d!r} cannot be written to CSV")
    lines = [CSV_HEADER]
    names = trace.devices
    protos = [p.name for p in Protocol]
    for ts, dev, src, dst, proto, size, syn in zip(
            trace.timestamp.tolist(), trace.device_codes.tolist(), trace.src_ip.tolist(),
            trace.dst_ip.tolist(), trace.protocol.tolist(), trace.size.tolist(), trace.tcp_syn.tolist()):
        lines.append(f"{ts},{names[dev]},{ip_to_str(src)},{ip_to_str(dst)},{protos[proto]},{size},"
                     f"{'true' if syn else 'false'}")
    return "\n".join(lines) + "\n"


def read_csv(text: str, source_note: str = "csv") -> Trace:
    lines = text.split("\n")
    if not lines or lines[0].rstrip("\r") != CSV_HEADER:
        raise MalformedRow(1, f"header must be {CSV_HEADER!r}")
    ts, codes, src, dst, proto, size, syn = [], [], [], [], [], [], []
    devices: dict[str, int] = {}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r")
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise MalformedRow(lineno, f"expected 7 columns, got {len(fields)}")
        try:
            t = int(fields[0])
            s = int(fields[5])
        except ValueError:
            raise MalformedRow(lineno, "unparseable integer") from None
        if s < 0:
            raise MalformedRow(lineno, "negative size")
        try:
            p = Protocol.parse(fields[4])
        except KeyError:
            raise MalformedRow(lineno, f"unknown protocol {fields[4]!r}") from None
        flag = fields[6].strip().lower()
        if flag not in ("true", "false"):
            raise MalformedRow(lineno, f"tcp_syn must be true/false, got {fields[6]!r}")
        if flag == "true" and p is not Protocol.TCP:
            raise MalformedRow(lineno, "tcp_syn set on a non-TCP packet")
        try:
            a, b = ip_to_int(fields[2]), ip_to_int(fields[3])
        except ValueError:
            raise MalformedRow(lineno, "bad IPv4 address") from None
        ts.append(t)
        codes.append(devices.setdefault(fields[1], len(devices)))
        src.append(a)
        dst.append(b)
        proto.append(int(p))
        size.append(s)
        syn.append(flag == "true")
    return Trace(ts, codes, list(devices), src, dst, proto, size, syn, source_note)


# -- pcap --------------------------------------------------------------------

class AttributionRule(enum.Enum):
    SOURCE_MAC = "mac"
    SOURCE_IP = "ip"


def _mac(frame: bytes) -> str:
    return ":".join(f"{b:02x}" for b in frame[6:12])


def _decode_frame(frame: bytes):
    """(src_ip, dst_ip, protocol, tcp_syn) of one Ethernet frame."""
    if len(frame) < 14 or struct.unpack_from(">H", frame, 12)[0] != ETHERTYPE_IPV4:
        return 0, 0, Protocol.OTHER, False
    ip = frame[14:]
    if len(ip) < 20 or ip[0] >> 4 != 4:
        return 0, 0, Protocol.OTHER, False
    ihl = (ip[0] & 0x0F) * 4
    src, dst = struct.unpack_from(">II", ip, 12)
    proto = Protocol.from_ip_proto(ip[9])
    syn = False
    if proto is Protocol.TCP and ihl >= 20 and len(ip) >= ihl + 14:
        syn = bool(ip[ihl + 13] & TCP_SYN)
    return src, dst, proto, syn


def read_pcap(data: bytes, attribution: AttributionRule = AttributionRule.SOURCE_MAC,
              source_note: str = "pcap") -> Trace:
    """Decode a classic (microsecond) pcap capture of Ethernet frames."""
    if len(data) < 4:
        raise BadMagic("capture shorter than the magic number")
    magic = bytes(data[:4])
    if magic == b"\xd4\xc3\xb2\xa1":
        endian = "<"
    elif magic == b"\xa1\xb2\xc3\xd4":
        endian = ">"
    else:
        raise BadMagic(f"unrecognised pcap magic {magic.hex()}")
    if len(data) < PCAP_GLOBAL_HEADER_LEN:
        raise Truncated("incomplete pcap global header")
    network = struct.unpack_from(endian + "I", data, 20)[0]
    if network != LINKTYPE_ETHERNET:
        raise UnsupportedLinkType(f"link type {network} (only Ethernet=1 is supported)")

    rec_fmt = endian + "IIII"
    records = []
    off = PCAP_GLOBAL_HEADER_LEN
    while off + PCAP_RECORD_HEADER_LEN <= len(data):
        ts_sec, ts_usec, incl_len, orig_len = struct.unpack_from(rec_fmt, data, off)
        start = off + PCAP_RECORD_HEADER_LEN
        if start + incl_len > len(data):
            break  # truncated tail
        frame = bytes(data[start:start + incl_len])
        src, dst, proto, syn = _decode_frame(frame)
        if attribution is AttributionRule.SOURCE_MAC:
            device = _mac(frame) if len(frame) >= 12 else "00:00:00:00:00:00"
        else:
            device = ip_to_str(src)
        records.append((ts_sec * 1_000_000 + ts_usec, device, src, dst, int(proto), orig_len, syn))
        off = start + incl_len

    devices: dict[str, int] = {}
    codes = [devices.setdefault(r[1], len(devices)) for r in records]
    cols = list(zip(*records)) if records else [[]] * 7
    return Trace(cols[0], codes, list(devices), cols[2], cols[3], cols[4], cols[5], cols[6], source_note)


def write_pcap(frames: Sequence[tuple[int, int, bytes]], big_endian: bool = False,
               orig_lengths: Sequence[int] | None = None, network: int = LINKTYPE_ETHERNET) -> bytes:
    """Assemble a classic pcap from ``(ts_sec, ts_usec, frame)`` triples."""
    e = ">" if big_endian else "<"
    out = [struct.pack(e + "IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, network)]
    for i, (sec, usec, frame) in enumerate(frames):
        orig = len(frame) if orig_lengths is None else orig_lengths[i]
        out.append(struct.pack(e + "IIII", sec, usec, len(frame), orig))
        out.append(frame)
    return b"".join(out)
