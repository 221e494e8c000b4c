"""Shared enumerations, error types and seed derivation."""

from __future__ import annotations

import enum
import zlib
from typing import Union

import numpy as np


class Protocol(enum.IntEnum):
    """Transport class of a packet. OTHER also covers non-IPv4 frames."""

    ICMP = 0
    TCP = 1
    UDP = 2
    OTHER = 3

    @classmethod
    def from_ip_proto(cls, number: int) -> "Protocol":
        return _IP_PROTO.get(number, cls.OTHER)

    @classmethod
    def parse(cls, token: str) -> "Protocol":
        return cls[token.strip().upper()]


_IP_PROTO = {1: Protocol.ICMP, 6: Protocol.TCP, 17: Protocol.UDP}


class TrafficClass(enum.IntEnum):
    # declaration order is the final KNN tie-break
    SWITCH_TRIGGER = 0
    CAMERA = 1
    HUB = 2
    DDOS = 3

    @property
    def token(self) -> str:
        return _CLASS_TOKENS[self]

    @property
    def is_benign(self) -> bool:
        return self is not TrafficClass.DDOS

    @classmethod
    def parse(cls, token: str) -> "TrafficClass":
        key = token.strip().lower().replace("_", "").replace("/", "")
        try:
            return _TOKEN_LOOKUP[key]
        except KeyError:
            raise ValueError(f"unknown traffic class {token!r}") from None


_CLASS_TOKENS = {
    TrafficClass.SWITCH_TRIGGER: "SwitchTrigger",
    TrafficClass.CAMERA: "Camera",
    TrafficClass.HUB: "Hub",
    TrafficClass.DDOS: "DDoS",
}
_TOKEN_LOOKUP = {tok.lower(): cls for cls, tok in _CLASS_TOKENS.items()}
_TOKEN_LOOKUP.update({"switch": TrafficClass.SWITCH_TRIGGER, "trigger": TrafficClass.SWITCH_TRIGGER})

N_CLASSES = len(TrafficClass)


class IoTGuardError(Exception):
    """Base class for data errors (CLI exit code 2)."""


class BadMagic(IoTGuardError):
    pass


class UnsupportedLinkType(IoTGuardError):
    pass


class Truncated(IoTGuardError):
    pass


class MalformedRow(IoTGuardError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class EmptyWindow(IoTGuardError):
    pass


class EmptyInput(IoTGuardError):
    pass


class TooFewSamples(IoTGuardError):
    pass


class SingleClass(IoTGuardError):
    pass


class LengthMismatch(IoTGuardError):
    pass


class ClassTooSmall(IoTGuardError):
    pass


class EmptyTestSet(IoTGuardError):
    pass


class InsufficientWindows(IoTGuardError):
    def __init__(self, interval: int, detail: str = ""):
        super().__init__(f"interval {interval}s: {detail or 'not enough windows per class'}")
        self.interval = interval


class EmptyTrain(IoTGuardError):
    pass


class DeviceRemoved(IoTGuardError):
    pass


SeedKey = Union[int, str]


def derive_rng(seed: int, *keys: SeedKey) -> np.random.Generator:
    """Child generator for ``seed`` and a path of keys.

    Strings are folded with CRC-32 so derivation is stable across runs and
    Python hash randomisation. ``derive_rng(7, "synth", "camera-0")`` always
    yields the same stream.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            words.append(zlib.crc32(key.encode("utf-8")))
        else:
            words.append(int(key) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(words))
