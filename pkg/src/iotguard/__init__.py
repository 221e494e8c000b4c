"""Smart-home traffic classification with stateless flow features.

Pipeline: packet traces -> per-device polling windows -> six features ->
KNN (device category or DDoS) -> two-phase VLAN controller.
"""

__version__ = "0.1.0"

from .labels import Protocol, TrafficClass  # noqa: E402,F401
