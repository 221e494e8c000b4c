import numpy as np
import pytest

from iotguard.evaluation import labeled_windows
from iotguard.features import extract_matrix, to_matrix
from iotguard.flow_stats import PollingConfig, bucket_direct
from iotguard.labels import Protocol, TrafficClass
from iotguard.synth import (AttackKind, AttackSpec, build_corpus, default_profiles, generate_attack,
                            generate_benign, labels_to_csv, override_profile, read_labels_csv)

C = TrafficClass
HOURS = 6.0


@pytest.fixture(scope="module")
def windows():
    """Per-category feature rows of a 6 h single-device run at 24 s."""
    out = {}
    for cls, prof in default_profiles().items():
        trace = generate_benign(prof, f"probe-{cls.token}", HOURS * 3600, seed=11)
        out[cls] = (trace, extract_matrix(bucket_direct(trace, PollingConfig(24))))
    return out


@pytest.mark.parametrize("cls", [C.SWITCH_TRIGGER, C.CAMERA, C.HUB])
def test_protocol_mix_within_two_points(windows, cls):
    trace, _ = windows[cls]
    mix = default_profiles()[cls].protocol_mix
    for proto, target in zip(Protocol, mix):
        assert abs(100 * np.mean(trace.protocol == proto) - 100 * target) <= 2.0


@pytest.mark.parametrize("cls", [C.SWITCH_TRIGGER, C.CAMERA, C.HUB])
def test_window_count_within_twenty_percent(windows, cls):
    _, M = windows[cls]
    target = default_profiles()[cls].packets_per_window
    assert abs(M[:, 3].mean() - target) <= 0.2 * target


def test_category_signatures(windows):
    switch, camera, hub = (windows[c][1] for c in (C.SWITCH_TRIGGER, C.CAMERA, C.HUB))
    assert np.mean(windows[C.SWITCH_TRIGGER][0].protocol == Protocol.UDP) == pytest.approx(0.9957, abs=0.005)
    assert camera[:, 1].mean() > camera[:, 2].mean()
    assert abs(hub[:, 5].mean() - 0.6) <= 0.1
    assert hub[:, 5].mean() > max(switch[:, 5].mean(), camera[:, 5].mean())


def test_camera_one_hour():
    trace = generate_benign(default_profiles()[C.CAMERA], "cam", 3600, seed=2)
    M = extract_matrix(bucket_direct(trace, PollingConfig(24)))
    assert 5.5 <= M[:, 3].mean() <= 8.3


def test_zero_duration_is_empty():
    assert len(generate_benign(default_profiles()[C.HUB], "h", 0, seed=1)) == 0


def test_same_seed_same_trace():
    prof = default_profiles()[C.CAMERA]
    assert generate_benign(prof, "c", 600, seed=4) == generate_benign(prof, "c", 600, seed=4)
    assert generate_benign(prof, "c", 600, seed=4) != generate_benign(prof, "c", 600, seed=5)


def test_within_bounds():
    trace = generate_benign(default_profiles()[C.SWITCH_TRIGGER], "s", 1000, seed=1, start_us=5 * 10**6)
    assert trace.timestamp.min() >= 5 * 10**6 and trace.timestamp.max() < 1005 * 10**6
    assert not np.any(trace.tcp_syn & (trace.protocol != Protocol.TCP))


def test_udp_flood_diversity():
    spec = AttackSpec(AttackKind.UDP, "192.168.1.10", rate=100, duration=240)
    trace = generate_attack(spec, "atk", seed=3)
    stats = bucket_direct(trace, PollingConfig(24))
    for s in stats:
        assert s.dst_ip_counts == {"192.168.1.10": s.packets}
    # 100 pkt/s over 24 s: about 2400 packets to a single destination
    div = extract_matrix(stats)[:, 5]
    assert np.all(np.abs(div - 1 / 2400) < 1 / 2400 * 0.1)


def test_icmp_and_syn_floods():
    icmp = generate_attack(AttackSpec(AttackKind.ICMP, "10.0.0.1", rate=30, duration=60), "a", 1)
    assert np.all(icmp.protocol == Protocol.ICMP)
    syn = generate_attack(AttackSpec(AttackKind.TCP_SYN, "10.0.0.1", rate=30, duration=60), "b", 1)
    assert np.all(syn.protocol == Protocol.TCP) and np.all(syn.tcp_syn)
    assert len(np.unique(syn.src_ip)) > 100


def test_flood_frames_smaller_than_benign():
    trace = generate_attack(AttackSpec(AttackKind.UDP, "10.0.0.1", rate=50, duration=120), "a", 1)
    floors = [p.size_floor for p in default_profiles().values()]
    assert trace.size.mean() < min(floors)


def test_low_rate_rejected():
    with pytest.raises(ValueError):
        AttackSpec(AttackKind.UDP, "10.0.0.1", rate=10)


def test_corpus_flood_windows_have_low_diversity():
    c = build_corpus(1, devices_per_category=1, hours=0.5, runs_per_kind=2)
    samples = labeled_windows(c.benign, c.attack, c.labels, PollingConfig(24, 0))
    X, y = to_matrix(samples)
    assert set(np.unique(y)) == set(range(4))
    assert np.all(X[y == C.DDOS, 5] < 0.002)


def test_labels_csv_round_trip():
    c = build_corpus(1, devices_per_category=1, hours=0.1, runs_per_kind=1)
    labels = c.all_labels()
    assert read_labels_csv(labels_to_csv(labels)) == labels
    assert labels["flood-udp-0"] is C.DDOS


def test_profile_override_and_validation():
    prof = override_profile(default_profiles()[C.HUB], packets_per_window=9.0)
    assert prof.packets_per_window == 9.0
    with pytest.raises(ValueError):
        override_profile(prof, protocol_mix=(0.5, 0.5, 0.5, 0.0))
