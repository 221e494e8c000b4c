import json

import pytest

from iotguard.labels import DeviceRemoved, TrafficClass
from iotguard.sdn_sim import (ControllerConfig, DeviceState, EventKind, Phase, Vlan, events_to_jsonl,
                              run_simulation, step, summarize, summary_table)
from iotguard.synth import AttackKind, AttackSpec, default_profiles, device_ip, generate_attack, generate_benign
from iotguard.trace_io import Trace

C = TrafficClass
CFG = ControllerConfig()


def run(labels, cfg=CFG, state=None):
    state = state or DeviceState("d")
    kinds = []
    for i, lab in enumerate(labels):
        state, evs = step(state, lab, cfg, time=float(i))
        kinds.append([e.kind for e in evs if e.kind is not EventKind.CLASSIFIED])
    return state, kinds


def test_three_benign_promote():
    state, kinds = run([C.CAMERA] * 3)
    assert kinds == [[], [], [EventKind.PROMOTED]]
    assert state.vlan is Vlan.VERIFIED


def test_mixed_benign_categories_count_toward_promotion():
    state, _ = run([C.CAMERA, C.HUB, C.SWITCH_TRIGGER])
    assert state.vlan is Vlan.VERIFIED


def test_flag_then_remove():
    state, kinds = run([C.DDOS, C.DDOS])
    assert kinds == [[EventKind.FLAGGED], [EventKind.REMOVED]]
    assert state.phase is Phase.REMOVED


def test_flag_then_benign_returns_to_phase_one():
    state, kinds = run([C.DDOS, C.HUB])
    assert kinds == [[EventKind.FLAGGED], []]
    assert state.phase is Phase.PHASE_I and state.vlan is Vlan.UNVERIFIED


def test_attack_interrupts_promotion_streak():
    state, kinds = run([C.HUB, C.HUB, C.DDOS, C.HUB, C.HUB])
    assert state.vlan is Vlan.UNVERIFIED
    state, kinds = run([C.HUB], state=state)
    assert kinds == [[EventKind.PROMOTED]]


def test_confirm_after_two():
    cfg = ControllerConfig(confirm_attack_after=2)
    _, kinds = run([C.DDOS, C.DDOS, C.DDOS], cfg)
    assert kinds == [[EventKind.FLAGGED], [], [EventKind.REMOVED]]


def test_removed_is_terminal():
    state, _ = run([C.DDOS, C.DDOS])
    for label in C:
        with pytest.raises(DeviceRemoved):
            step(state, label, CFG)


def test_verified_devices_are_only_logged():
    state, _ = run([C.CAMERA] * 3)
    state, kinds = run([C.DDOS] * 4, state=state)
    assert kinds == [[]] * 4
    assert state.vlan is Vlan.VERIFIED and state.phase is Phase.PHASE_I


def test_every_step_logs_classification():
    _, evs = step(DeviceState("x"), C.HUB, CFG, time=3.0)
    assert [(e.kind, e.label, e.time) for e in evs] == [(EventKind.CLASSIFIED, C.HUB, 3.0)]


def test_config_validation():
    with pytest.raises(ValueError):
        ControllerConfig(promote_after=0)
    with pytest.raises(ValueError):
        ControllerConfig(polling_interval=60, detection_deadline=30)


def test_empty_simulation(model24):
    assert run_simulation({}, model24) == []
    assert run_simulation({"idle": Trace.empty()}, model24) == []


def test_camera_promoted_on_third_active_window(model24):
    trace = generate_benign(default_profiles()[C.CAMERA], "cam", 240, seed=21)
    events = run_simulation({"cam": trace}, model24, origin=0)
    classified = [e for e in events if e.kind is EventKind.CLASSIFIED]
    promoted = [e for e in events if e.kind is EventKind.PROMOTED]
    assert all(e.label.is_benign for e in classified)
    assert len(promoted) == 1 and promoted[0].time == classified[2].time
    assert summarize(events)["cam"].removed is None


def test_udp_flood_removed_within_deadline(model24):
    victim = device_ip("hub-0")
    flood = generate_attack(AttackSpec(AttackKind.UDP, victim, rate=60, duration=300, start_us=50 * 10**6),
                            "atk", seed=4)
    benign = generate_benign(default_profiles()[C.HUB], "hub-0", 300, seed=4)
    events = run_simulation({"atk": flood, "hub-0": benign}, model24, origin=0)
    out = summarize(events)
    assert out["atk"].removed is not None
    assert out["atk"].removed - out["atk"].joined <= CFG.detection_deadline
    assert out["hub-0"].removed is None
    assert "yes" in summary_table(events, CFG)


def test_jsonl_format(model24):
    trace = generate_benign(default_profiles()[C.SWITCH_TRIGGER], "sw", 100, seed=1)
    events = run_simulation({"sw": trace}, model24, origin=0)
    lines = events_to_jsonl(events).splitlines()
    assert len(lines) == len(events)
    first = json.loads(lines[0])
    assert first["event"] == "Joined" and first["device"] == "sw" and "label" not in first
    times = [json.loads(l)["t"] for l in lines]
    assert times == sorted(times)
    assert all("label" in json.loads(l) for l in lines if json.loads(l)["event"] == "Classified")
