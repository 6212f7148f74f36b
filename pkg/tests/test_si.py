from __future__ import annotations

import pytest

from conftest import default_topology, placed
from uavsi.actions import Action, ActionKind, TargetSystem
from uavsi.engine import Engine, ms_to_us
from uavsi.policy import parse_intent
from uavsi.si import (
    DEFAULT_SOURCE_SCHEMAS,
    AdapterDescriptor,
    Awareness,
    CognitionEngine,
    ContextStore,
    InputProcessor,
    KnowledgeRegistry,
    NoStrategy,
    SiConfig,
    Situation,
    SituationAssessor,
    SituationKind,
    SystemIntelligence,
    TelemetryRecord,
    UnknownTarget,
    default_adapters,
    emit,
)
from uavsi.split import reference_profile
from uavsi.topology import Flow

RATE_GOAL = parse_intent("guarantee flow uav-1 throughput at-least 13 mbps", goal_id="rate")
LAT_GOAL = parse_intent("guarantee flow uav-1 latency at-most 50 ms", goal_id="lat")


def _registry(upf="edge", app="edge", **kw) -> KnowledgeRegistry:
    flows = {
        "uav-1": Flow("uav-1", "edge", "uav", 13e6, "MissionCritical"),
        "ue-1": Flow("ue-1", "edge", "ue1", 5e6, "BestEffort"),
    }
    return KnowledgeRegistry(default_topology(), flows, placed(upf, app), **kw)


def _violation(goal, t=ms_to_us(200), severity=0.5) -> Situation:
    return Situation(SituationKind.SLA_VIOLATION, goal.id, goal.subject, severity, t)


def test_ingest_normalizes_mbps():
    recs = InputProcessor().ingest([("vran", {"entity": "uav-1", "throughput_mbps": 4.5})], 7)
    assert recs == [TelemetryRecord(7, "uav-1", "throughput_bps", 4.5e6)]


def test_ingest_scales_kbps_and_seconds():
    recs = InputProcessor().ingest([("probe", {"entity": "a", "throughput_kbps": 2.0, "latency_s": 0.034})], 0)
    assert {r.metric: r.value for r in recs} == pytest.approx({"throughput_bps": 2000.0, "latency_ms": 34.0})


def test_ingest_drops_unknown_source():
    ip = InputProcessor()
    assert ip.ingest([("satellite", {"entity": "a", "x": 1})], 0) == []
    assert ip.unknown_sources == 1


def test_ingest_one_record_per_entity_metric():
    raw = [("vran", {"entity": "a", "throughput_mbps": 1.0}), ("vran", {"entity": "a", "throughput_mbps": 2.0})]
    recs = InputProcessor().ingest(raw, 0)
    assert [r.value for r in recs] == [2e6]


def test_bus_normalization_every_schema():
    ip = InputProcessor()
    for source, schema in DEFAULT_SOURCE_SCHEMAS.items():
        payload = {"entity": "e", **{k: 1.0 for k in schema}}
        for rec in ip.ingest([(source, payload)], 0):
            assert rec.metric in {"throughput_bps", "latency_ms", "queue_len", "cpu_load"}
            if rec.metric == "throughput_bps":
                assert rec.value in (1e3, 1e6)


def test_context_ring_buffer_is_fifo():
    ctx = ContextStore(window=3)
    for t in range(5):
        ctx.add(TelemetryRecord(t, "a", "m", float(t)))
    assert [r.time for r in ctx.history("a", "m")] == [2, 3, 4]
    with pytest.raises(ValueError):
        ctx.add(TelemetryRecord(1, "a", "m", 0.0))


def _ctx(values_mbps, step_ms=10):
    ctx = ContextStore()
    for i, v in enumerate(values_mbps, start=1):
        ctx.add(TelemetryRecord(ms_to_us(i * step_ms), "uav-1", "throughput_bps", v * 1e6))
    return ctx


def test_assess_violation_severity():
    sits = SituationAssessor().assess(_ctx([4.5] * 20), [RATE_GOAL], ms_to_us(200))
    assert [s.kind for s in sits] == [SituationKind.SLA_VIOLATION]
    assert sits[0].severity == pytest.approx(0.654, abs=1e-3)


def test_assess_band_is_silent():
    assert SituationAssessor().assess(_ctx([13.0] * 20), [RATE_GOAL], ms_to_us(200)) == []


def test_assess_restored_after_open_violation():
    a = SituationAssessor()
    ctx = _ctx([4.5] * 20 + [13.5] * 20)
    assert a.assess(ctx, [RATE_GOAL], ms_to_us(200))[0].kind is SituationKind.SLA_VIOLATION
    sits = a.assess(ctx, [RATE_GOAL], ms_to_us(400))
    assert [s.kind for s in sits] == [SituationKind.SLA_RESTORED]
    assert a.assess(ctx, [RATE_GOAL], ms_to_us(400)) == []


def test_assess_waits_for_full_dwell():
    assert SituationAssessor().assess(_ctx([1.0] * 10), [RATE_GOAL], ms_to_us(100)) == []


def test_decide_creates_slice_for_mission_critical():
    actions = CognitionEngine().decide([_violation(RATE_GOAL)], _registry(), [RATE_GOAL], ms_to_us(200))
    assert len(actions) == 1
    a = actions[0]
    assert (a.kind, a.target, a.flow, a.reserved_bps) == (ActionKind.CREATE_SLICE, TargetSystem.VRAN, "uav-1", 13e6)


def test_decide_ignores_best_effort_shortfall():
    goal = parse_intent("guarantee flow ue-1 throughput at-least 5 mbps", goal_id="ue")
    assert CognitionEngine().decide([_violation(goal)], _registry(), [goal], 0) == []


def test_decide_reconfigures_smaller_slice():
    reg = _registry(slices={"uav-1": 10e6})
    (a,) = CognitionEngine().decide([_violation(RATE_GOAL)], reg, [RATE_GOAL], 0)
    assert a.kind is ActionKind.RECONFIGURE_SLICE


def test_decide_migrates_from_cloud():
    actions = CognitionEngine().decide([_violation(LAT_GOAL)], _registry("cloud", "cloud"), [LAT_GOAL], 0)
    assert {(a.kind, a.target, a.vnf, a.node) for a in actions} == {
        (ActionKind.MIGRATE_VNF, TargetSystem.MEC, "AppServer", "edge"),
        (ActionKind.MIGRATE_VNF, TargetSystem.CORE_5G, "UPF", "edge"),
    }


def test_decide_sets_split_at_edge():
    reg = _registry(profiles={"ref": reference_profile()}, ai_flows={"uav-1": "ref"}, split={"uav-1": 0})
    (a,) = CognitionEngine().decide([_violation(LAT_GOAL)], reg, [LAT_GOAL], 0)
    assert (a.kind, a.target, a.k) == (ActionKind.SET_SPLIT, TargetSystem.AI_APP, 10)
    reg.split["uav-1"] = 10
    assert CognitionEngine().decide([_violation(LAT_GOAL)], reg, [LAT_GOAL], 0) == []


def test_decide_cooldown_per_target():
    eng = CognitionEngine(cooldown_ms=1000)
    reg = _registry()
    assert len(eng.decide([_violation(RATE_GOAL)], reg, [RATE_GOAL], ms_to_us(200))) == 1
    assert eng.decide([_violation(RATE_GOAL)], reg, [RATE_GOAL], ms_to_us(300)) == []
    assert len(eng.decide([_violation(RATE_GOAL)], reg, [RATE_GOAL], ms_to_us(1200))) == 1


def test_decide_without_strategy():
    reg = _registry(catalog={})
    with pytest.raises(NoStrategy):
        CognitionEngine().decide([_violation(RATE_GOAL)], reg, [RATE_GOAL], 0)


def test_emit_basic_aware_command():
    eng = Engine()
    applied = []
    eng.register("si.deliver", lambda e, ev: applied.append((e.now(), ev.data)))
    vran = AdapterDescriptor("vRAN", "BasicAware", {ActionKind.CREATE_SLICE})
    action = Action(ActionKind.CREATE_SLICE, "vRAN", 0, flow="uav-1", reserved_bps=13e6)
    (cmd,) = emit([action], [vran], 0, eng)
    assert not cmd.recommendation
    assert cmd.payload == {"op": "slice.create", "slice_id": "slice-uav-1", "members": ["uav-1"],
                           "gbr_kbps": 13000.0}
    eng.run_until(ms_to_us(50))
    assert [t for t, _ in applied] == [ms_to_us(10)]


def test_emit_advanced_aware_recommendation():
    ai = AdapterDescriptor("AiApp", "AdvancedAware", {ActionKind.SET_SPLIT}, local_decision_delay_ms=5)
    (cmd,) = emit([Action(ActionKind.SET_SPLIT, "AiApp", 0, flow="f", k=10)], [ai], 1000)
    assert cmd.recommendation
    assert cmd.deliver_at == 1000 + ms_to_us(15)


def test_emit_unknown_target():
    with pytest.raises(UnknownTarget):
        emit([Action(ActionKind.SET_SPLIT, "AiApp", 0, k=1)], [], 0)
    mec = AdapterDescriptor("MEC", "Unaware", {ActionKind.MIGRATE_VNF})
    with pytest.raises(UnknownTarget):
        emit([Action(ActionKind.SET_SPLIT, "MEC", 0, k=1)], [mec], 0)


def test_default_adapter_awareness():
    levels = {a.system: a.awareness for a in default_adapters()}
    assert levels[TargetSystem.MEC] is Awareness.UNAWARE
    assert levels[TargetSystem.CORE_5G] is Awareness.BASIC_AWARE
    assert levels[TargetSystem.AI_APP] is Awareness.ADVANCED_AWARE


def _loop(goals, rate_mbps, horizon_ms=3000):
    eng = Engine()
    si = SystemIntelligence(eng, _registry(), goals, config=SiConfig())

    def feed():
        si.push("vran", {"entity": "uav-1", "throughput_mbps": rate_mbps})
        eng.call_in(ms_to_us(10), feed)

    eng.call_at(ms_to_us(10), feed)
    si.start()
    eng.run_until(ms_to_us(horizon_ms))
    return si


def test_loop_without_goals_is_idle():
    si = _loop([], 4.5)
    assert si.actions == [] and si.log == []


def test_loop_with_satisfied_goal_is_idle():
    assert _loop([RATE_GOAL], 14.0).actions == []


def test_loop_issues_one_action_per_cooldown():
    si = _loop([RATE_GOAL], 4.5)
    times = [a.issued_at for a in si.actions]
    assert times[0] == ms_to_us(200)
    assert all(b - a >= ms_to_us(1000) for a, b in zip(times, times[1:]))


def test_causality():
    si = _loop([RATE_GOAL], 4.5)
    detections = [e.time for e in si.log if e.record == "situation"]
    for a in si.actions:
        assert any(t <= a.issued_at for t in detections)
