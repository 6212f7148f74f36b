"""Closed-loop controller over the assisted systems.

Raw samples from the assisted systems go through the input processor onto
the semantic bus, are kept in the context store, and are compared with the
active goals. Violations are turned into actions by a fixed-priority
rulebook; the output generator hands them to each system's adapter as a
command or, for advanced-aware systems, a recommendation.
"""

from __future__ import annotations

import logging
import statistics
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Mapping, Sequence

from .actions import Action, ActionKind, TargetSystem
from .engine import Engine, Event, ms_to_us, us_to_ms
from .placement import Placement, VnfKind, path_latency
from .policy import Goal, Metric, check
from .split import DnnProfile, Objective, best_split
from .topology import FlowClass, Flow, NodeKind, Topology

log = logging.getLogger(__name__)


class NoStrategy(LookupError):
    pass


class UnknownTarget(LookupError):
    pass


@dataclass(frozen=True)
class TelemetryRecord:
    time: int
    entity: str
    metric: str
    value: float


# Inbound schemas of the API translator: payload field -> (bus metric, scale
# to canonical units). Every payload also carries an ``entity`` field.
DEFAULT_SOURCE_SCHEMAS: dict[str, dict[str, tuple[str, float]]] = {
    "vran": {
        "throughput_mbps": ("throughput_bps", 1e6),
        "queue_len": ("queue_len", 1.0),
    },
    "probe": {
        "throughput_kbps": ("throughput_bps", 1e3),
        "latency_s": ("latency_ms", 1e3),
    },
    "mec": {"latency_ms": ("latency_ms", 1.0), "cpu_load": ("cpu_load", 1.0)},
    "core5g": {"cpu_load": ("cpu_load", 1.0)},
    "aiapp": {"frame_latency_ms": ("latency_ms", 1.0)},
}


class InputProcessor:
    def __init__(self, schemas: Mapping[str, Mapping[str, tuple[str, float]]] | None = None) -> None:
        self.schemas = dict(DEFAULT_SOURCE_SCHEMAS if schemas is None else schemas)
        self.unknown_sources = 0

    def ingest(self, raw: Iterable[tuple[str, Mapping[str, Any]]], now: int) -> list[TelemetryRecord]:
        out: dict[tuple[str, str], TelemetryRecord] = {}
        for source, payload in raw:
            schema = self.schemas.get(source)
            if schema is None:
                self.unknown_sources += 1
                log.warning("dropping sample from unknown source %r", source)
                continue
            entity = str(payload["entity"])
            for key, (metric, scale) in schema.items():
                if key in payload:
                    out[(entity, metric)] = TelemetryRecord(now, entity, metric, float(payload[key]) * scale)
        return list(out.values())


class SemanticBus:
    """In-process publish/subscribe; delivery is synchronous, in
    subscription order."""

    def __init__(self) -> None:
        self._subscribers: list[Callable[[TelemetryRecord], None]] = []

    def subscribe(self, fn: Callable[[TelemetryRecord], None]) -> None:
        self._subscribers.append(fn)

    def publish(self, records: Iterable[TelemetryRecord]) -> None:
        for rec in records:
            for fn in self._subscribers:
                fn(rec)


class ContextStore:
    def __init__(self, window: int = 64) -> None:
        self.window = window
        self._buffers: dict[tuple[str, str], deque[TelemetryRecord]] = defaultdict(
            lambda: deque(maxlen=self.window)
        )

    def add(self, rec: TelemetryRecord) -> None:
        buf = self._buffers[(rec.entity, rec.metric)]
        if buf and rec.time < buf[-1].time:
            raise ValueError("context records must arrive in time order")
        buf.append(rec)

    def history(self, entity: str, metric: str) -> list[TelemetryRecord]:
        return list(self._buffers.get((entity, metric), ()))

    def windowed_mean(self, entity: str, metric: str, since: int, until: int) -> float | None:
        """Mean of records with ``since < time <= until``; None if empty."""
        vals = [r.value for r in self._buffers.get((entity, metric), ()) if since < r.time <= until]
        return statistics.fmean(vals) if vals else None


class SituationKind(str, Enum):
    SLA_VIOLATION = "SlaViolation"
    SLA_RESTORED = "SlaRestored"


@dataclass(frozen=True)
class Situation:
    kind: SituationKind
    goal_id: str
    entity: str
    severity: float
    detected_at: int


class SituationAssessor:
    """Windowed goal checks with a hysteresis band.

    A violation is reported on every step while the windowed mean misses
    the goal by more than ``hysteresis``; it stays open until the mean
    beats the goal by more than ``hysteresis``.
    """

    def __init__(self, dwell_ms: float = 200.0, hysteresis: float = 0.02) -> None:
        self.dwell_us = ms_to_us(dwell_ms)
        self.hysteresis = hysteresis
        self.open: set[str] = set()

    def assess(self, context: ContextStore, goals: Sequence[Goal], now: int) -> list[Situation]:
        if now < self.dwell_us:
            return []
        out = []
        for goal in goals:
            mean = context.windowed_mean(goal.subject, goal.telemetry_metric, now - self.dwell_us, now)
            if mean is None:
                continue
            margin = check(goal, mean).margin
            if margin < -self.hysteresis:
                self.open.add(goal.id)
                out.append(Situation(SituationKind.SLA_VIOLATION, goal.id, goal.subject, min(1.0, -margin), now))
            elif margin > self.hysteresis and goal.id in self.open:
                self.open.discard(goal.id)
                out.append(Situation(SituationKind.SLA_RESTORED, goal.id, goal.subject, 0.0, now))
        return out


class Awareness(str, Enum):
    UNAWARE = "Unaware"
    BASIC_AWARE = "BasicAware"
    ADVANCED_AWARE = "AdvancedAware"


@dataclass(frozen=True)
class AdapterDescriptor:
    system: TargetSystem
    awareness: Awareness
    accepts: frozenset[ActionKind] = frozenset(ActionKind)
    actuation_delay_ms: float = 10.0
    local_decision_delay_ms: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "system", TargetSystem(self.system))
        object.__setattr__(self, "awareness", Awareness(self.awareness))
        object.__setattr__(self, "accepts", frozenset(ActionKind(k) for k in self.accepts))


def default_adapters() -> list[AdapterDescriptor]:
    """MEC is unaware, the 5G core basic-aware, the vRAN and the AI
    application advanced-aware."""
    return [
        AdapterDescriptor(TargetSystem.VRAN, Awareness.ADVANCED_AWARE,
                          frozenset({ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE})),
        AdapterDescriptor(TargetSystem.CORE_5G, Awareness.BASIC_AWARE, frozenset({ActionKind.MIGRATE_VNF})),
        AdapterDescriptor(TargetSystem.MEC, Awareness.UNAWARE, frozenset({ActionKind.MIGRATE_VNF})),
        AdapterDescriptor(TargetSystem.AI_APP, Awareness.ADVANCED_AWARE, frozenset({ActionKind.SET_SPLIT})),
    ]


DEFAULT_CATALOG: dict[SituationKind, tuple[ActionKind, ...]] = {
    SituationKind.SLA_VIOLATION: (
        ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE, ActionKind.MIGRATE_VNF, ActionKind.SET_SPLIT,
    ),
    SituationKind.SLA_RESTORED: (),
}


@dataclass
class KnowledgeRegistry:
    """What the controller knows about the managed systems, including the
    facts it updates as its own actions take effect."""

    topology: Topology
    flows: dict[str, Flow]
    placement: Placement
    profiles: dict[str, DnnProfile] = field(default_factory=dict)
    ai_flows: dict[str, str] = field(default_factory=dict)  # flow id -> profile name
    split: dict[str, int] = field(default_factory=dict)  # flow id -> current k
    slices: dict[str, float] = field(default_factory=dict)  # flow id -> reserved bps
    catalog: dict[SituationKind, tuple[ActionKind, ...]] = field(default_factory=lambda: dict(DEFAULT_CATALOG))
    uplink_bps: Callable[[str], float] = lambda flow_id: 18e6
    objective: Objective = Objective.MIN_LATENCY

    def nodes_of(self, kind: NodeKind) -> list[str]:
        return [n.id for n in self.topology.nodes.values() if n.kind is kind]

    @property
    def edge_node(self) -> str | None:
        edges = self.nodes_of(NodeKind.EDGE_SERVER)
        return edges[0] if edges else None

    def on_cloud(self, vnf: VnfKind) -> bool:
        node = self.placement.get(vnf)
        return node is not None and self.topology.kind(node) is NodeKind.CLOUD_SERVER

    def path_one_way_ms(self, flow_id: str) -> float:
        return path_latency(self.topology, self.placement, self.flows[flow_id]).one_way_ms


class CognitionEngine:
    """Fixed-priority rulebook with a per-target cooldown."""

    def __init__(self, cooldown_ms: float = 1000.0) -> None:
        self.cooldown_us = ms_to_us(cooldown_ms)
        self.last_action: dict[TargetSystem, int] = {}

    def _cooling(self, target: TargetSystem, now: int) -> bool:
        last = self.last_action.get(target)
        return last is not None and now - last < self.cooldown_us

    def decide(
        self,
        situations: Sequence[Situation],
        registry: KnowledgeRegistry,
        goals: Sequence[Goal],
        now: int,
    ) -> list[Action]:
        by_id = {g.id: g for g in goals}
        actions: list[Action] = []
        for sit in situations:
            if sit.kind not in registry.catalog:
                raise NoStrategy(f"no strategy for {sit.kind.value}")
            if sit.kind is not SituationKind.SLA_VIOLATION:
                continue
            goal = by_id.get(sit.goal_id)
            if goal is None:
                continue
            for action in self._rulebook(goal, registry, now):
                if action.kind not in registry.catalog[sit.kind]:
                    raise NoStrategy(f"{action.kind.value} not in catalog for {sit.kind.value}")
                if self._cooling(action.target, now) or any(a.target is action.target for a in actions):
                    continue
                actions.append(action)
        for a in actions:
            self.last_action[a.target] = now
        return actions

    def _rulebook(self, goal: Goal, reg: KnowledgeRegistry, now: int) -> list[Action]:
        flow = reg.flows.get(goal.subject)
        if flow is None:
            return []
        if goal.metric is Metric.THROUGHPUT:
            if flow.flow_class is not FlowClass.MISSION_CRITICAL:
                return []
            reserved = reg.slices.get(flow.id)
            if reserved is None:
                return [Action(ActionKind.CREATE_SLICE, TargetSystem.VRAN, now, flow=flow.id, reserved_bps=goal.value)]
            if reserved < goal.value:
                return [Action(ActionKind.RECONFIGURE_SLICE, TargetSystem.VRAN, now, flow=flow.id,
                               reserved_bps=goal.value)]
            return []
        edge = reg.edge_node
        if edge is not None and (reg.on_cloud(VnfKind.APP_SERVER) or reg.on_cloud(VnfKind.UPF)):
            return [
                Action(ActionKind.MIGRATE_VNF, TargetSystem.MEC, now, vnf=VnfKind.APP_SERVER.value, node=edge),
                Action(ActionKind.MIGRATE_VNF, TargetSystem.CORE_5G, now, vnf=VnfKind.UPF.value, node=edge),
            ]
        if flow.id in reg.ai_flows:
            profile = reg.profiles[reg.ai_flows[flow.id]]
            best = best_split(profile, reg.uplink_bps(flow.id), reg.path_one_way_ms(flow.id), reg.objective)
            if reg.split.get(flow.id) != best.k:
                return [Action(ActionKind.SET_SPLIT, TargetSystem.AI_APP, now, flow=flow.id, k=best.k)]
        return []


@dataclass(frozen=True)
class AdapterCommand:
    system: TargetSystem
    action: Action
    recommendation: bool
    deliver_at: int
    payload: dict[str, Any]


def translate(action: Action) -> dict[str, Any]:
    """Outbound API translation into the target system's command schema."""
    if action.kind in (ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE):
        op = "slice.create" if action.kind is ActionKind.CREATE_SLICE else "slice.update"
        return {"op": op, "slice_id": f"slice-{action.flow}", "members": [action.flow],
                "gbr_kbps": action.reserved_bps / 1e3}
    if action.kind is ActionKind.MIGRATE_VNF:
        return {"op": "vnf.migrate", "vnf": action.vnf, "host": action.node}
    return {"op": "dnn.split", "flow": action.flow, "layer": action.k}


def emit(
    actions: Sequence[Action],
    adapters: Sequence[AdapterDescriptor],
    now: int,
    engine: Engine | None = None,
) -> list[AdapterCommand]:
    """Turn actions into adapter commands, scheduling their delivery on
    ``engine`` (event kind ``si.deliver``) when one is given."""
    by_system = {a.system: a for a in adapters}
    out = []
    for action in actions:
        adapter = by_system.get(action.target)
        if adapter is None:
            raise UnknownTarget(f"no adapter registered for {action.target.value}")
        if action.kind not in adapter.accepts:
            raise UnknownTarget(f"{action.target.value} adapter does not accept {action.kind.value}")
        recommendation = adapter.awareness is Awareness.ADVANCED_AWARE
        delay = ms_to_us(adapter.actuation_delay_ms)
        if recommendation:
            delay += ms_to_us(adapter.local_decision_delay_ms)
        cmd = AdapterCommand(action.target, action, recommendation, now + delay, translate(action))
        if engine is not None:
            engine.schedule(Event(cmd.deliver_at, kind="si.deliver", data=cmd))
        out.append(cmd)
    return out


@dataclass
class SiConfig:
    enabled: bool = True
    loop_period_ms: float = 100.0
    dwell_ms: float = 200.0
    hysteresis: float = 0.02
    cooldown_ms: float = 1000.0
    context_window: int = 64


@dataclass(frozen=True)
class SiLogEntry:
    step: int
    time: int
    record: str  # situation | action | command | applied
    kind: str
    entity: str
    detail: str


class SystemIntelligence:
    """Wires the loop stages together and runs them as engine events."""

    def __init__(
        self,
        engine: Engine,
        registry: KnowledgeRegistry,
        goals: Sequence[Goal],
        adapters: Sequence[AdapterDescriptor] | None = None,
        config: SiConfig | None = None,
        actuators: Mapping[TargetSystem, Callable[[AdapterCommand], None]] | None = None,
    ) -> None:
        self.engine = engine
        self.registry = registry
        self.goals = list(goals)
        self.adapters = list(default_adapters() if adapters is None else adapters)
        self.config = config or SiConfig()
        self.actuators = dict(actuators or {})
        self.input = InputProcessor()
        self.bus = SemanticBus()
        self.context = ContextStore(self.config.context_window)
        self.bus.subscribe(self.context.add)
        self.assessor = SituationAssessor(self.config.dwell_ms, self.config.hysteresis)
        self.cognition = CognitionEngine(self.config.cooldown_ms)
        self.raw: list[tuple[int, str, Mapping[str, Any]]] = []
        self.log: list[SiLogEntry] = []
        self.actions: list[Action] = []
        self.step = 0
        engine.register("si.deliver", self._deliver)
        engine.register("si.step", lambda eng, ev: self.step_control_loop(eng.now()))

    def push(self, source: str, payload: Mapping[str, Any]) -> None:
        """Buffer a raw sample until the next loop step, stamped with its
        arrival time."""
        self.raw.append((self.engine.now(), source, payload))

    def start(self, immediate: Sequence[Action] = ()) -> None:
        """Issue imperative actions now and schedule the first loop step."""
        now = self.engine.now()
        if immediate:
            issued = [Action(a.kind, a.target, now, a.flow, a.reserved_bps, a.vnf, a.node, a.k) for a in immediate]
            self._issue(issued, now)
        if self.config.enabled:
            self.engine.schedule(Event(now + ms_to_us(self.config.loop_period_ms), kind="si.step"))

    def step_control_loop(self, now: int) -> list[Action]:
        self.step += 1
        by_time: dict[int, list[tuple[str, Mapping[str, Any]]]] = defaultdict(list)
        for t, source, payload in self.raw:
            by_time[t].append((source, payload))
        self.raw = []
        for t in sorted(by_time):
            self.bus.publish(self.input.ingest(by_time[t], t))
        situations = self.assessor.assess(self.context, self.goals, now)
        for sit in situations:
            self._log("situation", sit.kind.value, sit.entity, f"goal={sit.goal_id} severity={sit.severity:.6f}")
        actions = self.cognition.decide(situations, self.registry, self.goals, now)
        self._issue(actions, now)
        self.engine.sink.record(now, "si", "situations", len(situations))
        self.engine.sink.record(now, "si", "actions", len(actions))
        self.engine.schedule(Event(now + ms_to_us(self.config.loop_period_ms), kind="si.step"))
        return actions

    def _issue(self, actions: Sequence[Action], now: int) -> None:
        for a in actions:
            self._log("action", a.kind.value, a.target.value, a.describe())
        for cmd in emit(actions, self.adapters, now, self.engine):
            mode = "recommendation" if cmd.recommendation else "command"
            self._log("command", mode, cmd.system.value, f"deliver_at_ms={us_to_ms(cmd.deliver_at)}")
        self.actions.extend(actions)

    def _deliver(self, engine: Engine, event: Event) -> None:
        cmd: AdapterCommand = event.data
        actuator = self.actuators.get(cmd.system)
        if actuator is not None:
            actuator(cmd)
        a = cmd.action
        if a.kind in (ActionKind.CREATE_SLICE, ActionKind.RECONFIGURE_SLICE):
            self.registry.slices[a.flow] = a.reserved_bps
        elif a.kind is ActionKind.MIGRATE_VNF:
            where = dict(self.registry.placement.where)
            where[VnfKind(a.vnf)] = a.node
            self.registry.placement = Placement(where)
        elif a.kind is ActionKind.SET_SPLIT:
            self.registry.split[a.flow] = a.k
        self._log("applied", a.kind.value, cmd.system.value, a.describe())

    def _log(self, record: str, kind: str, entity: str, detail: str) -> None:
        self.log.append(SiLogEntry(self.step, self.engine.now(), record, kind, entity, detail))
