"""Runs a validated scenario on the event engine."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

from .actions import TargetSystem
from .engine import Engine, Event, MetricSink, ms_to_us, s_to_us, us_to_ms
from .placement import PathReport, VnfKind, migrate, path_latency
from .radio import Delivery, RadioCell, SliceConfig, maxmin_fair
from .scenario import ScenarioDoc
from .si import AdapterCommand, KnowledgeRegistry, SiLogEntry, SystemIntelligence
from .split import best_split, evaluate

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    doc: ScenarioDoc
    sink: MetricSink
    si_log: list[SiLogEntry]
    arrived: dict[str, int]
    delivered: dict[str, int]
    dropped: dict[str, int]
    queued: dict[str, int]
    events: int


class _FlowState:
    __slots__ = ("flow", "cell", "phase", "period_us", "n", "window_bits", "telemetry_bits",
                 "window_drops", "telemetry_lat", "last_dropped")

    def __init__(self, flow, cell, phase, period_us):
        self.flow = flow
        self.cell = cell
        self.phase = phase
        self.period_us = period_us
        self.n = 0
        self.window_bits = 0
        self.telemetry_bits = 0
        self.window_drops = 0
        self.telemetry_lat: list[float] = []
        self.last_dropped = 0


class Simulation:
    def __init__(self, doc: ScenarioDoc) -> None:
        self.doc = doc
        self.engine = Engine(doc.seed, doc.topology)
        self.horizon = s_to_us(doc.horizon_s)
        self.sample_us = ms_to_us(doc.sample_period_ms)
        self.telemetry_us = ms_to_us(doc.telemetry_period_ms)
        self.downlink = RadioCell(doc.downlink.cell)
        self.uplink = RadioCell(doc.uplink.cell)
        self.placement = doc.placement
        self.downtime_until = 0
        self.flows: dict[str, _FlowState] = {}
        for flow in doc.flows:
            uplink = doc.topology.is_uplink(flow)
            cell, params = (self.uplink, doc.uplink) if uplink else (self.downlink, doc.downlink)
            cell.add_bearer(flow.id, flow.demand_bps, params.queue_cap_packets)
            period = flow.packet_bits * 1e6 / flow.demand_bps
            phase = self.engine.rng.randrange(max(1, int(period)))
            self.flows[flow.id] = _FlowState(flow, cell, phase, period)
        for s in doc.slices:
            self._cell_for_slice(s).add_slice(s)
        self.paths: dict[str, PathReport] = {}
        self._refresh_paths()

        self.split_k: int | None = None
        if doc.dnn is not None:
            self.split_k = doc.dnn.split
            if self.split_k is None:
                self.split_k = best_split(self._dnn_profile(), self._ai_uplink_bps(), self._ai_path_ms(),
                                          doc.dnn.objective).k

        goals, immediate = doc.compiled()
        self.si: SystemIntelligence | None = None
        if doc.si.enabled or immediate:
            registry = KnowledgeRegistry(
                topology=doc.topology,
                flows={f.id: f for f in doc.flows},
                placement=self.placement,
                slices={m: s.reserved_bps for s in doc.slices for m in s.member_flow_ids},
                uplink_bps=lambda flow_id: self._uplink_share(flow_id),
            )
            if doc.dnn is not None:
                registry.profiles[doc.dnn.profile.name] = self._dnn_profile()
                registry.ai_flows[doc.dnn.flow] = doc.dnn.profile.name
                registry.split[doc.dnn.flow] = self.split_k
                registry.objective = doc.dnn.objective
            actuators: dict[TargetSystem, Callable[[AdapterCommand], None]] = {
                TargetSystem.VRAN: self._apply_slice,
                TargetSystem.CORE_5G: self._apply_migration,
                TargetSystem.MEC: self._apply_migration,
                TargetSystem.AI_APP: self._apply_split,
            }
            self.si = SystemIntelligence(self.engine, registry, goals, doc.adapters, doc.si, actuators)
            self._immediate = immediate
        self._wire()

    # -- setup -------------------------------------------------------------
    def _cell_for_slice(self, s: SliceConfig) -> RadioCell:
        member = sorted(s.member_flow_ids)[0]
        return self.flows[member].cell

    def _refresh_paths(self) -> None:
        self.paths = {f.id: path_latency(self.doc.topology, self.placement, f) for f in self.doc.flows}

    def _wire(self) -> None:
        eng = self.engine
        eng.register("arrival", self._on_arrival)
        eng.register("tti", self._on_tti)
        eng.register("sample", self._on_sample)
        eng.register("telemetry", self._on_telemetry)
        for fid, st in self.flows.items():
            eng.schedule(Event(st.phase, kind="arrival", data=fid))
        eng.schedule(Event(self.sample_us, kind="sample"))
        eng.schedule(Event(self.telemetry_us, kind="telemetry"))
        if self.downlink.bearers:
            eng.schedule(Event(0, kind="tti", data="dl"))
        if self.uplink.bearers:
            eng.schedule(Event(0, kind="tti", data="ul"))
        for fid, path in self.paths.items():
            eng.sink.record(0, fid, "path_one_way_ms", path.one_way_ms)
        if self.split_k is not None:
            eng.sink.record(0, self.doc.dnn.flow, "split_k", self.split_k)
        if self.si is not None:
            self.si.start(self._immediate)

    # -- DNN helpers --------------------------------------------------------
    def _dnn_profile(self):
        dnn = self.doc.dnn
        flow = self.doc.flow(dnn.flow)
        uav = self.doc.topology.radio_endpoint(flow)
        server = self.placement[VnfKind.APP_SERVER]
        nodes = self.doc.topology.nodes
        return dnn.profile.scaled(nodes[uav].compute_scale, nodes[server].compute_scale)

    def _uplink_share(self, flow_id: str) -> float:
        st = self.flows[flow_id]
        cell = st.cell
        s = cell.slice_of(flow_id)
        if s is not None:
            return s.reserved_bps
        ids = list(cell.bearers)
        demands = [cell.bearers[i].demand_bps for i in ids]
        capacity = cell.cell.capacity_bps - sum(x.reserved_bps for x in cell.slices)
        return maxmin_fair(capacity, demands)[ids.index(flow_id)]

    def _ai_uplink_bps(self) -> float:
        return self._uplink_share(self.doc.dnn.flow)

    def _ai_path_ms(self) -> float:
        return self.paths[self.doc.dnn.flow].one_way_ms

    # -- handlers ------------------------------------------------------------
    def _on_arrival(self, eng: Engine, ev: Event) -> None:
        st = self.flows[ev.data]
        st.cell.offer(st.flow.id, st.flow.packet_bits, eng.now())
        st.n += 1
        nxt = st.phase + int(st.n * st.period_us + 0.5)
        eng.schedule(Event(nxt, kind="arrival", data=st.flow.id))

    def _on_tti(self, eng: Engine, ev: Event) -> None:
        cell = self.downlink if ev.data == "dl" else self.uplink
        now = eng.now()
        before = {fid: b.served_bits for fid, b in cell.bearers.items()}
        _, deliveries = cell.tti(now)
        for fid, b in cell.bearers.items():
            served = b.served_bits - before[fid]
            self.flows[fid].window_bits += served
            self.flows[fid].telemetry_bits += served
        for d in deliveries:
            self._record_delivery(now, d)
        eng.schedule(Event(now + cell.cell.tti_us, kind="tti", data=ev.data))

    def _record_delivery(self, now: int, d: Delivery) -> None:
        path = self.paths[d.flow_id].one_way_ms
        penalty = us_to_ms(max(0, self.downtime_until - d.delivered_at))
        latency = d.queueing_delay_ms + path + penalty
        sink = self.engine.sink
        sink.record(now, d.flow_id, "queue_delay_ms", d.queueing_delay_ms)
        sink.record(now, d.flow_id, "latency_ms", latency)
        sink.record(now, d.flow_id, "rtt_ms", latency + path)
        self.flows[d.flow_id].telemetry_lat.append(latency)

    def _on_sample(self, eng: Engine, ev: Event) -> None:
        now = eng.now()
        period_us = self.sample_us
        for fid, st in self.flows.items():
            b = st.cell.bearers[fid]
            eng.sink.record(now, fid, "throughput_bps", st.window_bits * 1e6 / period_us)
            eng.sink.record(now, fid, "dropped_packets", b.dropped - st.last_dropped)
            eng.sink.record(now, fid, "queue_len", len(b.queue))
            st.window_bits = 0
            st.last_dropped = b.dropped
        if self.split_k is not None:
            ev_ = evaluate(self._dnn_profile(), self.split_k, self._ai_uplink_bps(), self._ai_path_ms())
            eng.sink.record(now, self.doc.dnn.flow, "inference_latency_ms", ev_.latency_ms)
            eng.sink.record(now, self.doc.dnn.flow, "fps", ev_.fps)
        eng.schedule(Event(now + period_us, kind="sample"))

    def _on_telemetry(self, eng: Engine, ev: Event) -> None:
        now = eng.now()
        period_us = self.telemetry_us
        ai_flow = self.doc.dnn.flow if self.doc.dnn is not None else None
        for fid, st in self.flows.items():
            if self.si is not None:
                b = st.cell.bearers[fid]
                self.si.push("vran", {
                    "entity": fid,
                    "throughput_mbps": st.telemetry_bits / period_us,
                    "queue_len": len(b.queue),
                })
                if fid == ai_flow:
                    latency = evaluate(self._dnn_profile(), self.split_k, self._ai_uplink_bps(),
                                       self._ai_path_ms()).latency_ms
                    self.si.push("aiapp", {"entity": fid, "frame_latency_ms": latency})
                elif st.telemetry_lat:
                    self.si.push("mec", {"entity": fid, "latency_ms": sum(st.telemetry_lat) / len(st.telemetry_lat)})
            st.telemetry_bits = 0
            st.telemetry_lat = []
        eng.schedule(Event(now + period_us, kind="telemetry"))

    # -- actuators -------------------------------------------------------------
    def _apply_slice(self, cmd: AdapterCommand) -> None:
        a = cmd.action
        cell = self.flows[a.flow].cell
        existing = cell.slice_of(a.flow)
        slice_id = existing.id if existing is not None else cmd.payload["slice_id"]
        cell.add_slice(SliceConfig(slice_id, a.reserved_bps, frozenset({a.flow})))
        self.engine.sink.record(self.engine.now(), a.flow, "slice_reserved_bps", a.reserved_bps)

    def _apply_migration(self, cmd: AdapterCommand) -> None:
        a = cmd.action
        now = self.engine.now()
        tti = self.downlink.cell.tti_us
        boundary = -(-now // tti) * tti

        def switch() -> None:
            self.placement = migrate(self.placement, a.vnf, a.node, self.doc.topology)
            self._refresh_paths()
            self.downtime_until = self.engine.now() + ms_to_us(self.doc.migration_downtime_ms)
            t = self.engine.now()
            self.engine.sink.record(t, a.vnf, "migration_downtime_ms", self.doc.migration_downtime_ms)
            for fid, path in self.paths.items():
                self.engine.sink.record(t, fid, "path_one_way_ms", path.one_way_ms)

        self.engine.call_at(boundary, switch)

    def _apply_split(self, cmd: AdapterCommand) -> None:
        self.split_k = cmd.action.k
        self.engine.sink.record(self.engine.now(), cmd.action.flow, "split_k", self.split_k)

    # -- run -------------------------------------------------------------------
    def run(self) -> RunResult:
        sink = self.engine.run_until(self.horizon)
        bearers = {**self.downlink.bearers, **self.uplink.bearers}
        return RunResult(
            doc=self.doc,
            sink=sink,
            si_log=list(self.si.log) if self.si is not None else [],
            arrived={k: b.arrived for k, b in bearers.items()},
            delivered={k: b.delivered for k, b in bearers.items()},
            dropped={k: b.dropped for k, b in bearers.items()},
            queued={k: len(b.queue) for k, b in bearers.items()},
            events=self.engine.executed,
        )


def run_scenario(doc: ScenarioDoc) -> RunResult:
    return Simulation(doc).run()
