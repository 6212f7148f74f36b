"""Scenario documents: JSON in, validated objects out.

Validation collects every problem before giving up so a broken scenario
can be fixed in one pass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .actions import Action
from .placement import Placement, VnfKind
from .policy import Policy, PolicyError, compile_policies, policy_from_dict
from .radio import Cell, SliceConfig
from .si import AdapterDescriptor, SiConfig, default_adapters
from .split import DnnProfile, Objective, ProfileFormatError, load_profile, reference_profile
from .topology import Flow, Link, Node, Topology

BUILTIN_PROFILE = "builtin:reference"


class ScenarioError(ValueError):
    def __init__(self, errors: list[str]) -> None:
        self.errors = list(errors)
        super().__init__("invalid scenario:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class CellParams:
    cell: Cell = field(default_factory=Cell)
    queue_cap_packets: int = 25


@dataclass
class DnnConfig:
    profile: DnnProfile
    flow: str
    objective: Objective = Objective.MIN_LATENCY
    split: int | None = None  # None: start at the planner's choice
    profile_path: str = BUILTIN_PROFILE


@dataclass
class ScenarioDoc:
    seed: int
    horizon_s: float
    topology: Topology
    flows: list[Flow]
    placement: Placement
    downlink: CellParams = field(default_factory=CellParams)
    uplink: CellParams = field(default_factory=CellParams)
    slices: list[SliceConfig] = field(default_factory=list)
    migration_downtime_ms: float = 0.0
    dnn: DnnConfig | None = None
    policies: list[Policy] = field(default_factory=list)
    si: SiConfig = field(default_factory=lambda: SiConfig(enabled=False))
    adapters: list[AdapterDescriptor] = field(default_factory=default_adapters)
    sample_period_ms: float = 100.0
    telemetry_period_ms: float = 10.0
    name: str = "scenario"

    def flow(self, flow_id: str) -> Flow:
        for f in self.flows:
            if f.id == flow_id:
                return f
        raise KeyError(flow_id)

    def demands(self) -> dict[str, float]:
        return {f.id: f.demand_bps for f in self.flows}

    def compiled(self):
        return compile_policies(self.policies, self.demands())


def _num(doc: Mapping[str, Any], key: str, default: float, where: str, errors: list[str], kind=float):
    try:
        return kind(doc.get(key, default))
    except (TypeError, ValueError):
        errors.append(f"{where}.{key}: not a number: {doc.get(key)!r}")
        return kind(default)


def _cell_params(doc: Mapping[str, Any] | None, where: str, errors: list[str]) -> CellParams:
    doc = dict(doc or {})
    try:
        cell = Cell(
            bandwidth_hz=float(doc.get("bandwidth_hz", 5e6)),
            prb_count=int(doc.get("prb_count", 25)),
            tti_ms=float(doc.get("tti_ms", 1.0)),
            bits_per_prb_per_tti=int(doc.get("bits_per_prb_per_tti", 720)),
        )
        cap = int(doc.get("queue_cap_packets", 25))
    except (TypeError, ValueError) as exc:
        errors.append(f"{where}: {exc}")
        return CellParams()
    if cell.prb_count <= 0 or cell.bits_per_prb_per_tti <= 0 or cell.tti_ms <= 0:
        errors.append(f"{where}: prb_count, bits_per_prb_per_tti and tti_ms must be > 0")
    if cap <= 0:
        errors.append(f"{where}: queue_cap_packets must be > 0")
    return CellParams(cell, cap)


def scenario_from_dict(doc: Mapping[str, Any], base_dir: Path | None = None) -> ScenarioDoc:
    errors: list[str] = []
    base_dir = base_dir or Path.cwd()

    topo = Topology()
    topo_doc = doc.get("topology") or {}
    for i, nd in enumerate(topo_doc.get("nodes", [])):
        try:
            topo.add_node(Node(str(nd["id"]), nd["kind"], float(nd.get("compute_scale", 1.0))))
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"topology.nodes[{i}]: {exc}")
    if not topo.nodes:
        errors.append("topology: no nodes")
    for i, ld in enumerate(topo_doc.get("links", [])):
        try:
            cap = ld.get("capacity_bps")
            link = Link(str(ld["src"]), str(ld["dst"]), float(ld.get("one_way_latency_ms", 0.0)),
                        float("inf") if cap is None else float(cap))
            topo.add_link(link)
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"topology.links[{i}]: {exc}")

    flows: list[Flow] = []
    for i, fd in enumerate(doc.get("flows", [])):
        try:
            flow = Flow(str(fd["id"]), str(fd["src"]), str(fd["dst"]), float(fd["demand_bps"]),
                        fd.get("class", "BestEffort"), int(fd.get("packet_bits", 12_000)))
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"flows[{i}]: {exc}")
            continue
        for end in (flow.src, flow.dst):
            if end not in topo.nodes:
                errors.append(f"flows[{i}] ({flow.id}): unknown node {end}")
        if flow.src in topo.nodes and flow.dst in topo.nodes and topo.radio_endpoint(flow) is None:
            errors.append(f"flows[{i}] ({flow.id}): neither end is a UAV/UE")
        if any(f.id == flow.id for f in flows):
            errors.append(f"flows[{i}]: duplicate flow id {flow.id}")
        flows.append(flow)
    flow_ids = {f.id for f in flows}

    downlink = _cell_params(doc.get("cell"), "cell", errors)
    uplink = _cell_params(doc.get("uplink_cell", doc.get("cell")), "uplink_cell", errors)

    slices: list[SliceConfig] = []
    for i, sd in enumerate(doc.get("slices", [])):
        try:
            s = SliceConfig(str(sd["id"]), float(sd["reserved_bps"]), frozenset(map(str, sd["members"])))
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"slices[{i}]: {exc}")
            continue
        for m in sorted(s.member_flow_ids - flow_ids):
            errors.append(f"slices[{i}] ({s.id}): unknown flow {m}")
        for other in slices:
            if other.member_flow_ids & s.member_flow_ids:
                errors.append(f"slices[{i}] ({s.id}): members overlap slice {other.id}")
        slices.append(s)
    by_id = {f.id: f for f in flows if f.src in topo.nodes and f.dst in topo.nodes
             and topo.radio_endpoint(f) is not None}
    reserved = {False: 0.0, True: 0.0}  # keyed by "is uplink"
    for i, s in enumerate(slices):
        directions = {topo.is_uplink(by_id[m]) for m in s.member_flow_ids if m in by_id}
        if len(directions) > 1:
            errors.append(f"slices[{i}] ({s.id}): members mix uplink and downlink flows")
        elif directions:
            reserved[directions.pop()] += s.reserved_bps
    if reserved[False] > downlink.cell.capacity_bps:
        errors.append("slices: downlink reservation exceeds cell capacity")
    if reserved[True] > uplink.cell.capacity_bps:
        errors.append("slices: uplink reservation exceeds cell capacity")

    place_doc = doc.get("placement") or {}
    placement = Placement()
    try:
        placement = Placement({VnfKind(k): str(v) for k, v in place_doc.get("vnfs", {}).items()})
        if topo.nodes:
            errors.extend(placement.validate(topo))
    except ValueError as exc:
        errors.append(f"placement: {exc}")
    downtime = _num(place_doc, "migration_downtime_ms", 0.0, "placement", errors)

    dnn = None
    if doc.get("dnn"):
        dd = doc["dnn"]
        path = str(dd.get("profile_path", BUILTIN_PROFILE))
        try:
            if path == BUILTIN_PROFILE:
                profile = reference_profile()
            else:
                p = Path(path)
                profile = load_profile(p if p.is_absolute() else base_dir / p)
            dnn = DnnConfig(profile, str(dd["flow"]), Objective(dd.get("objective", "MinLatency")),
                            dd.get("split"), path)
            if dnn.flow not in flow_ids:
                errors.append(f"dnn: unknown flow {dnn.flow}")
            if dnn.split is not None and not 0 <= int(dnn.split) <= profile.n_layers:
                errors.append(f"dnn: split {dnn.split} outside 0..{profile.n_layers}")
        except (OSError, ProfileFormatError, KeyError, ValueError) as exc:
            errors.append(f"dnn: {exc}")

    policies: list[Policy] = []
    for i, pd in enumerate(doc.get("policies", [])):
        try:
            policies.append(policy_from_dict(pd, i))
        except (PolicyError, KeyError, ValueError, TypeError) as exc:
            errors.append(f"policies[{i}]: {exc}")
    try:
        goals, immediate = compile_policies(policies, {f.id: f.demand_bps for f in flows})
        for g in goals:
            if g.subject not in flow_ids:
                errors.append(f"policies: goal {g.id} references unknown flow {g.subject}")
        for a in immediate:
            if a.flow is not None and a.flow not in flow_ids:
                errors.append(f"policies: {a.describe()} references unknown flow {a.flow}")
            if a.node is not None and a.node not in topo.nodes:
                errors.append(f"policies: {a.describe()} references unknown node {a.node}")
    except PolicyError as exc:
        errors.append(str(exc))

    si_doc = dict(doc.get("si") or {})
    si = SiConfig(
        enabled=bool(si_doc.get("enabled", False)),
        loop_period_ms=_num(si_doc, "loop_period_ms", 100.0, "si", errors),
        dwell_ms=_num(si_doc, "dwell_ms", 200.0, "si", errors),
        hysteresis=_num(si_doc, "hysteresis", 0.02, "si", errors),
        cooldown_ms=_num(si_doc, "cooldown_ms", 1000.0, "si", errors),
        context_window=_num(si_doc, "context_window", 64, "si", errors, int),
    )
    if si.loop_period_ms <= 0 or si.dwell_ms <= 0 or si.context_window <= 0 or si.hysteresis < 0:
        errors.append("si: loop_period_ms, dwell_ms, context_window must be > 0 and hysteresis >= 0")
    adapters = default_adapters()
    if "adapters" in si_doc:
        adapters = []
        for i, ad in enumerate(si_doc["adapters"]):
            try:
                defaults = {a.system.value: a for a in default_adapters()}
                base = defaults.get(ad["system"])
                adapters.append(AdapterDescriptor(
                    ad["system"], ad.get("awareness", base.awareness if base else "Unaware"),
                    frozenset(ad["accepts"]) if "accepts" in ad else (base.accepts if base else frozenset()),
                    float(ad.get("actuation_delay_ms", 10.0)),
                    float(ad.get("local_decision_delay_ms", 0.0)),
                ))
            except (KeyError, ValueError, TypeError) as exc:
                errors.append(f"si.adapters[{i}]: {exc}")

    metrics_doc = dict(doc.get("metrics") or {})
    sample_ms = _num(metrics_doc, "sample_period_ms", 100.0, "metrics", errors)
    telemetry_ms = _num(metrics_doc, "telemetry_period_ms", 10.0, "metrics", errors)
    if sample_ms <= 0 or telemetry_ms <= 0:
        errors.append("metrics: periods must be > 0")

    try:
        seed = int(doc.get("seed", 42))
        horizon = float(doc.get("horizon_s", 10.0))
        if horizon <= 0:
            errors.append("horizon_s must be > 0")
    except (TypeError, ValueError) as exc:
        errors.append(f"seed/horizon: {exc}")
        seed, horizon = 42, 10.0

    if errors:
        raise ScenarioError(errors)
    return ScenarioDoc(
        seed=seed, horizon_s=horizon, topology=topo, flows=flows, placement=placement,
        downlink=downlink, uplink=uplink, slices=slices, migration_downtime_ms=downtime,
        dnn=dnn, policies=policies, si=si, adapters=adapters,
        sample_period_ms=sample_ms, telemetry_period_ms=telemetry_ms,
        name=str(doc.get("name", "scenario")),
    )


def load_scenario(path: str | Path) -> ScenarioDoc:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ScenarioError([f"cannot read {path}: {exc}"]) from None
    except json.JSONDecodeError as exc:
        raise ScenarioError([f"{path}: invalid JSON: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ScenarioError([f"{path}: top level must be an object"])
    return scenario_from_dict(doc, path.parent)


def builtin_scenario_path(name: str) -> Path:
    return Path(str(resources.files("uavsi").joinpath(f"scenarios/{name}.json")))


def builtin_scenarios() -> list[str]:
    folder = resources.files("uavsi").joinpath("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def immediate_actions(doc: ScenarioDoc) -> list[Action]:
    return doc.compiled()[1]
