"""Nodes, fixed-latency links and traffic flows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum


class NodeKind(str, Enum):
    UAV = "UAV"
    UE = "UE"
    BASE_STATION = "BaseStation"
    EDGE_SERVER = "EdgeServer"
    CLOUD_SERVER = "CloudServer"
    ROUTER = "Router"


RADIO_KINDS = frozenset({NodeKind.UAV, NodeKind.UE})
COMPUTE_KINDS = frozenset({NodeKind.UAV, NodeKind.EDGE_SERVER, NodeKind.CLOUD_SERVER})
SERVER_KINDS = frozenset({NodeKind.EDGE_SERVER, NodeKind.CLOUD_SERVER})


class FlowClass(str, Enum):
    MISSION_CRITICAL = "MissionCritical"
    BEST_EFFORT = "BestEffort"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    compute_scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", NodeKind(self.kind))
        if self.compute_scale < 0:
            raise TopologyError(f"node {self.id}: compute_scale must be >= 0")
        if self.kind in COMPUTE_KINDS and self.compute_scale <= 0:
            raise TopologyError(f"node {self.id}: {self.kind.value} needs compute_scale > 0")


@dataclass(frozen=True)
class Link:
    src: str
    dst: str
    one_way_latency_ms: float = 0.0
    capacity_bps: float = math.inf

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise TopologyError(f"self-loop on {self.src}")
        if not (0 <= self.one_way_latency_ms < math.inf):
            raise TopologyError(f"link {self.src}-{self.dst}: latency must be finite and >= 0")
        if not self.capacity_bps > 0:
            raise TopologyError(f"link {self.src}-{self.dst}: capacity must be > 0")


@dataclass(frozen=True)
class Flow:
    id: str
    src: str
    dst: str
    demand_bps: float
    flow_class: FlowClass = FlowClass.BEST_EFFORT
    packet_bits: int = 12_000

    def __post_init__(self) -> None:
        object.__setattr__(self, "flow_class", FlowClass(self.flow_class))
        if self.src == self.dst:
            raise TopologyError(f"flow {self.id}: src == dst")
        if not self.demand_bps > 0:
            raise TopologyError(f"flow {self.id}: demand must be > 0")
        if self.packet_bits <= 0:
            raise TopologyError(f"flow {self.id}: packet_bits must be > 0")


@dataclass
class Topology:
    """Undirected graph of nodes joined by fixed-latency links."""

    nodes: dict[str, Node] = field(default_factory=dict)
    links: list[Link] = field(default_factory=list)

    @classmethod
    def build(cls, nodes: list[Node], links: list[Link]) -> "Topology":
        topo = cls()
        for node in nodes:
            topo.add_node(node)
        for link in links:
            topo.add_link(link)
        return topo

    def add_node(self, node: Node) -> None:
        if node.id in self.nodes:
            raise TopologyError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node

    def add_link(self, link: Link) -> None:
        for end in (link.src, link.dst):
            if end not in self.nodes:
                raise TopologyError(f"link references unknown node {end}")
        self.links.append(link)

    def neighbors(self, node_id: str) -> list[tuple[str, float]]:
        out = []
        for link in self.links:
            if link.src == node_id:
                out.append((link.dst, link.one_way_latency_ms))
            elif link.dst == node_id:
                out.append((link.src, link.one_way_latency_ms))
        return out

    def kind(self, node_id: str) -> NodeKind:
        return self.nodes[node_id].kind

    def radio_endpoint(self, flow: Flow) -> str | None:
        """The UAV/UE end of a flow, preferring dst (downlink)."""
        for end in (flow.dst, flow.src):
            if end in self.nodes and self.nodes[end].kind in RADIO_KINDS:
                return end
        return None

    def is_uplink(self, flow: Flow) -> bool:
        return flow.src in self.nodes and self.nodes[flow.src].kind in RADIO_KINDS
