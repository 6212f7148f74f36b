"""VNF placement and user-plane path latency."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .topology import SERVER_KINDS, Flow, Topology


class VnfKind(str, Enum):
    UPF = "UPF"
    AMF = "AMF"
    SMF = "SMF"
    HSS = "HSS"
    PCRF = "PCRF"
    APP_SERVER = "AppServer"


DATA_PATH_VNFS = (VnfKind.UPF, VnfKind.APP_SERVER)


class NoPath(LookupError):
    pass


class InvalidTarget(ValueError):
    pass


@dataclass(frozen=True)
class Placement:
    where: Mapping[VnfKind, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "where", {VnfKind(k): v for k, v in self.where.items()})

    def __getitem__(self, vnf: VnfKind | str) -> str:
        return self.where[VnfKind(vnf)]

    def get(self, vnf: VnfKind | str, default: str | None = None) -> str | None:
        return self.where.get(VnfKind(vnf), default)

    def to_dict(self) -> dict[str, str]:
        return {k.value: v for k, v in sorted(self.where.items(), key=lambda kv: kv[0].value)}

    def validate(self, topology: Topology) -> list[str]:
        problems = []
        for vnf in DATA_PATH_VNFS:
            node = self.where.get(vnf)
            if node is None:
                problems.append(f"placement: data-path VNF {vnf.value} is not placed")
            elif node not in topology.nodes:
                problems.append(f"placement: {vnf.value} on unknown node {node}")
            elif topology.kind(node) not in SERVER_KINDS:
                problems.append(f"placement: {vnf.value} on {node} which is not an edge/cloud server")
        for vnf, node in self.where.items():
            if vnf not in DATA_PATH_VNFS and node not in topology.nodes:
                problems.append(f"placement: {vnf.value} on unknown node {node}")
        return problems


@dataclass(frozen=True)
class PathReport:
    one_way_ms: float
    hops: tuple[str, ...]

    @property
    def rtt_ms(self) -> float:
        return 2 * self.one_way_ms


def shortest_path(topology: Topology, src: str, dst: str) -> tuple[float, list[str]]:
    """Dijkstra on link latency. Equal-cost ties resolve to the
    lexicographically smallest node sequence."""
    if src not in topology.nodes or dst not in topology.nodes:
        raise NoPath(f"unknown endpoint {src if src not in topology.nodes else dst}")
    heap: list[tuple[float, list[str]]] = [(0.0, [src])]
    settled: set[str] = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in settled:
            continue
        settled.add(node)
        if node == dst:
            return cost, path
        for nxt, lat in topology.neighbors(node):
            if nxt not in settled:
                heapq.heappush(heap, (cost + lat, path + [nxt]))
    raise NoPath(f"no path from {src} to {dst}")


def path_latency(topology: Topology, placement: Placement, flow: Flow) -> PathReport:
    """Minimum-latency path from the flow's radio end through the UPF host
    and on to the AppServer host."""
    start = topology.radio_endpoint(flow) or flow.src
    upf = placement[VnfKind.UPF]
    app = placement[VnfKind.APP_SERVER]
    first, leg1 = shortest_path(topology, start, upf)
    second, leg2 = shortest_path(topology, upf, app)
    return PathReport(first + second, tuple(leg1 + leg2[1:]))


def migrate(placement: Placement, vnf: VnfKind | str, target_node: str, topology: Topology) -> Placement:
    vnf = VnfKind(vnf)
    if target_node not in topology.nodes or topology.kind(target_node) not in SERVER_KINDS:
        raise InvalidTarget(f"cannot place {vnf.value} on {target_node}: not an edge/cloud server")
    where = dict(placement.where)
    where[vnf] = target_node
    return Placement(where)
