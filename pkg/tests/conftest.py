from __future__ import annotations

from fractions import Fraction

import pytest

from uavsi.placement import Placement, VnfKind
from uavsi.split import DnnProfile, LayerCost
from uavsi.topology import Flow, Link, Node, Topology


def progressive_filling(capacity, demands):
    """Reference max-min allocation: raise every unsatisfied flow in
    lock-step, exact rational arithmetic, until capacity runs out."""
    left = Fraction(capacity)
    want = [Fraction(d) for d in demands]
    alloc = [Fraction(0)] * len(want)
    active = {i for i, d in enumerate(want) if d > 0}
    while active and left > 0:
        step = min(min(want[i] - alloc[i] for i in active), left / len(active))
        for i in active:
            alloc[i] += step
        left -= step * len(active)
        active = {i for i in active if alloc[i] < want[i]}
    return [float(a) for a in alloc]


def default_topology(backhaul_ms: float = 100.0, access_ms: float = 5.0) -> Topology:
    nodes = [Node("uav", "UAV"), Node("ue1", "UE", 0.0), Node("bs", "BaseStation", 0.0),
             Node("edge", "EdgeServer"), Node("cloud", "CloudServer")]
    links = [Link("uav", "bs", 0.0), Link("ue1", "bs", 0.0), Link("bs", "edge", access_ms),
             Link("edge", "cloud", backhaul_ms)]
    return Topology.build(nodes, links)


def placed(upf: str, app: str) -> Placement:
    return Placement({VnfKind.UPF: upf, VnfKind.APP_SERVER: app, VnfKind.AMF: upf})


@pytest.fixture
def topology() -> Topology:
    return default_topology()


@pytest.fixture
def uav_flow() -> Flow:
    return Flow("uav-1", "edge", "uav", 13e6, "MissionCritical")


@pytest.fixture
def toy_profile() -> DnnProfile:
    return DnnProfile(
        "toy",
        (LayerCost(5, 1, 1_000_000), LayerCost(5, 1, 500_000), LayerCost(5, 1, 250_000)),
        input_bits=2_000_000,
    )


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when == "call" and "test_acceptance.py::test_criterion_" in rep.nodeid:
                name = rep.nodeid.split("::test_")[-1]
                lines.append((name, "PASS" if outcome == "passed" else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for name, verdict in sorted(lines, key=lambda x: int(x[0].split("_")[1])):
            terminalreporter.write_line(f"{verdict:4} {name}")
