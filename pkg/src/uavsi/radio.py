"""TTI-granular downlink/uplink resource allocation.

Two scheduling modes share one code path: plain max-min fair sharing of
the cell's PRBs, and slice-aware scheduling where each slice is first
granted enough PRBs to carry its reserved rate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .engine import US_PER_MS, ms_to_us


class OverSubscribedSlices(ValueError):
    pass


@dataclass(frozen=True)
class Cell:
    bandwidth_hz: float = 5e6
    prb_count: int = 25
    tti_ms: float = 1.0
    bits_per_prb_per_tti: int = 720

    @property
    def capacity_bps(self) -> float:
        return self.prb_count * self.bits_per_prb_per_tti * 1000.0 / self.tti_ms

    @property
    def tti_us(self) -> int:
        return ms_to_us(self.tti_ms)

    def prbs_for_rate(self, rate_bps: float) -> int:
        """PRBs per TTI needed to carry ``rate_bps``, rounded up."""
        bits = Fraction(rate_bps) * Fraction(self.tti_ms) / 1000
        return math.ceil(bits / self.bits_per_prb_per_tti)


@dataclass
class SliceConfig:
    id: str
    reserved_bps: float
    member_flow_ids: frozenset[str]

    def __post_init__(self) -> None:
        self.member_flow_ids = frozenset(self.member_flow_ids)
        if not self.reserved_bps > 0:
            raise ValueError(f"slice {self.id}: reserved_bps must be > 0")


def check_slices(cell: Cell, slices: Sequence[SliceConfig]) -> None:
    total = sum(s.reserved_bps for s in slices)
    if total > cell.capacity_bps:
        raise OverSubscribedSlices(
            f"reserved {total:.0f} bps exceeds cell capacity {cell.capacity_bps:.0f} bps"
        )
    seen: set[str] = set()
    for s in slices:
        overlap = seen & s.member_flow_ids
        if overlap:
            raise ValueError(f"flow(s) {sorted(overlap)} belong to more than one slice")
        seen |= s.member_flow_ids


@dataclass
class Bearer:
    """Per-flow FIFO at the base station."""

    flow_id: str
    demand_bps: float
    queue_cap_packets: int = 25
    queue: deque = field(default_factory=deque)  # [packet_bits, enqueue_time_us]
    head_served_bits: int = 0
    deficit: float = 0.0
    backlog_bits: int = 0
    arrived: int = 0
    dropped: int = 0
    delivered: int = 0
    served_bits: int = 0

    def offer(self, packet_bits: int, now_us: int) -> bool:
        """Tail-drop enqueue. Returns False when the packet is dropped."""
        self.arrived += 1
        if len(self.queue) >= self.queue_cap_packets:
            self.dropped += 1
            return False
        self.queue.append((packet_bits, now_us))
        self.backlog_bits += packet_bits
        return True

    @property
    def backlogged(self) -> bool:
        return self.backlog_bits > 0


@dataclass(frozen=True)
class Delivery:
    flow_id: str
    packet_bits: int
    queueing_delay_ms: float
    enqueue_time: int
    delivered_at: int


def maxmin_fair(capacity_bps: float, demands: Sequence[float]) -> list[float]:
    """Water-filling allocation of ``capacity_bps`` over ``demands``.

    No flow gets more than it asks for; what a satisfied flow leaves unused
    is split evenly among the rest.
    """
    alloc = [0.0] * len(demands)
    remaining = float(capacity_bps)
    order = sorted(range(len(demands)), key=lambda i: (demands[i], i))
    for pos, i in enumerate(order):
        left = len(order) - pos
        share = remaining / left
        give = min(float(demands[i]), share)
        alloc[i] = give
        remaining -= give
    return alloc


def _integer_split(avail: int, needs: list[int], weights: list[float]) -> list[int]:
    """Hand out ``avail`` whole PRBs one at a time to the largest weight
    still short of its need. Ties go to the lowest index."""
    grant = [0] * len(needs)
    for _ in range(avail):
        best = -1
        for i, need in enumerate(needs):
            if grant[i] < need and (best < 0 or weights[i] - grant[i] > weights[best] - grant[best]):
                best = i
        if best < 0:
            break
        grant[best] += 1
    return grant


def _deficit_share(avail: int, bearers: list[Bearer], needs: list[int]) -> list[int]:
    """Integer PRB grants tracking the max-min fractional share through
    per-bearer deficit counters."""
    shares = maxmin_fair(avail, needs)
    grant = []
    for b, need, share in zip(bearers, needs, shares):
        if need == 0:
            b.deficit = 0.0
            grant.append(0)
            continue
        b.deficit += share
        grant.append(min(need, max(0, math.floor(b.deficit))))
    excess = sum(grant) - avail
    while excess > 0:
        j = min(
            (i for i in range(len(grant)) if grant[i] > 0),
            key=lambda i: (bearers[i].deficit - grant[i], -i),
        )
        grant[j] -= 1
        excess -= 1
    leftover = avail - sum(grant)
    while leftover > 0:
        best = -1
        for i, need in enumerate(needs):
            if grant[i] < need and (
                best < 0
                or bearers[i].deficit - grant[i] > bearers[best].deficit - grant[best]
            ):
                best = i
        if best < 0:
            break
        grant[best] += 1
        leftover -= 1
    for b, g, need in zip(bearers, grant, needs):
        if need:
            b.deficit = min(1.0, max(-1.0, b.deficit - g))
    return grant


def allocate_tti(
    cell: Cell,
    bearers: Sequence[Bearer],
    slices: Sequence[SliceConfig] | None = None,
) -> dict[str, int]:
    """PRB grant per flow for one TTI.

    Slice members are served first from their reservation; unused reserved
    PRBs fall back to the shared pool, and PRBs the shared bearers cannot
    use go back to slice members above their reservation.
    """
    if not bearers:
        raise ValueError("allocate_tti needs at least one bearer")
    slices = list(slices or [])
    check_slices(cell, slices)
    by_id = {b.flow_id: b for b in bearers}
    for s in slices:
        missing = s.member_flow_ids - by_id.keys()
        if missing:
            raise ValueError(f"slice {s.id} references unknown bearer(s) {sorted(missing)}")

    bpp = cell.bits_per_prb_per_tti
    need = {b.flow_id: -(-b.backlog_bits // bpp) for b in bearers}
    alloc = {b.flow_id: 0 for b in bearers}
    free = cell.prb_count

    sliced: set[str] = set()
    for s in slices:
        members = [b for b in bearers if b.flow_id in s.member_flow_ids]
        sliced.update(s.member_flow_ids)
        budget = min(cell.prbs_for_rate(s.reserved_bps), free, sum(need[b.flow_id] for b in members))
        grants = _deficit_share(budget, members, [need[b.flow_id] for b in members])
        for b, g in zip(members, grants):
            alloc[b.flow_id] += g
        free -= sum(grants)

    shared = [b for b in bearers if b.flow_id not in sliced]
    if shared:
        grants = _deficit_share(free, shared, [need[b.flow_id] for b in shared])
        for b, g in zip(shared, grants):
            alloc[b.flow_id] += g
        free -= sum(grants)

    if free > 0 and sliced:
        members = [b for b in bearers if b.flow_id in sliced]
        extra_need = [need[b.flow_id] - alloc[b.flow_id] for b in members]
        weights = maxmin_fair(free, extra_need)
        for b, g in zip(members, _integer_split(free, extra_need, weights)):
            alloc[b.flow_id] += g
    return alloc


def serve_tti(
    bearers: Iterable[Bearer],
    allocation: Mapping[str, int],
    bits_per_prb: int,
    now_us: int,
    tti_us: int = US_PER_MS,
) -> list[Delivery]:
    """Drain each bearer head-of-line by its granted bits.

    A packet counts as delivered at the end of the TTI carrying its last
    bit; a partially sent head packet keeps its progress for the next TTI.
    """
    done_at = now_us + tti_us
    out: list[Delivery] = []
    for b in bearers:
        budget = allocation.get(b.flow_id, 0) * bits_per_prb
        while budget > 0 and b.queue:
            bits, t_in = b.queue[0]
            left = bits - b.head_served_bits
            if budget >= left:
                b.queue.popleft()
                b.head_served_bits = 0
                b.backlog_bits -= left
                b.served_bits += left
                b.delivered += 1
                budget -= left
                out.append(Delivery(b.flow_id, bits, (done_at - t_in) / US_PER_MS, t_in, done_at))
            else:
                b.head_served_bits += budget
                b.backlog_bits -= budget
                b.served_bits += budget
                budget = 0
    return out


class RadioCell:
    """A cell with its bearers and active slices; one ``tti()`` per TTI."""

    def __init__(self, cell: Cell, slices: Iterable[SliceConfig] = ()) -> None:
        self.cell = cell
        self.bearers: dict[str, Bearer] = {}
        self.slices: list[SliceConfig] = []
        for s in slices:
            self.add_slice(s)

    def add_bearer(self, flow_id: str, demand_bps: float, queue_cap_packets: int = 25) -> Bearer:
        b = Bearer(flow_id, demand_bps, queue_cap_packets)
        self.bearers[flow_id] = b
        return b

    def add_slice(self, s: SliceConfig) -> None:
        check_slices(self.cell, [x for x in self.slices if x.id != s.id] + [s])
        self.slices = [x for x in self.slices if x.id != s.id] + [s]

    def remove_slice(self, slice_id: str) -> None:
        self.slices = [x for x in self.slices if x.id != slice_id]

    def slice_of(self, flow_id: str) -> SliceConfig | None:
        for s in self.slices:
            if flow_id in s.member_flow_ids:
                return s
        return None

    def offer(self, flow_id: str, packet_bits: int, now_us: int) -> bool:
        return self.bearers[flow_id].offer(packet_bits, now_us)

    def tti(self, now_us: int) -> tuple[dict[str, int], list[Delivery]]:
        bearers = list(self.bearers.values())
        alloc = allocate_tti(self.cell, bearers, self.slices)
        return alloc, serve_tti(bearers, alloc, self.cell.bits_per_prb_per_tti, now_us, self.cell.tti_us)
