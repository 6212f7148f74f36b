from __future__ import annotations

import random

import pytest

from conftest import progressive_filling
from uavsi.radio import (
    Bearer,
    Cell,
    OverSubscribedSlices,
    RadioCell,
    SliceConfig,
    allocate_tti,
    maxmin_fair,
    serve_tti,
)

PKT = 12000


def _backlogged(flow_id: str, packets: int = 25) -> Bearer:
    b = Bearer(flow_id, 5e6, queue_cap_packets=10_000)
    for _ in range(packets):
        b.offer(PKT, 0)
    return b


def _refill(b: Bearer, now: int, packets: int = 20) -> None:
    while len(b.queue) < packets:
        b.offer(PKT, now)


def test_default_cell_capacity():
    cell = Cell()
    assert cell.capacity_bps == 18e6
    assert cell.tti_us == 1000
    assert cell.prbs_for_rate(13e6) == 19


@pytest.mark.parametrize(
    "capacity, demands, expected",
    [
        (18e6, [13e6, 5e6, 5e6, 5e6], [4.5e6] * 4),
        (18e6, [13e6, 5e6], [13e6, 5e6]),
        (5e6, [5e6, 5e6, 5e6], [5e6 / 3] * 3),
        (10.0, [], []),
        (0.0, [3.0, 4.0], [0.0, 0.0]),
        (10.0, [0.0, 20.0], [0.0, 10.0]),
    ],
)
def test_maxmin_examples(capacity, demands, expected):
    assert maxmin_fair(capacity, demands) == pytest.approx(expected, abs=1.0)


def test_maxmin_matches_progressive_filling():
    rng = random.Random(1)
    for _ in range(1000):
        n = rng.randint(1, 16)
        demands = [rng.choice([0.0, rng.uniform(0, 20e6), float(rng.randint(0, 10) * 1e6)]) for _ in range(n)]
        capacity = rng.uniform(0, 40e6)
        got = maxmin_fair(capacity, demands)
        want = progressive_filling(capacity, demands)
        assert all(abs(a - b) <= 1.0 for a, b in zip(got, want))
        assert sum(got) == pytest.approx(min(capacity, sum(demands)), abs=n)


def test_four_backlogged_bearers_rotate():
    cell = Cell()
    bearers = [_backlogged(f"f{i}", 200) for i in range(4)]
    grants = [allocate_tti(cell, bearers) for _ in range(40)]
    for t in range(len(grants) - 3):
        for fid in grants[0]:
            assert sum(g[fid] for g in grants[t:t + 4]) == 25
    assert sorted(grants[0].values()) == [6, 6, 6, 7]
    assert all(sum(g.values()) == 25 for g in grants)


def test_slice_first_then_shared():
    cell = Cell()
    bearers = [_backlogged("uav")] + [_backlogged(f"ue{i}") for i in range(3)]
    s = SliceConfig("uav-slice", 13e6, {"uav"})
    alloc = allocate_tti(cell, bearers, [s])
    assert alloc["uav"] == 19
    assert sum(alloc[f"ue{i}"] for i in range(3)) == 6


def test_empty_bearer_gets_nothing():
    assert allocate_tti(Cell(), [Bearer("a", 1e6)]) == {"a": 0}


def test_allocate_requires_bearers():
    with pytest.raises(ValueError):
        allocate_tti(Cell(), [])


def test_oversubscribed_slices_rejected():
    bearers = [_backlogged("a"), _backlogged("b")]
    with pytest.raises(OverSubscribedSlices):
        allocate_tti(Cell(), bearers, [SliceConfig("x", 10e6, {"a"}), SliceConfig("y", 9e6, {"b"})])
    with pytest.raises(OverSubscribedSlices):
        RadioCell(Cell()).add_slice(SliceConfig("x", 19e6, {"a"}))


def test_overlapping_slices_rejected():
    with pytest.raises(ValueError):
        allocate_tti(Cell(), [_backlogged("a")], [SliceConfig("x", 1e6, {"a"}), SliceConfig("y", 1e6, {"a"})])


def test_idle_slice_returns_prbs_to_pool():
    bearers = [Bearer("uav", 13e6), _backlogged("ue0", 100)]
    alloc = allocate_tti(Cell(), bearers, [SliceConfig("s", 13e6, {"uav"})])
    assert alloc == {"uav": 0, "ue0": 25}


def test_slice_member_absorbs_leftover():
    bearers = [_backlogged("uav", 100), Bearer("ue0", 5e6)]
    alloc = allocate_tti(Cell(), bearers, [SliceConfig("s", 13e6, {"uav"})])
    assert alloc == {"uav": 25, "ue0": 0}


def test_serve_single_small_packet():
    b = Bearer("a", 1e6)
    b.offer(720, 3000)
    out = serve_tti([b], {"a": 1}, 720, now_us=5000)
    assert len(out) == 1
    d = out[0]
    assert (d.flow_id, d.packet_bits) == ("a", 720)
    assert d.queueing_delay_ms == pytest.approx(3.0)
    assert not b.queue and b.delivered == 1


def test_serve_carries_partial_packet():
    b = Bearer("a", 1e6)
    b.offer(PKT, 0)
    assert serve_tti([b], {"a": 10}, 720, 0) == []
    assert b.head_served_bits == 7200
    out = serve_tti([b], {"a": 10}, 720, 1000)
    assert [d.queueing_delay_ms for d in out] == [2.0]
    assert b.served_bits == PKT


def test_tail_drop_counts():
    b = Bearer("a", 1e6, queue_cap_packets=2)
    assert [b.offer(PKT, 0) for _ in range(4)] == [True, True, False, False]
    assert (b.arrived, b.dropped, len(b.queue)) == (4, 2, 2)


def test_work_conservation_random():
    rng = random.Random(5)
    for _ in range(200):
        bearers = [Bearer(f"f{i}", 1e6) for i in range(rng.randint(1, 6))]
        for b in bearers:
            for _ in range(rng.randint(0, 3)):
                b.offer(rng.choice([720, 5000, PKT]), 0)
        slices = [SliceConfig("s", rng.uniform(1e6, 17e6), {"f0"})] if rng.random() < 0.5 else []
        alloc = allocate_tti(Cell(), bearers, slices)
        total = sum(alloc.values())
        backlog_prbs = sum(-(-b.backlog_bits // 720) for b in bearers)
        assert total <= 25
        assert total == min(25, backlog_prbs)
        for b in bearers:
            assert alloc[b.flow_id] <= -(-b.backlog_bits // 720)


@pytest.mark.parametrize("reserved", [2e6, 9e6, 13e6, 17e6])
def test_slice_isolation(reserved):
    rng = random.Random(int(reserved))
    rc = RadioCell(Cell())
    rc.add_bearer("m", reserved, 10_000)
    others = {f"o{i}": rng.uniform(1e6, 30e6) for i in range(rng.randint(1, 5))}
    for fid, rate in others.items():
        rc.add_bearer(fid, rate, 25)
    rc.add_slice(SliceConfig("s", reserved, {"m"}))
    member = rc.bearers["m"]
    served = []
    for t in range(3000):
        _refill(member, t * 1000)
        before = member.served_bits
        _run_cbr_step(rc, others, t)
        served.append(member.served_bits - before)
    for start in range(0, 2001, 250):
        assert sum(served[start:start + 1000]) >= 0.98 * reserved


def _run_cbr_step(rc: RadioCell, rates: dict[str, float], t: int) -> None:
    now = t * 1000
    for fid, rate in rates.items():
        period = PKT * 1000 / rate
        while rc.bearers[fid].arrived * period <= t:
            rc.offer(fid, PKT, now)
    rc.tti(now)


def test_throughput_accounting():
    rc = RadioCell(Cell())
    rates = {"uav": 13e6, "ue0": 5e6, "ue1": 5e6, "ue2": 5e6}
    for fid, r in rates.items():
        rc.add_bearer(fid, r, 25)
    granted = dict.fromkeys(rates, 0)
    credit = dict.fromkeys(rates, 0.0)
    for t in range(5000):
        for fid, r in rates.items():
            credit[fid] += r / 1000
            while credit[fid] >= PKT:
                rc.offer(fid, PKT, t * 1000)
                credit[fid] -= PKT
        alloc, _ = rc.tti(t * 1000)
        for fid, g in alloc.items():
            granted[fid] += g * 720
    for fid, r in rates.items():
        served = rc.bearers[fid].served_bits
        assert served <= min(r * 5, granted[fid]) + PKT
        assert served / 5 == pytest.approx(4.5e6, rel=0.01)


def test_overload_queue_delay_near_full_queue_formula():
    # 13 Mbps offered to a 4.5 Mbps share with a 25-packet queue
    rc = RadioCell(Cell())
    rates = {"uav": 13e6, "ue0": 5e6, "ue1": 5e6, "ue2": 5e6}
    for fid, r in rates.items():
        rc.add_bearer(fid, r, 25)
    delays = []
    credit = dict.fromkeys(rates, 0.0)
    for t in range(5000):
        for fid, r in rates.items():
            credit[fid] += r / 1000
            while credit[fid] >= PKT:
                rc.offer(fid, PKT, t * 1000)
                credit[fid] -= PKT
        _, out = rc.tti(t * 1000)
        if t >= 1000:
            delays += [d.queueing_delay_ms for d in out if d.flow_id == "uav"]
    expected = 25 * PKT / 4.5e6 * 1000
    assert sum(delays) / len(delays) == pytest.approx(expected, rel=0.05)


def test_matched_rate_keeps_delay_small():
    rc = RadioCell(Cell())
    rc.add_bearer("a", 18e6, 25)
    delays = []
    credit = 0.0
    for t in range(2000):
        credit += 18e6 / 1000
        while credit >= PKT:
            rc.offer("a", PKT, t * 1000)
            credit -= PKT
        _, out = rc.tti(t * 1000)
        delays += [d.queueing_delay_ms for d in out]
    assert max(delays) <= 3.0
