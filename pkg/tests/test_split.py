from __future__ import annotations

import random

import pytest

from uavsi.split import (
    DnnProfile,
    IndexOutOfRange,
    LayerCost,
    Objective,
    ProfileFormatError,
    best_split,
    evaluate,
    format_profile,
    load_profile,
    parse_profile,
    pipeline_fps,
    reference_profile,
    save_profile,
    split_latency,
    stage_times,
)


def oracle_latency(uav, srv, out_bits, input_bits, k, uplink_bps, path_ms):
    """Plain-list restatement of the latency model, used as the oracle."""
    bits = input_bits if k == 0 else out_bits[k - 1]
    total = 0.0
    for i in range(len(uav)):
        total += uav[i] if i < k else srv[i]
    return total + bits / uplink_bps * 1000 + path_ms


def oracle_fps(uav, srv, out_bits, input_bits, k, uplink_bps):
    bits = input_bits if k == 0 else out_bits[k - 1]
    return 1000 / max(sum(uav[:k]), bits / uplink_bps * 1000, sum(srv[k:]))


@pytest.mark.parametrize("k, latency", [(0, 23.0), (1, 17.0), (2, 16.0), (3, 17.5)])
def test_toy_latency(toy_profile, k, latency):
    assert split_latency(toy_profile, k, 100e6, 0.0) == pytest.approx(latency, abs=1e-12)


def test_toy_stage_times_and_fps(toy_profile):
    assert stage_times(toy_profile, 2, 100e6) == pytest.approx((10, 5, 1))
    assert pipeline_fps(toy_profile, 2, 100e6) == pytest.approx(100.0)
    assert stage_times(toy_profile, 0, 100e6) == pytest.approx((0, 20, 3))
    assert pipeline_fps(toy_profile, 0, 100e6) == pytest.approx(50.0)


def test_toy_best_split_exact(toy_profile):
    best = best_split(toy_profile, 100e6, 0.0)
    assert best.k == 2
    assert best.latency_ms == 16.0


def test_single_layer_fps():
    p = DnnProfile("one", (LayerCost(4.0, 1.0, 8),), input_bits=8)
    assert pipeline_fps(p, 1, 1e15) == pytest.approx(250.0)


def test_equal_costs_tie_to_zero():
    p = DnnProfile("flat", tuple(LayerCost(2.0, 2.0, 0) for _ in range(5)), input_bits=0)
    assert best_split(p, 1e6, 0.0).k == 0


def test_out_of_range_split(toy_profile):
    with pytest.raises(IndexOutOfRange):
        split_latency(toy_profile, 4, 1e6, 0)
    with pytest.raises(IndexOutOfRange):
        evaluate(toy_profile, -1, 1e6, 0)


def _random_profile(rng: random.Random) -> DnnProfile:
    n = rng.randint(1, 50)
    layers = tuple(
        LayerCost(rng.uniform(0, 20), rng.uniform(0, 5), rng.randint(0, 5_000_000)) for _ in range(n)
    )
    return DnnProfile("r", layers, input_bits=rng.randint(0, 5_000_000))


def _columns(p: DnnProfile):
    return ([l.uav_ms for l in p.layers], [l.srv_ms for l in p.layers],
            [l.out_activation_bits for l in p.layers], p.input_bits)


def test_planner_matches_enumeration():
    rng = random.Random(2)
    for _ in range(500):
        p = _random_profile(rng)
        up = rng.uniform(1e6, 100e6)
        path = rng.uniform(0, 200)
        cols = _columns(p)
        lats = [oracle_latency(*cols, k, up, path) for k in range(p.n_layers + 1)]
        fpss = [oracle_fps(*cols, k, up) for k in range(p.n_layers + 1)]
        lo = best_split(p, up, path, Objective.MIN_LATENCY)
        hi = best_split(p, up, path, Objective.MAX_FPS)
        assert lo.latency_ms == pytest.approx(min(lats), rel=1e-12)
        assert hi.fps == pytest.approx(max(fpss), rel=1e-12)
        assert lats[lo.k] == pytest.approx(min(lats), rel=1e-12)
        assert fpss[hi.k] == pytest.approx(max(fpss), rel=1e-12)


def test_monotone_transfer():
    rng = random.Random(8)
    for _ in range(100):
        p = _random_profile(rng)
        prev = None
        for up in (100e6, 50e6, 20e6, 10e6, 5e6, 1e6):
            best = best_split(p, up, 0.0)
            if prev is not None:
                assert best.latency_ms >= prev.latency_ms - 1e-9
                prev_bits = p.input_bits if prev.k == 0 else p.layers[prev.k - 1].out_activation_bits
                bits = p.input_bits if best.k == 0 else p.layers[best.k - 1].out_activation_bits
                assert bits <= prev_bits
            prev = best


def test_cloud_penalty_additive():
    rng = random.Random(9)
    for _ in range(200):
        p = _random_profile(rng)
        up = rng.uniform(1e6, 100e6)
        edge = best_split(p, up, 5.0)
        cloud = best_split(p, up, 105.0)
        assert 0 <= cloud.latency_ms - edge.latency_ms <= 100 + 1e-9
        assert cloud.k == edge.k


def test_fps_latency_consistency():
    rng = random.Random(10)
    for _ in range(100):
        p = _random_profile(rng)
        up = rng.uniform(1e6, 100e6)
        for k in range(p.n_layers + 1):
            ev = evaluate(p, k, up, rng.uniform(0, 100))
            assert ev.fps >= 1000 / ev.latency_ms - 1e-9


def test_reference_profile_shape():
    p = reference_profile()
    assert p.n_layers == 40
    assert "synthetic" in p.name
    assert p.quant_bits == 8


def test_reference_profile_edge_optimum():
    p = reference_profile()
    best = best_split(p, 18e6, 5.0)
    lats = [split_latency(p, k, 18e6, 5.0) for k in range(41)]
    assert best.k == 10 == lats.index(min(lats))
    assert best.latency_ms == pytest.approx(62.38, abs=0.01)


def test_profile_round_trip(tmp_path, toy_profile):
    path = tmp_path / "p.csv"
    save_profile(toy_profile, path)
    assert load_profile(path) == toy_profile
    ref = reference_profile()
    assert parse_profile(format_profile(ref)) == ref


@pytest.mark.parametrize(
    "text",
    [
        "",
        "a,2,10,8\n1,1,1,1\n",
        "a,1,10\n1,1,1,1\n",
        "a,1,10,8\n2,1,1,1\n",
        "a,1,10,8\n1,x,1,1\n",
        "a,1,10,8\n1,-1,1,1\n",
        "a,1,10,8\n1,1,1\n",
    ],
)
def test_bad_profiles_rejected(text):
    with pytest.raises(ProfileFormatError):
        parse_profile(text)
