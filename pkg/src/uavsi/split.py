"""Split-point planning for a DNN shared between a UAV and a server.

Layers ``1..k`` run on the UAV, the output of layer ``k`` (or the raw frame
when ``k == 0``) is sent uplink, and layers ``k+1..N`` run on the server.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path


class IndexOutOfRange(IndexError):
    pass


class ProfileFormatError(ValueError):
    pass


class Objective(str, Enum):
    MIN_LATENCY = "MinLatency"
    MAX_FPS = "MaxFps"


@dataclass(frozen=True)
class LayerCost:
    uav_ms: float
    srv_ms: float
    out_activation_bits: int


@dataclass(frozen=True)
class DnnProfile:
    name: str
    layers: tuple[LayerCost, ...]
    input_bits: int
    quant_bits: int = 8

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("profile needs at least one layer")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def scaled(self, uav: float = 1.0, srv: float = 1.0) -> "DnnProfile":
        """Costs rescaled by the compute multipliers of the hosting nodes."""
        layers = tuple(LayerCost(l.uav_ms * uav, l.srv_ms * srv, l.out_activation_bits) for l in self.layers)
        return replace(self, layers=layers)


@dataclass(frozen=True)
class SplitEvaluation:
    k: int
    latency_ms: float
    fps: float


def _check(profile: DnnProfile, k: int) -> None:
    if not 0 <= k <= profile.n_layers:
        raise IndexOutOfRange(f"split {k} outside 0..{profile.n_layers}")


def tx_bits(profile: DnnProfile, k: int) -> int:
    _check(profile, k)
    return profile.input_bits if k == 0 else profile.layers[k - 1].out_activation_bits


def stage_times(profile: DnnProfile, k: int, uplink_bps: float) -> tuple[float, float, float]:
    """(UAV compute, uplink transfer, server compute) in ms for split ``k``."""
    _check(profile, k)
    if not uplink_bps > 0:
        raise ValueError("uplink_bps must be > 0")
    uav = sum(l.uav_ms for l in profile.layers[:k])
    srv = sum(l.srv_ms for l in profile.layers[k:])
    return uav, tx_bits(profile, k) * 1000.0 / uplink_bps, srv


def split_latency(profile: DnnProfile, k: int, uplink_bps: float, path_one_way_ms: float) -> float:
    uav, tx, srv = stage_times(profile, k, uplink_bps)
    return uav + tx + path_one_way_ms + srv


def pipeline_fps(profile: DnnProfile, k: int, uplink_bps: float) -> float:
    # steady-state rate of a three-stage pipeline is set by its slowest stage
    return 1000.0 / max(stage_times(profile, k, uplink_bps))


def evaluate(profile: DnnProfile, k: int, uplink_bps: float, path_one_way_ms: float) -> SplitEvaluation:
    return SplitEvaluation(
        k,
        split_latency(profile, k, uplink_bps, path_one_way_ms),
        pipeline_fps(profile, k, uplink_bps),
    )


def best_split(
    profile: DnnProfile,
    uplink_bps: float,
    path_one_way_ms: float,
    objective: Objective | str = Objective.MIN_LATENCY,
) -> SplitEvaluation:
    """Exhaustive search over every cut point; ties go to the smallest k."""
    objective = Objective(objective)
    best: SplitEvaluation | None = None
    for k in range(profile.n_layers + 1):
        ev = evaluate(profile, k, uplink_bps, path_one_way_ms)
        if best is None:
            best = ev
        elif objective is Objective.MIN_LATENCY and ev.latency_ms < best.latency_ms:
            best = ev
        elif objective is Objective.MAX_FPS and ev.fps > best.fps:
            best = ev
    assert best is not None
    return best


def parse_profile(text: str) -> DnnProfile:
    lines = [ln for ln in text.replace("\r\n", "\n").split("\n") if ln.strip()]
    if not lines:
        raise ProfileFormatError("empty profile")
    head = lines[0].split(",")
    if len(head) != 4:
        raise ProfileFormatError("header must be name,N,input_bits,quant_bits")
    try:
        name, n, input_bits, quant_bits = head[0], int(head[1]), int(head[2]), int(head[3])
    except ValueError as exc:
        raise ProfileFormatError(f"bad header: {exc}") from None
    if len(lines) - 1 != n:
        raise ProfileFormatError(f"header declares {n} layers, found {len(lines) - 1}")
    layers = []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 4:
            raise ProfileFormatError(f"line {lineno}: expected 4 fields")
        try:
            idx, uav, srv, bits = int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ProfileFormatError(f"line {lineno}: {exc}") from None
        if idx != lineno - 1:
            raise ProfileFormatError(f"line {lineno}: layer index {idx}, expected {lineno - 1}")
        if uav < 0 or srv < 0 or bits < 0:
            raise ProfileFormatError(f"line {lineno}: negative cost")
        layers.append(LayerCost(uav, srv, bits))
    return DnnProfile(name, tuple(layers), input_bits, quant_bits)


def format_profile(profile: DnnProfile) -> str:
    buf = io.StringIO()
    buf.write(f"{profile.name},{profile.n_layers},{profile.input_bits},{profile.quant_bits}\n")
    for i, l in enumerate(profile.layers, start=1):
        buf.write(f"{i},{l.uav_ms!r},{l.srv_ms!r},{l.out_activation_bits}\n")
    return buf.getvalue()


def load_profile(path: str | Path) -> DnnProfile:
    return parse_profile(Path(path).read_text(encoding="utf-8"))


def save_profile(profile: DnnProfile, path: str | Path) -> None:
    Path(path).write_text(format_profile(profile), encoding="utf-8", newline="\n")


def reference_profile() -> DnnProfile:
    """The shipped synthetic 40-layer SSD300/VGG-shaped profile."""
    text = resources.files("uavsi").joinpath("data/reference_profile.csv").read_text(encoding="utf-8")
    return parse_profile(text)
