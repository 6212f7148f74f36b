"""Built-in experiments: RAN slicing, VNF placement and DNN split."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .export import write_run, write_table
from .placement import path_latency
from .radio import maxmin_fair
from .scenario import ScenarioDoc, builtin_scenario_path, load_scenario
from .simulation import run_scenario
from .split import best_split, evaluate, stage_times

log = logging.getLogger(__name__)

EXPERIMENTS: dict[str, tuple[str, ...]] = {
    "slicing": ("slicing_fair", "slicing_sliced"),
    "placement": ("placement_edge_fair", "placement_edge_sliced", "placement_cloud_fair", "placement_cloud_sliced"),
    "split": ("split_edge", "split_cloud"),
}
REPORTED_SPLITS = (3, 6, 10)
UAV_FLOW = "uav-1"


@dataclass
class ExperimentResult:
    name: str
    header: tuple[str, ...]
    rows: list[tuple[Any, ...]]
    summaries: dict[str, dict[str, Any]]
    derived: dict[str, Any]


def load_builtin(name: str, seed: int | None = None, horizon_s: float | None = None) -> ScenarioDoc:
    doc = load_scenario(builtin_scenario_path(name))
    if seed is not None:
        doc.seed = seed
    if horizon_s is not None:
        doc.horizon_s = horizon_s
    return doc


def run_to_dir(doc: ScenarioDoc, out_dir: str | Path) -> dict[str, Any]:
    result = run_scenario(doc)
    return write_run(result.sink, result.si_log, out_dir,
                     extra={"name": doc.name, "seed": doc.seed, "horizon_s": doc.horizon_s})


def _run_variant(args: tuple[str, str, int | None, float | None]) -> dict[str, Any]:
    name, out_dir, seed, horizon = args
    return run_to_dir(load_builtin(name, seed, horizon), Path(out_dir) / name)


def _ue_total(flows: dict[str, Any]) -> float:
    return sum(v["mean_throughput_bps"] for k, v in flows.items() if k != UAV_FLOW)


def split_table(doc: ScenarioDoc) -> tuple[list[tuple[Any, ...]], dict[str, Any]]:
    """Evaluate the reported split points and the planner's choice for the
    site the scenario places the AppServer on."""
    dnn = doc.dnn
    flow = doc.flow(dnn.flow)
    path = path_latency(doc.topology, doc.placement, flow).one_way_ms
    uav = doc.topology.radio_endpoint(flow)
    server = doc.placement["AppServer"]
    profile = dnn.profile.scaled(doc.topology.nodes[uav].compute_scale, doc.topology.nodes[server].compute_scale)
    cell = doc.uplink.cell
    uplink_flows = [f for f in doc.flows if doc.topology.is_uplink(f)]
    shares = maxmin_fair(cell.capacity_bps, [f.demand_bps for f in uplink_flows])
    uplink_bps = shares[[f.id for f in uplink_flows].index(flow.id)]
    best = best_split(profile, uplink_bps, path, dnn.objective)
    site = "cloud" if doc.topology.kind(server).value == "CloudServer" else "edge"
    rows = []
    for k in sorted({0, *REPORTED_SPLITS, best.k}):
        ev = evaluate(profile, k, uplink_bps, path)
        uav_ms, tx_ms, srv_ms = stage_times(profile, k, uplink_bps)
        rows.append((site, k, ev.latency_ms, ev.fps, uav_ms, tx_ms, srv_ms, k == best.k))
    base = evaluate(profile, 0, uplink_bps, path).latency_ms
    info = {
        "site": site, "path_one_way_ms": path, "uplink_bps": uplink_bps, "best_k": best.k,
        "best_latency_ms": best.latency_ms, "best_fps": best.fps,
        "latency_reduction_vs_k0": 1 - best.latency_ms / base,
    }
    return rows, info


def run_experiment(name: str, out_dir: str | Path, seed: int | None = None,
                   horizon_s: float | None = None, jobs: int = 1) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    variants = EXPERIMENTS[name]
    args = [(v, str(out), seed, horizon_s) for v in variants]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = dict(zip(variants, pool.map(_run_variant, args)))
    else:
        summaries = {v: _run_variant(a) for v, a in zip(variants, args)}

    derived: dict[str, Any] = {}
    if name == "slicing":
        header = ("variant", "uav_throughput_bps", "ues_total_throughput_bps", "uav_mean_queue_delay_ms",
                  "uav_mean_latency_ms", "uav_p95_latency_ms", "uav_drops")
        rows = []
        for v in variants:
            uav = summaries[v]["flows"][UAV_FLOW]
            rows.append((v.split("_", 1)[1], uav["mean_throughput_bps"], _ue_total(summaries[v]["flows"]),
                         uav["mean_queue_delay_ms"], uav["mean_latency_ms"], uav["p95_latency_ms"], uav["drops"]))
        fair, sliced = rows
        derived["uav_queue_delay_reduction"] = 1 - sliced[3] / fair[3]
    elif name == "placement":
        header = ("site", "scheduling", "path_one_way_ms", "path_rtt_ms", "uav_mean_queue_delay_ms",
                  "uav_mean_latency_ms", "uav_mean_rtt_ms")
        rows = []
        for v in variants:
            doc = load_builtin(v, seed, horizon_s)
            report = path_latency(doc.topology, doc.placement, doc.flow(UAV_FLOW))
            uav = summaries[v]["flows"][UAV_FLOW]
            _, site, sched = v.split("_")
            rows.append((site, sched, report.one_way_ms, report.rtt_ms, uav["mean_queue_delay_ms"],
                         uav["mean_latency_ms"], uav["mean_rtt_ms"]))
        by = {(r[0], r[1]): r for r in rows}
        derived["path_rtt_delta_ms"] = by[("cloud", "fair")][3] - by[("edge", "fair")][3]
        for sched in ("fair", "sliced"):
            derived[f"mean_rtt_delta_ms_{sched}"] = by[("cloud", sched)][6] - by[("edge", sched)][6]
    else:
        header = ("site", "k", "latency_ms", "fps", "uav_stage_ms", "tx_ms", "srv_stage_ms", "best")
        rows = []
        for v in variants:
            table, info = split_table(load_builtin(v, seed, horizon_s))
            rows.extend(table)
            derived[info["site"]] = info
    write_table(out / "comparison.csv", header, rows)
    (out / "experiment.json").write_text(
        json.dumps({"experiment": name, "derived": derived}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return ExperimentResult(name, header, rows, summaries, derived)


def format_table(result: ExperimentResult) -> str:
    def cell(x: Any) -> str:
        if isinstance(x, float):
            return f"{x:.4g}" if abs(x) < 1e5 else f"{x:.4e}"
        return str(x)

    body = [[cell(x) for x in r] for r in result.rows]
    widths = [max(len(h), *(len(r[i]) for r in body)) for i, h in enumerate(result.header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(result.header, widths))]
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    for k, v in result.derived.items():
        lines.append(f"{k}: {v}")
    return "\n".join(lines)
