"""metrics.csv, summary.json and si_log.csv for one run.

The summary is computed from the exact rows written to metrics.csv and
si_log.csv, so re-reading those files reproduces it bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
import os
import statistics
from collections import defaultdict
from pathlib import Path
from typing import Any, Iterable, Sequence

from .engine import MetricSink
from .si import SiLogEntry

METRICS_HEADER = ("time_ms", "entity", "metric", "value")
SI_LOG_HEADER = ("step", "time_ms", "record", "kind", "entity", "detail")

Row = tuple[str, str, str, float]


def format_time(us: int) -> str:
    return f"{us // 1000}.{us % 1000:03d}"


def metric_rows(sink: MetricSink) -> list[Row]:
    rows = [(s.time, s.entity, s.metric, s.value) for s in sink]
    # stable: equal (time, entity) keep emission order
    rows.sort(key=lambda r: (r[0], r[1]))
    return [(format_time(t), e, m, v) for t, e, m, v in rows]


def si_log_rows(entries: Iterable[SiLogEntry]) -> list[tuple[str, ...]]:
    return [(str(e.step), format_time(e.time), e.record, e.kind, e.entity, e.detail) for e in entries]


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def read_metrics_csv(path: str | Path) -> list[Row]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [(t, e, m, float(v)) for t, e, m, v in reader]


def read_si_log_csv(path: str | Path) -> list[tuple[str, ...]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        return [tuple(r) for r in reader]


def _p95(values: list[float]) -> float | None:
    if not values:
        return None
    if len(values) == 1:
        return values[0]
    return statistics.quantiles(values, n=20, method="inclusive")[18]


def summarize(rows: Sequence[Row], si_rows: Sequence[Sequence[str]]) -> dict[str, Any]:
    series: dict[tuple[str, str], list[float]] = defaultdict(list)
    for _, entity, metric, value in rows:
        series[(entity, metric)].append(value)
    flows = sorted({e for e, m in series if m == "throughput_bps"})
    per_flow: dict[str, Any] = {}
    for fid in flows:
        lat = series.get((fid, "latency_ms"), [])
        qd = series.get((fid, "queue_delay_ms"), [])
        rtt = series.get((fid, "rtt_ms"), [])
        per_flow[fid] = {
            "mean_throughput_bps": statistics.fmean(series[(fid, "throughput_bps")]),
            "mean_latency_ms": statistics.fmean(lat) if lat else None,
            "p95_latency_ms": _p95(lat),
            "mean_queue_delay_ms": statistics.fmean(qd) if qd else None,
            "mean_rtt_ms": statistics.fmean(rtt) if rtt else None,
            "delivered_packets": len(lat),
            "drops": int(sum(series.get((fid, "dropped_packets"), []))),
        }
        if (fid, "inference_latency_ms") in series:
            per_flow[fid]["mean_inference_latency_ms"] = statistics.fmean(series[(fid, "inference_latency_ms")])
            per_flow[fid]["mean_fps"] = statistics.fmean(series[(fid, "fps")])
    actions = [r for r in si_rows if r[2] == "action"]
    return {
        "flows": per_flow,
        "actions_issued": len(actions),
        "actions": [{"time_ms": r[1], "kind": r[3], "target": r[4], "detail": r[5]} for r in actions],
    }


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_run(sink: MetricSink, si_log: Sequence[SiLogEntry], out_dir: str | Path,
              extra: dict[str, Any] | None = None) -> dict[str, Any]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = metric_rows(sink)
    si_rows = si_log_rows(si_log)
    summary = summarize(rows, si_rows)
    if extra:
        summary["run"] = extra
    _write_atomic(out / "metrics.csv", _csv_text(METRICS_HEADER, rows))
    _write_atomic(out / "si_log.csv", _csv_text(SI_LOG_HEADER, si_rows))
    _write_atomic(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    _write_atomic(Path(path), _csv_text(header, rows))
