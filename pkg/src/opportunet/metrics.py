"""Run reports, the three delivery metrics and plot-ready CSV tables."""

from __future__ import annotations

import csv
import io
import math
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

EVENT_KINDS = ("created", "relayed", "delivered", "dropped", "aborted", "expired", "removed")
EVENT_HEADER = ("time", "event", "msg_id", "from", "to", "size", "hops")

METRICS = ("delivery_probability", "avg_latency", "overhead_ratio")
METRIC_UNITS = {"delivery_probability": "ratio", "avg_latency": "s", "overhead_ratio": "ratio"}


class EventLog:
    """Time-ordered simulation records; ties keep insertion order."""

    def __init__(self):
        self.records: list[tuple] = []

    def add(self, time: float, event: str, msg_id: str, src, dst, size: int, hops: int) -> None:
        if self.records and time < self.records[-1][0]:
            raise AssertionError(f"event at t={time} recorded after t={self.records[-1][0]}")
        self.records.append((time, event, msg_id, src, dst, size, hops))

    def __len__(self):
        return len(self.records)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for t, event, mid, src, dst, size, hops in self.records:
            w.writerow((repr(float(t)), event, mid, "" if src is None else src, "" if dst is None else dst, size, hops))
        return buf.getvalue()


@dataclass
class RunReport:
    router: str = ""
    size: int = 0
    seed: int = 0
    created: int = 0
    delivered: int = 0
    relayed: int = 0
    dropped: int = 0
    aborted: int = 0
    expired: int = 0
    removed: int = 0
    latencies: list = field(default_factory=list)
    hop_counts: list = field(default_factory=list)
    count_aborts: bool = False
    scenario: tuple = ()

    @property
    def delivery_probability(self):
        return delivery_probability(self)

    @property
    def avg_latency(self):
        return average_latency(self)

    @property
    def overhead_ratio(self):
        return overhead_ratio(self)

    def metric(self, name: str):
        return getattr(self, name)

    def check(self) -> None:
        if self.delivered > self.created:
            raise AssertionError("more deliveries than created messages")
        if self.delivered > self.relayed:
            raise AssertionError("more deliveries than completed transfers")

    def rows(self) -> list[tuple[str, object]]:
        rows = [
            ("router", self.router),
            ("size_bytes", self.size),
            ("seed", self.seed),
            ("created", self.created),
            ("delivered", self.delivered),
            ("relayed", self.relayed),
            ("dropped", self.dropped),
            ("aborted", self.aborted),
            ("expired", self.expired),
            ("removed", self.removed),
        ]
        for name in METRICS:
            rows.append((name, fmt(self.metric(name))))
        rows.append(("latency_unit", "s"))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("metric", "value"))
        w.writerows(self.rows())
        return buf.getvalue()


def delivery_probability(report: RunReport):
    """Delivered over created; None when nothing was created."""
    if report.created == 0:
        return None
    return report.delivered / report.created


def average_latency(report: RunReport):
    """Mean first-delivery latency in seconds; None without deliveries."""
    if report.delivered == 0 or not report.latencies:
        return None
    return math.fsum(report.latencies) / len(report.latencies)


def overhead_ratio(report: RunReport):
    """Extra transmissions per delivery; None without deliveries."""
    if report.delivered == 0:
        return None
    relayed = report.relayed + (report.aborted if report.count_aborts else 0)
    return (relayed - report.delivered) / report.delivered


def report_from_events(text: str, *, count_aborts: bool = False, **meta) -> RunReport:
    """Rebuild a :class:`RunReport` from an exported event CSV."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or tuple(header) != EVENT_HEADER:
        raise ValueError(f"event log header must be {','.join(EVENT_HEADER)}")
    rep = RunReport(count_aborts=count_aborts, **meta)
    created_at: dict[str, float] = {}
    seen_delivery: set[str] = set()
    for row in reader:
        if not row:
            continue
        t, event, mid = float(row[0]), row[1], row[2]
        if event == "created":
            rep.created += 1
            created_at[mid] = t
        elif event == "relayed":
            rep.relayed += 1
        elif event == "delivered":
            if mid in seen_delivery:
                continue
            if mid not in created_at:
                raise ValueError(f"delivery of {mid} without a creation record")
            seen_delivery.add(mid)
            rep.delivered += 1
            rep.latencies.append(t - created_at[mid])
            rep.hop_counts.append(int(row[6]))
        elif event == "dropped":
            rep.dropped += 1
        elif event == "aborted":
            rep.aborted += 1
        elif event == "expired":
            rep.expired += 1
        elif event == "removed":
            rep.removed += 1
        else:
            raise ValueError(f"unknown event kind {event!r}")
    return rep


def fmt(value) -> str:
    """Six significant digits; empty string for an undefined metric."""
    if value is None:
        return ""
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def _sorted_reports(reports):
    return sorted(reports, key=lambda r: (r.router, r.size, r.seed))


def aggregate(reports, metric: str) -> list[tuple]:
    """``(router, size, mean, stddev, n)`` per router and size; undefined runs skipped."""
    groups: dict[tuple, list] = {}
    for r in _sorted_reports(reports):
        groups.setdefault((r.router, r.size), [])
        value = r.metric(metric)
        if value is not None:
            groups[(r.router, r.size)].append(value)
    rows = []
    for (router, size), values in groups.items():
        if values:
            mean = math.fsum(values) / len(values)
            sd = statistics.stdev(values) if len(values) > 1 else 0.0
        else:
            mean = sd = None
        rows.append((router, size, mean, sd, len(values)))
    return rows


def emit_tables(reports, out_dir) -> list[Path]:
    """Write per-run, aggregated and delivery-vs-overhead scatter CSVs."""
    reports = _sorted_reports(reports)
    if not reports:
        raise ValueError("no completed runs to tabulate")
    keys = {r.scenario for r in reports}
    if len(keys) > 1:
        raise ValueError("reports come from different scenarios (duration, map or link settings differ)")
    out = Path(out_dir)
    os.makedirs(out, exist_ok=True)
    written = []

    def write(name, header, rows):
        path = out / name
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        written.append(path)

    for metric in METRICS:
        unit = METRIC_UNITS[metric]
        write(
            f"runs_{metric}.csv",
            ("router", "size_bytes", "seed", "value", "unit"),
            [(r.router, r.size, r.seed, fmt(r.metric(metric)), unit) for r in reports],
        )
        write(
            f"aggregate_{metric}.csv",
            ("router", "size_bytes", "mean", "stddev", "n", "unit"),
            [(ro, s, fmt(m), fmt(sd), n, unit) for ro, s, m, sd, n in aggregate(reports, metric)],
        )
    for router in sorted({r.router for r in reports}):
        write(
            f"scatter_{router}.csv",
            ("router", "size_bytes", "seed", "overhead_ratio", "delivery_probability"),
            [
                (r.router, r.size, r.seed, fmt(r.overhead_ratio), fmt(r.delivery_probability))
                for r in reports
                if r.router == router
            ],
        )
    return written
