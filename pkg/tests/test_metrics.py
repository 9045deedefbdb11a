import csv
import io
import random

import pytest

from opportunet.metrics import (
    EVENT_HEADER,
    EventLog,
    RunReport,
    aggregate,
    average_latency,
    delivery_probability,
    emit_tables,
    fmt,
    overhead_ratio,
    report_from_events,
)


def test_delivery_probability():
    assert delivery_probability(RunReport(created=10, delivered=5, relayed=5)) == 0.5
    assert delivery_probability(RunReport(created=10, delivered=0)) == 0.0
    assert delivery_probability(RunReport(created=0)) is None


def test_average_latency():
    assert average_latency(RunReport(created=1, delivered=1, relayed=1, latencies=[15.0])) == 15.0
    assert average_latency(RunReport(created=2, delivered=2, relayed=2, latencies=[10.0, 20.0])) == 15.0
    assert average_latency(RunReport(created=2)) is None


def test_overhead_ratio():
    assert overhead_ratio(RunReport(created=10, delivered=10, relayed=30)) == 2.0
    assert overhead_ratio(RunReport(created=10, delivered=10, relayed=10)) == 0.0
    assert overhead_ratio(RunReport(created=10, delivered=0, relayed=30)) is None
    assert overhead_ratio(RunReport(created=10, delivered=10, relayed=30, aborted=5, count_aborts=True)) == 2.5


def test_report_sanity_check():
    with pytest.raises(AssertionError):
        RunReport(created=1, delivered=2, relayed=2).check()
    with pytest.raises(AssertionError):
        RunReport(created=3, delivered=2, relayed=1).check()


def _log(records):
    log = EventLog()
    for r in records:
        log.add(*r)
    return log.to_csv()


SAMPLE = [
    (0.0, "created", "M1", 0, 2, 100, 0),
    (1.0, "created", "M2", 1, 0, 100, 0),
    (5.0, "relayed", "M1", 0, 1, 100, 1),
    (9.0, "relayed", "M1", 1, 2, 100, 2),
    (9.0, "delivered", "M1", 1, 2, 100, 2),
    (12.0, "relayed", "M1", 0, 2, 100, 1),
    (12.0, "delivered", "M1", 0, 2, 100, 1),  # duplicate arrival
    (13.0, "aborted", "M2", 1, 2, 100, 0),
]


def test_duplicate_delivery_counted_once():
    rep = report_from_events(_log(SAMPLE))
    assert (rep.created, rep.delivered, rep.relayed, rep.aborted) == (2, 1, 3, 1)
    assert rep.latencies == [9.0]
    assert rep.delivery_probability == 0.5
    assert rep.overhead_ratio == 2.0


def test_event_log_rejects_time_travel():
    log = EventLog()
    log.add(5.0, "created", "M1", 0, 1, 1, 0)
    with pytest.raises(AssertionError):
        log.add(4.0, "created", "M2", 0, 1, 1, 0)


def test_event_log_header_and_bad_input():
    text = _log(SAMPLE)
    assert text.splitlines()[0] == ",".join(EVENT_HEADER)
    with pytest.raises(ValueError, match="header"):
        report_from_events("t,e\n")
    with pytest.raises(ValueError, match="without a creation"):
        report_from_events(_log([(1.0, "delivered", "X", 0, 1, 1, 1)]))


def test_delivery_probability_invariant_under_relabelling():
    rng = random.Random(4)
    base = report_from_events(_log(SAMPLE))
    for _ in range(20):
        perm = list(range(3))
        rng.shuffle(perm)
        relabelled = [(t, ev, mid, perm[a], perm[b], size, hops) for t, ev, mid, a, b, size, hops in SAMPLE]
        rep = report_from_events(_log(relabelled))
        assert rep.delivery_probability == base.delivery_probability
        assert rep.overhead_ratio == base.overhead_ratio


def test_extra_relay_strictly_raises_overhead():
    before = report_from_events(_log(SAMPLE)).overhead_ratio
    after = report_from_events(_log(SAMPLE + [(20.0, "relayed", "M2", 1, 2, 100, 1)])).overhead_ratio
    assert after > before


def test_fmt_six_significant_digits():
    assert fmt(1 / 3) == "0.333333"
    assert fmt(123456789.0) == "1.23457e+08"
    assert fmt(None) == ""
    assert fmt(2) == "2"


def _reports():
    out = []
    for router in ("prophet", "epidemic", "maxprop"):
        for size in range(12, 0, -1):
            for seed in (2, 1):
                out.append(
                    RunReport(
                        router=router,
                        size=size * 262144,
                        seed=seed,
                        created=10,
                        delivered=seed + 2,
                        relayed=20 + seed,
                        latencies=[float(seed)] * (seed + 2),
                        scenario=("same",),
                    )
                )
    return out


def _read(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_emit_tables_layout(tmp_path):
    emit_tables(_reports(), tmp_path)
    agg = _read(tmp_path / "aggregate_delivery_probability.csv")
    assert agg[0] == ["router", "size_bytes", "mean", "stddev", "n", "unit"]
    assert len(agg) - 1 == 36
    keys = [(r[0], int(r[1])) for r in agg[1:]]
    assert keys == sorted(keys)
    assert agg[1][:5] == ["epidemic", "262144", "0.35", "0.0707107", "2"]

    runs = _read(tmp_path / "runs_avg_latency.csv")
    assert runs[0] == ["router", "size_bytes", "seed", "value", "unit"]
    assert runs[1] == ["epidemic", "262144", "1", "1", "s"]
    keys = [(r[0], int(r[1]), int(r[2])) for r in runs[1:]]
    assert keys == sorted(keys)

    scatter = _read(tmp_path / "scatter_maxprop.csv")
    assert scatter[0] == ["router", "size_bytes", "seed", "overhead_ratio", "delivery_probability"]
    # overhead (21 - 3) / 3 = 6 paired with delivery 3 / 10
    assert scatter[1][3:] == ["6", "0.3"]
    assert len(scatter) - 1 == 24


def test_emit_tables_rejects_mixed_scenarios(tmp_path):
    reports = _reports()
    reports[0].scenario = ("other",)
    with pytest.raises(ValueError, match="different scenarios"):
        emit_tables(reports, tmp_path)
    with pytest.raises(ValueError):
        emit_tables([], tmp_path)


def test_aggregate_skips_undefined_values():
    reps = [RunReport(router="x", size=1, seed=1, created=5), RunReport(router="x", size=1, seed=2)]
    assert aggregate(reps, "avg_latency") == [("x", 1, None, None, 0)]


def test_report_csv():
    rep = RunReport(router="maxprop", size=10, seed=3, created=4, delivered=1, relayed=2, latencies=[2.5])
    rows = dict(csv.reader(io.StringIO(rep.to_csv())))
    assert rows["delivery_probability"] == "0.25"
    assert rows["avg_latency"] == "2.5"
    assert rows["latency_unit"] == "s"
