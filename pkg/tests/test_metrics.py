import logging
import math

import pandas as pd
import pytest

from src.core import ServiceClass
from src.engine import ConnectionFrameStats, FrameStats, run_simulation
from src.metrics import (
    CSV_COLUMNS,
    average_delay,
    average_throughput,
    build_report,
    case_counts,
    delay_series,
    drop_rate,
    emit_csv,
    jain_fairness,
    max_interrupt_streak,
    read_csv,
    report_rows,
)
from src.scenario import REFERENCE_PROFILES, parse_scenario, scenario_hash
from src.scheduler import SchedulerKind


def record(cid, service_class=ServiceClass.UGS, **counters):
    return ConnectionFrameStats(cid=cid, service_class=service_class, **counters)


def frames(*per_frame, case="CASE_I"):
    """Build a series from one {cid: ConnectionFrameStats} dict per frame."""
    return [FrameStats(frame_index=m, connections=records, case=case) for m, records in enumerate(per_frame)]


def test_average_delay_over_served_packets():
    series = frames(
        {1: record(1, served_packets=1, served_bytes=160, delay_sum=5_000)},
        {1: record(1, served_packets=1, served_bytes=160, delay_sum=15_000)},
    )
    assert average_delay(series, ServiceClass.UGS) == pytest.approx(10.0)


def test_average_delay_none_without_service():
    series = frames({1: record(1, snapshot_backlog=160)})
    assert average_delay(series, ServiceClass.UGS) is None
    assert average_delay(series, ServiceClass.BE) is None


def test_throughput_full_link_single_connection():
    series = frames(*[{1: record(1, served_bytes=6_250, served_packets=1)} for _ in range(4)])
    assert average_throughput(series, ServiceClass.UGS, window=1) == [10_000_000.0] * 4


def test_throughput_zero_when_nothing_served():
    series = frames(*[{1: record(1)} for _ in range(6)])
    assert average_throughput(series, ServiceClass.UGS, window=3) == [0.0, 0.0]


def test_throughput_constant_rate_any_window():
    series = frames(*[{1: record(1, served_bytes=160), 2: record(2, served_bytes=160)} for _ in range(10)])
    for window in (1, 3, 10):
        assert all(value == pytest.approx(256_000.0) for value in average_throughput(series, ServiceClass.UGS, window))


def test_throughput_rejects_bad_window():
    with pytest.raises(ValueError):
        average_throughput(frames({1: record(1)}), ServiceClass.UGS, window=0)


def test_delay_series_marks_empty_windows():
    series = frames(
        {1: record(1, served_packets=2, served_bytes=320, delay_sum=20_000)},
        {1: record(1)},
    )
    assert delay_series(series, ServiceClass.UGS, window=1) == [10.0, None]


def test_jain_fairness():
    even = frames({1: record(1, served_bytes=100), 2: record(2, served_bytes=100)})
    skewed = frames({1: record(1, served_bytes=100), 2: record(2, served_bytes=0)})
    assert jain_fairness(even, ServiceClass.UGS) == pytest.approx(1.0)
    assert jain_fairness(skewed, ServiceClass.UGS) == pytest.approx(0.5)
    assert jain_fairness(frames({1: record(1)}), ServiceClass.UGS) is None


def test_max_interrupt_streak_counts_backlogged_frames_only():
    be = ServiceClass.BE
    pattern = [(120, 0), (120, 0), (0, 0), (120, 0), (120, 0), (120, 0), (240, 120), (120, 0)]
    series = frames(*[{9: record(9, be, snapshot_backlog=b, served_bytes=s)} for b, s in pattern])
    assert max_interrupt_streak(series, be) == 3


def test_drop_rate():
    series = frames(
        {1: record(1, offered_packets=10, dropped_packets=1)},
        {1: record(1, offered_packets=10, dropped_packets=3)},
    )
    assert drop_rate(series, ServiceClass.UGS) == pytest.approx(0.2)
    assert drop_rate(series, ServiceClass.BE) is None


def test_case_counts():
    series = frames({1: record(1)}, {1: record(1)}, case="CASE_II") + [
        FrameStats(frame_index=2, connections={1: record(1)}, case="CASE_III")
    ]
    assert case_counts(series) == {"CASE_II": 2, "CASE_III": 1}


@pytest.fixture(scope="module")
def small_report():
    data = [{"cid": cid, "class": cls} for cid, cls in enumerate(["UGS", "ERT_VR", "RT_VR", "NRT_VR", "BE"] * 2, 1)]
    scenario = parse_scenario({"name": "small", "duration": 60, "seed": 5, "profiles": REFERENCE_PROFILES,
                               "connections": data})
    runs = {"apds": run_simulation(scenario), "fifo": run_simulation(scenario, SchedulerKind.FIFO)}
    return build_report(runs, scenario.name, scenario_hash(scenario), scenario.seed, window=20)


def test_report_rows_layout(small_report):
    rows = report_rows(small_report)
    assert list(rows.columns) == CSV_COLUMNS
    assert set(rows["scheduler"]) == {"apds", "fifo"}
    assert set(rows["seed"]) == {5}

    windows = rows[(rows["metric"] == "throughput_bps") & (rows["window"] != "all")]
    # 60 frames in windows of 20, five classes, two schedulers
    assert len(windows) == 3 * 5 * 2

    cases = rows[rows["metric"].str.startswith("frames_")]
    assert set(cases["service_class"]) == {"ALL"}
    for scheduler in ("apds", "fifo"):
        assert cases[cases["scheduler"] == scheduler]["value"].sum() == 60


def test_csv_round_trip(tmp_path, small_report):
    path = emit_csv(small_report, tmp_path / "out" / "small.csv")
    pd.testing.assert_frame_equal(read_csv(path), report_rows(small_report))


def test_csv_emission_is_byte_identical(tmp_path, small_report):
    first = emit_csv(small_report, tmp_path / "a.csv").read_bytes()
    second = emit_csv(small_report, tmp_path / "b.csv").read_bytes()
    assert first == second
    assert first.splitlines()[0] == b"window,scheduler,service_class,metric,value,seed,scenario_hash"


def test_absent_values_written_as_empty(tmp_path):
    series = frames({1: record(1, snapshot_backlog=160)})
    report = build_report({"apds": series}, "tiny", "abc", 0, window=1)
    path = emit_csv(report, tmp_path / "tiny.csv")
    parsed = read_csv(path)
    delay = parsed[(parsed["window"] == "all") & (parsed["service_class"] == "UGS")
                   & (parsed["metric"] == "delay_ms")]
    assert math.isnan(delay["value"].iloc[0])


def test_emit_csv_unwritable_path(tmp_path, small_report):
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    with pytest.raises(OSError):
        emit_csv(small_report, blocker / "report.csv")


def test_build_report_warns_on_unserved_class(caplog):
    series = frames({1: record(1, ServiceClass.BE, offered_packets=3, snapshot_backlog=360)})
    with caplog.at_level(logging.WARNING, logger="src.metrics"):
        build_report({"dfpq": series}, "tiny", "abc", 0, window=1)
    assert "BE served no packets" in caplog.text


def test_build_report_rejects_bad_window():
    with pytest.raises(ValueError):
        build_report({}, "tiny", "abc", 0, window=0)
