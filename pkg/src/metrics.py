"""
Metrics module.
Turns FrameStats series into per-class throughput, delay, drop and fairness
figures and writes them as a long-format CSV.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from . import config
from .core import ALL_CLASSES, MICROSECONDS_PER_SECOND, ServiceClass
from .engine import FrameStats

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

CSV_COLUMNS = ["window", "scheduler", "service_class", "metric", "value", "seed", "scenario_hash"]
CSV_DTYPES = {
    "window": str,
    "scheduler": str,
    "service_class": str,
    "metric": str,
    "value": "float64",
    "seed": "int64",
    "scenario_hash": str,
}
SUMMARY_WINDOW = "all"
ALL_CLASSES_LABEL = "ALL"

FrameSeries = Union[Sequence[FrameStats], pd.DataFrame]


def stats_table(series: Sequence[FrameStats]) -> pd.DataFrame:
    """
    Flatten a FrameStats series into one row per (frame, connection).

    Args:
        series: Output of run_simulation

    Returns:
        DataFrame with frame, cid, service_class, case and the per-frame counters
    """
    rows = []
    for stats in series:
        for cid, record in stats.connections.items():
            rows.append((
                stats.frame_index, cid, record.service_class.label, stats.case,
                record.offered_packets, record.dropped_packets, record.snapshot_backlog,
                record.grant, record.served_bytes, record.served_packets, record.delay_sum,
            ))
    return pd.DataFrame(rows, columns=[
        "frame", "cid", "service_class", "case",
        "offered_packets", "dropped_packets", "snapshot_backlog",
        "grant", "served_bytes", "served_packets", "delay_sum",
    ])


def _as_table(series: FrameSeries) -> pd.DataFrame:
    if isinstance(series, pd.DataFrame):
        return series
    return stats_table(series)


def _class_rows(table: pd.DataFrame, service_class: ServiceClass) -> pd.DataFrame:
    return table[table["service_class"] == service_class.label]


def _frame_count(table: pd.DataFrame) -> int:
    return int(table["frame"].max()) + 1 if len(table) else 0


def _delay_ms(delay_sum: int, packets: int) -> Optional[float]:
    if packets == 0:
        return None
    return delay_sum / packets / 1000


def average_delay(series: FrameSeries, service_class: ServiceClass) -> Optional[float]:
    """
    Mean delay of the class's served packets in milliseconds.

    Returns:
        None when the class served no packet
    """
    rows = _class_rows(_as_table(series), service_class)
    return _delay_ms(int(rows["delay_sum"].sum()), int(rows["served_packets"].sum()))


def _window_sums(table: pd.DataFrame, service_class: ServiceClass, window: int) -> pd.DataFrame:
    """Per-window served bytes/packets/delay of a class, plus the frames in each window."""
    frames = _frame_count(table)
    rows = _class_rows(table, service_class)
    per_frame = (
        rows.groupby("frame")[["served_bytes", "served_packets", "delay_sum"]]
        .sum()
        .reindex(range(frames), fill_value=0)
    )
    per_frame["frames"] = 1
    return per_frame.groupby(np.arange(frames) // window).sum()


def average_throughput(
    series: FrameSeries,
    service_class: ServiceClass,
    window: int,
    frame_duration: int = config.FRAME_DURATION_US,
) -> List[float]:
    """
    Per-connection average throughput of a class, one value per frame window.

    Args:
        series: FrameStats series (or its stats_table)
        service_class: Class to aggregate
        window: Frames per window (the last window may be shorter)
        frame_duration: T_frame in microseconds

    Returns:
        Bits per second per window, averaged across the class's connections
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    table = _as_table(series)
    sums = _window_sums(table, service_class, window)
    connections = _class_rows(table, service_class)["cid"].nunique()
    if connections == 0:
        return [0.0] * len(sums)

    seconds = sums["frames"] * frame_duration / MICROSECONDS_PER_SECOND
    return [float(value) for value in sums["served_bytes"] * 8 / seconds / connections]


def delay_series(series: FrameSeries, service_class: ServiceClass, window: int) -> List[Optional[float]]:
    """Average delay (ms) of packets served in each frame window; None for windows with none."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    sums = _window_sums(_as_table(series), service_class, window)
    return [
        _delay_ms(int(delay), int(packets))
        for delay, packets in zip(sums["delay_sum"], sums["served_packets"])
    ]


def jain_fairness(series: FrameSeries, service_class: ServiceClass) -> Optional[float]:
    """Jain's index over per-connection served bytes; None when nothing was served."""
    rows = _class_rows(_as_table(series), service_class)
    served = rows.groupby("cid")["served_bytes"].sum().to_numpy(dtype=float)
    if len(served) == 0 or served.sum() == 0:
        return None
    return float(served.sum() ** 2 / (len(served) * (served ** 2).sum()))


def max_interrupt_streak(series: FrameSeries, service_class: ServiceClass) -> int:
    """Longest run of frames in which a backlogged connection of the class got nothing."""
    rows = _class_rows(_as_table(series), service_class).sort_values(["cid", "frame"])
    longest = 0
    for _, group in rows.groupby("cid"):
        streak = 0
        for backlog, served in zip(group["snapshot_backlog"], group["served_bytes"]):
            if backlog > 0 and served == 0:
                streak += 1
                longest = max(longest, streak)
            else:
                streak = 0
    return longest


def drop_rate(series: FrameSeries, service_class: ServiceClass) -> Optional[float]:
    """Dropped over offered packets; None when nothing was offered."""
    rows = _class_rows(_as_table(series), service_class)
    offered = int(rows["offered_packets"].sum())
    if offered == 0:
        return None
    return int(rows["dropped_packets"].sum()) / offered


def case_counts(series: FrameSeries) -> Dict[str, int]:
    """Frames per allocation case (or per baseline name)."""
    table = _as_table(series)
    cases = table.drop_duplicates("frame")["case"].fillna("NONE")
    return {str(case): int(count) for case, count in sorted(cases.value_counts().items())}


# ============================================================================
# Report
# ============================================================================

@dataclass
class ClassMetrics:
    throughput: List[float]
    delay: List[Optional[float]]
    mean_throughput: float
    mean_delay: Optional[float]
    offered_packets: int
    served_packets: int
    dropped_packets: int
    drop_rate: Optional[float]
    jain_fairness: Optional[float]
    max_interrupt_streak: int


@dataclass
class MetricsReport:
    """Per (scheduler, class) metrics of one or more runs of the same scenario."""

    scenario_name: str
    scenario_hash: str
    seed: int
    window: int
    schedulers: List[str] = field(default_factory=list)
    classes: Dict[Tuple[str, ServiceClass], ClassMetrics] = field(default_factory=dict)
    cases: Dict[str, Dict[str, int]] = field(default_factory=dict)


def class_metrics(
    table: pd.DataFrame,
    service_class: ServiceClass,
    window: int,
    frame_duration: int,
) -> ClassMetrics:
    rows = _class_rows(table, service_class)
    frames = _frame_count(table)
    mean_throughput = average_throughput(table, service_class, frames or 1, frame_duration)
    return ClassMetrics(
        throughput=average_throughput(table, service_class, window, frame_duration),
        delay=delay_series(table, service_class, window),
        mean_throughput=mean_throughput[0] if mean_throughput else 0.0,
        mean_delay=average_delay(table, service_class),
        offered_packets=int(rows["offered_packets"].sum()),
        served_packets=int(rows["served_packets"].sum()),
        dropped_packets=int(rows["dropped_packets"].sum()),
        drop_rate=drop_rate(table, service_class),
        jain_fairness=jain_fairness(table, service_class),
        max_interrupt_streak=max_interrupt_streak(table, service_class),
    )


def build_report(
    runs: Mapping[str, Sequence[FrameStats]],
    scenario_name: str,
    scenario_hash: str,
    seed: int,
    window: int = config.DEFAULT_WINDOW,
    frame_duration: int = config.FRAME_DURATION_US,
) -> MetricsReport:
    """
    Aggregate the runs of several schedulers into one report.

    Args:
        runs: FrameStats series per scheduler name, in output order
        scenario_name: Scenario name (metadata)
        scenario_hash: Scenario content hash (metadata)
        seed: Run seed (metadata)
        window: Frames per throughput/delay window
        frame_duration: T_frame in microseconds

    Returns:
        MetricsReport keyed by (scheduler, class)
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")

    report = MetricsReport(scenario_name, scenario_hash, seed, window)
    for scheduler, series in runs.items():
        table = stats_table(series)
        report.schedulers.append(scheduler)
        report.cases[scheduler] = case_counts(table)
        for service_class in ALL_CLASSES:
            metrics = class_metrics(table, service_class, window, frame_duration)
            report.classes[(scheduler, service_class)] = metrics
            if metrics.served_packets == 0 and metrics.offered_packets > 0:
                logger.warning(f"{scheduler}: {service_class.label} served no packets")
    return report


def report_rows(report: MetricsReport) -> pd.DataFrame:
    """The report in CSV layout; absent values are NaN."""
    rows = []

    def add(window, scheduler, label, metric, value):
        rows.append((str(window), scheduler, label, metric,
                     np.nan if value is None else float(value), report.seed, report.scenario_hash))

    for scheduler in report.schedulers:
        for service_class in ALL_CLASSES:
            metrics = report.classes[(scheduler, service_class)]
            for index, (throughput, delay) in enumerate(zip(metrics.throughput, metrics.delay)):
                add(index, scheduler, service_class.label, "throughput_bps", throughput)
                add(index, scheduler, service_class.label, "delay_ms", delay)

        for service_class in ALL_CLASSES:
            metrics = report.classes[(scheduler, service_class)]
            label = service_class.label
            add(SUMMARY_WINDOW, scheduler, label, "throughput_bps", metrics.mean_throughput)
            add(SUMMARY_WINDOW, scheduler, label, "delay_ms", metrics.mean_delay)
            add(SUMMARY_WINDOW, scheduler, label, "offered_packets", metrics.offered_packets)
            add(SUMMARY_WINDOW, scheduler, label, "served_packets", metrics.served_packets)
            add(SUMMARY_WINDOW, scheduler, label, "dropped_packets", metrics.dropped_packets)
            add(SUMMARY_WINDOW, scheduler, label, "drop_rate", metrics.drop_rate)
            add(SUMMARY_WINDOW, scheduler, label, "jain_fairness", metrics.jain_fairness)
            add(SUMMARY_WINDOW, scheduler, label, "max_interrupt_streak", metrics.max_interrupt_streak)

        for case, count in report.cases[scheduler].items():
            add(SUMMARY_WINDOW, scheduler, ALL_CLASSES_LABEL, f"frames_{case}", count)

    return pd.DataFrame(rows, columns=CSV_COLUMNS).astype(CSV_DTYPES)


def emit_csv(report: MetricsReport, out_path: Union[str, Path]) -> Path:
    """
    Write the report as CSV (header plus one row per window/scheduler/class/metric).

    Args:
        report: Completed MetricsReport
        out_path: Target file; parent directories are created

    Returns:
        The written path

    Raises:
        OSError: the path cannot be written
    """
    out_path = Path(out_path)
    frame = report_rows(report)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_path, index=False, lineterminator="\n")
    except OSError as e:
        logger.error(f"Cannot write {out_path}: {e}")
        raise

    logger.info(f"Wrote {len(frame)} rows to {out_path}")
    return out_path


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    """Parse an emitted report back with exact float values."""
    return pd.read_csv(path, dtype=CSV_DTYPES, float_precision="round_trip", keep_default_na=False,
                       na_values={"value": [""]})
