"""
Simulation engine.
Runs the frame loop: arrivals, snapshot, scheduling, grant service and
history/counter updates, recording FrameStats for every frame.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from tqdm import tqdm

from . import config
from .allocation import WpfWeights
from .baselines import DfpqScheduler, FifoScheduler
from .core import ConnectionState, FrameBudget, GrantMap, ServiceClass, SimulationError
from .priority import Elevation, update_interrupt_counter
from .scenario import Scenario
from .scheduler import ApdsScheduler, Scheduler, SchedulerKind
from .traffic import TrafficSource, enqueue_with_drop, generate_arrivals, make_rng

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)


@dataclass
class ConnectionFrameStats:
    """What happened to one connection during one frame."""

    cid: int
    service_class: ServiceClass
    offered_bytes: int = 0
    offered_packets: int = 0
    dropped_packets: int = 0
    dropped_bytes: int = 0
    snapshot_backlog: int = 0  # after arrivals, before service
    grant: int = 0
    served_bytes: int = 0
    served_packets: int = 0
    delay_sum: int = 0  # microseconds, served packets only
    backlog: int = 0  # after service
    interrupt_counter: int = 0


@dataclass
class FrameStats:
    frame_index: int
    connections: Dict[int, ConnectionFrameStats] = field(default_factory=dict)
    case: Optional[str] = None
    elevations: List[Elevation] = field(default_factory=list)

    @property
    def served_bytes(self) -> int:
        return sum(stats.served_bytes for stats in self.connections.values())


def validate_grants(grants: GrantMap, frame: FrameBudget, conns: Mapping[int, ConnectionState]) -> None:
    """
    Check a scheduler's output before it is served.

    Raises:
        SimulationError: unknown CID, negative grant, grant above backlog or
            grants summing past the frame budget
    """
    for cid, grant in grants.items():
        if cid not in conns:
            raise SimulationError(f"frame {frame.frame_index}: grant for unknown CID {cid}")
        if grant < 0:
            raise SimulationError(f"frame {frame.frame_index}: negative grant {grant} for CID {cid}")
        if grant > conns[cid].backlog_bytes:
            raise SimulationError(
                f"frame {frame.frame_index}: grant {grant} for CID {cid} exceeds "
                f"backlog {conns[cid].backlog_bytes}"
            )
    if grants.total > frame.total_bytes:
        raise SimulationError(
            f"frame {frame.frame_index}: grants total {grants.total} exceed B_total {frame.total_bytes}"
        )


def serve_grants(
    conns: Mapping[int, ConnectionState],
    grants: GrantMap,
    frame: FrameBudget,
) -> FrameStats:
    """
    Realize grants against the queues, whole packets only.

    Each connection dequeues head packets while the next one fits its
    remaining grant; the leftover is surrendered. Served packets are delivered
    at the end of the frame.

    Args:
        conns: All connections (queues are mutated)
        grants: This frame's GrantMap
        frame: Current frame

    Returns:
        FrameStats with grant, served bytes/packets, delay and backlog filled in

    Raises:
        SimulationError: grant for an unknown CID
    """
    for cid in grants:
        if cid not in conns:
            raise SimulationError(f"frame {frame.frame_index}: grant for unknown CID {cid}")

    stats = FrameStats(frame_index=frame.frame_index, case=grants.case)
    delivered_at = frame.end

    for cid in sorted(conns):
        conn = conns[cid]
        record = ConnectionFrameStats(cid=cid, service_class=conn.service_class, grant=grants[cid])
        budget = record.grant
        while conn.queue and conn.queue[0].size <= budget:
            packet = conn.dequeue()
            budget -= packet.size
            record.served_bytes += packet.size
            record.served_packets += 1
            record.delay_sum += delivered_at - packet.arrival_time

        conn.served_bytes += record.served_bytes
        conn.served_packets += record.served_packets
        conn.delay_sum += record.delay_sum
        record.backlog = conn.backlog_bytes
        stats.connections[cid] = record

    return stats


def build_scheduler(kind: SchedulerKind, scenario: Scenario) -> Scheduler:
    """Create the scheduler named by kind with the scenario's parameters."""
    if kind is SchedulerKind.APDS:
        weights = WpfWeights.from_floats(scenario.weights.be, scenario.weights.nrt)
        return ApdsScheduler(eta=scenario.eta, weights=weights)
    if kind is SchedulerKind.FIFO:
        return FifoScheduler()
    if kind is SchedulerKind.DFPQ:
        return DfpqScheduler(scenario.total_bytes, scenario.dfpq_class_weights())
    raise ValueError(f"unknown scheduler kind: {kind}")


class Simulation:
    """
    One run of a scenario under one scheduler.

    Frame m transmits during [m*T, (m+1)*T); its arrivals are generated over the
    preceding interval [(m-1)*T, m*T) so that every queued packet has arrived by
    the time the scheduler runs at m*T.
    """

    def __init__(self, scenario: Scenario, scheduler: Optional[Scheduler] = None):
        self.scenario = scenario
        self.scheduler = scheduler or build_scheduler(SchedulerKind(scenario.scheduler), scenario)
        self.total_bytes = scenario.total_bytes
        self.conns: Dict[int, ConnectionState] = {}
        self.sources: Dict[int, TrafficSource] = {}

        for setup in scenario.resolved_connections():
            self.conns[setup.cid] = ConnectionState(
                cid=setup.cid,
                service_class=setup.service_class,
                qos=setup.qos,
                capacity=scenario.queue_capacity,
                ms_id=setup.ms,
            )
            stream = setup.traffic.seed_stream or setup.cid
            self.sources[setup.cid] = TrafficSource(setup.traffic, make_rng(scenario.seed, stream))
        self.conns = {cid: self.conns[cid] for cid in sorted(self.conns)}
        self.next_frame = 0

    def frame(self, frame_index: int) -> FrameBudget:
        return FrameBudget(frame_index, self.scenario.frame, self.total_bytes)

    def run_frame(self) -> FrameStats:
        """Advance the simulation by one frame."""
        frame = self.frame(self.next_frame)
        arrival_window = self.frame(self.next_frame - 1)

        # Arrivals
        arrivals = {}
        for cid, conn in self.conns.items():
            packets = generate_arrivals(conn, self.sources[cid], arrival_window)
            dropped = enqueue_with_drop(conn, packets)
            arrivals[cid] = (packets, dropped)

        # Snapshot
        snapshot = {cid: conn.backlog_bytes for cid, conn in self.conns.items()}

        # Scheduling
        grants = self.scheduler.schedule(self.conns, frame)
        validate_grants(grants, frame, self.conns)

        # Service
        stats = serve_grants(self.conns, grants, frame)
        if self.scheduler.last_schedule is not None:
            stats.elevations = list(self.scheduler.last_schedule.elevation_log)

        # History
        for cid, conn in self.conns.items():
            record = stats.connections[cid]
            packets, dropped = arrivals[cid]
            record.offered_packets = len(packets)
            record.offered_bytes = sum(packet.size for packet in packets)
            record.dropped_packets = dropped
            record.dropped_bytes = dropped * conn.qos.packet_size
            record.snapshot_backlog = snapshot[cid]

            min_request = min(snapshot[cid], conn.qos.min_bytes(frame.frame_duration))
            conn.record_history(snapshot[cid], record.served_bytes, min_request)
            if conn.service_class.is_tgs:
                update_interrupt_counter(conn, record.served_bytes)
            record.interrupt_counter = conn.interrupt_counter

        self.next_frame += 1
        return stats

    def run(self, progress: bool = False) -> List[FrameStats]:
        """Run every remaining frame of the scenario."""
        frames = range(self.next_frame, self.scenario.duration)
        series = []
        for _ in tqdm(frames, desc=f"{self.scheduler.kind.value}", unit="frame", disable=not progress):
            series.append(self.run_frame())
        return series

    def check_conservation(self) -> None:
        """Offered = served + dropped + backlog for every connection."""
        for cid, conn in self.conns.items():
            accounted = conn.served_bytes + conn.dropped_bytes + conn.backlog_bytes
            if conn.offered_bytes != accounted:
                raise SimulationError(
                    f"CID {cid}: offered {conn.offered_bytes} bytes, accounted {accounted}"
                )


def run_simulation(
    scenario: Scenario,
    scheduler: Optional[SchedulerKind] = None,
    progress: bool = False,
) -> List[FrameStats]:
    """
    Run a scenario end to end.

    Args:
        scenario: Validated scenario
        scheduler: Overrides the scenario's scheduler when given
        progress: Show a tqdm progress bar over frames

    Returns:
        One FrameStats per frame
    """
    kind = scheduler or SchedulerKind(scenario.scheduler)
    logger.info(
        f"Running '{scenario.name}' with {kind.value.upper()}: "
        f"{scenario.duration} frames, seed {scenario.seed}"
    )

    simulation = Simulation(scenario, build_scheduler(kind, scenario))
    try:
        series = simulation.run(progress=progress)
        simulation.check_conservation()
    except SimulationError as e:
        logger.error(f"Simulation failed: {e}")
        raise

    served = sum(conn.served_bytes for conn in simulation.conns.values())
    dropped = sum(conn.dropped_packets for conn in simulation.conns.values())
    logger.info(f"{kind.value.upper()} done: {served} bytes served, {dropped} packets dropped")
    return series


if __name__ == "__main__":
    from .scenario import reference_scenario

    scenario = reference_scenario().model_copy(update={"duration": 200})
    for kind in SchedulerKind:
        series = run_simulation(scenario, kind, progress=True)
        print(f"{kind.value:5s} served {sum(stats.served_bytes for stats in series)} bytes in {len(series)} frames")
