"""
Priority assignment module (APDS phase 1).
Ranks each class's connections by emergent degree (delay-constrained classes)
or satisfactory degree (throughput-guaranteed classes), then elevates
emergent and starving connections one tier.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from . import config
from .core import (
    ALL_CLASSES,
    DCS_CLASSES,
    ConnectionState,
    FrameBudget,
    PacketRecord,
    ServiceClass,
)

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

# Ratio used when a satisfactory degree has a zero denominator
FULLY_SATISFIED = math.inf

Degree = Union[Fraction, float]

# Tier each elevated class moves into
PROMOTION = {
    ServiceClass.ERT_VR: ServiceClass.UGS,
    ServiceClass.RT_VR: ServiceClass.ERT_VR,
    ServiceClass.BE: ServiceClass.NRT_VR,
}


class ElevationReason(Enum):
    EMERGENT = "EMERGENT"
    STARVED = "STARVED"


@dataclass(frozen=True)
class Elevation:
    cid: int
    from_tier: ServiceClass
    to_tier: ServiceClass
    reason: ElevationReason


@dataclass
class RankingQueue:
    service_class: ServiceClass
    ordered_cids: List[int] = field(default_factory=list)


@dataclass
class PrioritySchedule:
    """
    Ranking queues after elevation, one tier per service class.

    urgency holds the normalized emergent degree of DCS connections and
    satisfaction the S_i of TGS connections; both are diagnostics.
    """

    queues: Dict[ServiceClass, List[int]]
    elevation_log: List[Elevation] = field(default_factory=list)
    urgency: Dict[int, Fraction] = field(default_factory=dict)
    satisfaction: Dict[int, Degree] = field(default_factory=dict)

    def tier(self, service_class: ServiceClass) -> List[int]:
        return self.queues.get(service_class, [])

    def all_cids(self) -> List[int]:
        return [cid for service_class in ALL_CLASSES for cid in self.tier(service_class)]


def wait_time(packet: PacketRecord, now: int) -> int:
    """Time the packet has spent in the MAC queue."""
    waited = now - packet.arrival_time
    if waited < 0:
        raise ValueError(
            f"clock inversion: packet of CID {packet.cid} arrives at "
            f"{packet.arrival_time} after now={now}"
        )
    return waited


def guard_time(packet: PacketRecord, max_latency: int, now: int) -> int:
    """Remaining tolerable wait before the packet misses its latency bound (may be negative)."""
    return max_latency - wait_time(packet, now)


def emergent_degree(conn: ConnectionState, now: int) -> Fraction:
    """
    Mean guard time over the connection's queued packets.

    Computed from the running arrival-time sum kept on the connection, which
    equals the packet-by-packet mean of guard_time. An empty queue returns the
    connection's maximum latency.

    Args:
        conn: A delay-constrained connection
        now: Current frame start time (microseconds)

    Returns:
        L_i as an exact rational
    """
    count = len(conn.queue)
    if count == 0:
        return Fraction(conn.qos.max_latency)
    # The newest packet bounds every arrival time.
    wait_time(conn.queue[-1], now)
    total_guard = count * (conn.qos.max_latency - now) + conn.arrival_time_sum
    return Fraction(total_guard, count)


def normalize_degrees(values: Mapping[int, Degree]) -> Dict[int, Fraction]:
    """Map each L_i to 1 - L_i / L_max; everything maps to 1 when L_max <= 0."""
    if not values:
        raise ValueError("normalize_degrees needs at least one value")
    l_max = max(values.values())
    if l_max <= 0:
        return {cid: Fraction(1) for cid in values}
    l_max = Fraction(l_max)
    return {cid: 1 - Fraction(value) / l_max for cid, value in values.items()}


def is_emergent(conn: ConnectionState, now: int, frame_duration: int) -> bool:
    """True when some queued packet has guard time <= one frame."""
    # The head is the oldest packet, so it carries the smallest guard time.
    head = conn.head()
    if head is None:
        return False
    return guard_time(head, conn.qos.max_latency, now) <= frame_duration


def rank_dcs(
    conns: Iterable[ConnectionState],
    now: int,
    frame_duration: int,
    service_class: ServiceClass = ServiceClass.UGS,
) -> Tuple[RankingQueue, List[int]]:
    """
    Rank one delay-constrained class by emergent degree.

    Args:
        conns: Connections of a single DCS class
        now: Current frame start time
        frame_duration: T_frame, the emergent threshold
        service_class: Class reported for an empty input

    Returns:
        (ranking queue most-urgent-first, emergent CIDs in ranked order).
        The ranking queue holds every CID of the class; UGS never has an
        emergent set.
    """
    conns = list(conns)
    if not conns:
        return RankingQueue(service_class), []

    service_class = conns[0].service_class
    if any(conn.service_class is not service_class for conn in conns):
        raise ValueError("rank_dcs expects connections of a single class")

    degrees = {conn.cid: emergent_degree(conn, now) for conn in conns}
    ordered = sorted(degrees, key=lambda cid: (degrees[cid], cid))

    emergent = []
    if service_class is not ServiceClass.UGS:
        by_cid = {conn.cid: conn for conn in conns}
        emergent = [cid for cid in ordered if is_emergent(by_cid[cid], now, frame_duration)]

    return RankingQueue(service_class, ordered), emergent


def satisfaction_nrt(conn: ConnectionState) -> Degree:
    """
    Satisfactory degree of an NRT-VR connection.

    S = b_a(m-1) / b_low(m-1), where b_low = min(f(m-1), gamma * T_frame) is the
    minimum request recorded with last frame's history. Frame 0 has no history
    and is neutral (1); a zero b_low means fully satisfied.
    """
    if not conn.has_history:
        return Fraction(1)
    b_low = conn.min_request_last_frame
    if b_low == 0:
        return FULLY_SATISFIED
    return Fraction(conn.served_last_frame, b_low)


def satisfaction_be(conn: ConnectionState) -> Degree:
    """Satisfactory degree of a BE connection: served over backlog of the last frame."""
    if not conn.has_history:
        return Fraction(1)
    if conn.backlog_last_frame == 0:
        return FULLY_SATISFIED
    return Fraction(conn.served_last_frame, conn.backlog_last_frame)


def rank_tgs(
    conns: Iterable[ConnectionState],
    eta: int,
    service_class: ServiceClass = ServiceClass.BE,
) -> Tuple[RankingQueue, List[int], Dict[int, Degree]]:
    """
    Rank one throughput-guaranteed class, least satisfied first.

    Args:
        conns: Connections of a single TGS class
        eta: Service interrupt threshold
        service_class: Class reported for an empty input

    Returns:
        (ranking queue, starved CIDs in ranked order (BE only), S_i per CID)
    """
    conns = list(conns)
    if not conns:
        return RankingQueue(service_class), [], {}

    service_class = conns[0].service_class
    if any(conn.service_class is not service_class for conn in conns):
        raise ValueError("rank_tgs expects connections of a single class")

    if service_class is ServiceClass.NRT_VR:
        degrees = {conn.cid: satisfaction_nrt(conn) for conn in conns}
    else:
        degrees = {conn.cid: satisfaction_be(conn) for conn in conns}
    ordered = sorted(degrees, key=lambda cid: (degrees[cid], cid))

    starved = []
    if service_class is ServiceClass.BE:
        counters = {conn.cid: conn.interrupt_counter for conn in conns}
        starved = [cid for cid in ordered if counters[cid] >= eta]

    return RankingQueue(service_class, ordered), starved, degrees


def update_interrupt_counter(conn: ConnectionState, served_bytes_last_frame: int) -> int:
    """Count consecutive zero-service frames; any service resets the counter."""
    if served_bytes_last_frame > 0:
        conn.interrupt_counter = 0
    else:
        conn.interrupt_counter += 1
    return conn.interrupt_counter


def elevate(
    ranked: Mapping[ServiceClass, Sequence[int]],
    emergent: Mapping[ServiceClass, Sequence[int]],
    starved: Sequence[int],
) -> PrioritySchedule:
    """
    Move emergent and starving connections to the bottom of the next tier up.

    Emergent ERT-VR connections go to the UGS tier, emergent RT-VR to the
    ERT-VR tier and starved BE to the NRT-VR tier, keeping their ranked
    relative order. A CID is moved, never copied.

    Args:
        ranked: Ranking queue per class
        emergent: Emergent CIDs per class (ERT-VR and RT-VR are used)
        starved: Starved BE CIDs

    Returns:
        PrioritySchedule with one position per CID and the elevation log
    """
    queues = {service_class: list(ranked.get(service_class, [])) for service_class in ALL_CLASSES}
    log = []

    moves = [
        (ServiceClass.ERT_VR, emergent.get(ServiceClass.ERT_VR, []), ElevationReason.EMERGENT),
        (ServiceClass.RT_VR, emergent.get(ServiceClass.RT_VR, []), ElevationReason.EMERGENT),
        (ServiceClass.BE, starved, ElevationReason.STARVED),
    ]
    for source, cids, reason in moves:
        target = PROMOTION[source]
        members = set(cids)
        moving = [cid for cid in queues[source] if cid in members]
        if not moving:
            continue
        queues[source] = [cid for cid in queues[source] if cid not in members]
        queues[target].extend(moving)
        for cid in moving:
            log.append(Elevation(cid, source, target, reason))
            logger.debug(f"CID {cid} elevated {source.label} -> {target.label} ({reason.value})")

    return PrioritySchedule(queues=queues, elevation_log=log)


def assign_priorities(
    conns: Iterable[ConnectionState],
    frame: FrameBudget,
    eta: int,
) -> PrioritySchedule:
    """
    Run the whole priority assignment phase for one frame.

    Args:
        conns: All connections
        frame: Current frame
        eta: Service interrupt threshold

    Returns:
        The elevated PrioritySchedule with ranking diagnostics attached
    """
    by_class: Dict[ServiceClass, List[ConnectionState]] = {c: [] for c in ALL_CLASSES}
    for conn in conns:
        by_class[conn.service_class].append(conn)

    ranked: Dict[ServiceClass, List[int]] = {}
    emergent: Dict[ServiceClass, List[int]] = {}
    urgency: Dict[int, Fraction] = {}
    satisfaction: Dict[int, Degree] = {}

    for service_class in DCS_CLASSES:
        members = by_class[service_class]
        queue, emergent_cids = rank_dcs(members, frame.now, frame.frame_duration, service_class)
        ranked[service_class] = queue.ordered_cids
        emergent[service_class] = emergent_cids
        if members:
            urgency.update(
                normalize_degrees({conn.cid: emergent_degree(conn, frame.now) for conn in members})
            )

    queue, _, degrees = rank_tgs(
        by_class[ServiceClass.NRT_VR], eta, ServiceClass.NRT_VR
    )
    ranked[ServiceClass.NRT_VR] = queue.ordered_cids
    satisfaction.update(degrees)

    queue, starved, degrees = rank_tgs(
        by_class[ServiceClass.BE], eta, ServiceClass.BE
    )
    ranked[ServiceClass.BE] = queue.ordered_cids
    satisfaction.update(degrees)

    schedule = elevate(ranked, emergent, starved)
    schedule.urgency = urgency
    schedule.satisfaction = satisfaction
    return schedule
