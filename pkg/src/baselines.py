"""
Baseline schedulers.
FIFO over a single arrival-ordered view of all queues, and DFPQ: strict class
priority with deficit round robin inside each class.
"""

import heapq
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

from . import config
from .core import ALL_CLASSES, ConnectionState, FrameBudget, GrantMap, ServiceClass
from .scheduler import Scheduler, SchedulerKind

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)


def fifo_schedule(conns: Mapping[int, ConnectionState], frame: FrameBudget) -> GrantMap:
    """
    Serve all queued packets in global arrival order until one does not fit.

    The head packet that does not fit the remaining budget blocks everything
    behind it (no skipping).

    Args:
        conns: All connections
        frame: Current frame

    Returns:
        GrantMap aggregating the granted packets per CID
    """
    grants: Dict[int, int] = {}
    remaining = frame.total_bytes
    merged = heapq.merge(
        *(conns[cid].queue for cid in sorted(conns)),
        key=lambda packet: (packet.arrival_time, packet.cid),
    )
    for packet in merged:
        if packet.size > remaining:
            break
        grants[packet.cid] = grants.get(packet.cid, 0) + packet.size
        remaining -= packet.size
    return GrantMap(grants, SchedulerKind.FIFO.name)


@dataclass
class DfpqState:
    """Deficit counters, quanta and round-robin cursors per class, kept across frames."""

    quanta: Dict[ServiceClass, int]
    deficits: Dict[ServiceClass, int] = field(default_factory=dict)
    cursors: Dict[ServiceClass, int] = field(default_factory=dict)

    def __post_init__(self):
        for service_class, quantum in self.quanta.items():
            if quantum <= 0:
                raise ValueError(f"{service_class.label} quantum must be positive, got {quantum}")
            self.deficits.setdefault(service_class, 0)
            self.cursors.setdefault(service_class, 0)

    @classmethod
    def from_weights(cls, total_bytes: int, weights: Mapping[ServiceClass, float]) -> "DfpqState":
        quanta = {
            service_class: max(1, int(total_bytes * weights[service_class]))
            for service_class in ALL_CLASSES
        }
        return cls(quanta=quanta)


def _serve_class_round_robin(
    members: List[ConnectionState],
    state: DfpqState,
    service_class: ServiceClass,
    budget: int,
    grants: Dict[int, int],
) -> int:
    """One packet per visit, cycling from the saved cursor; returns the budget left."""
    count = len(members)
    deficit = state.deficits[service_class]
    # Next unserved packet index per member
    positions = [0] * count
    index = state.cursors[service_class] % count

    idle_visits = 0
    while idle_visits < count:
        conn = members[index]
        queue = conn.queue
        position = positions[index]
        if position < len(queue) and queue[position].size <= min(deficit, budget):
            size = queue[position].size
            grants[conn.cid] = grants.get(conn.cid, 0) + size
            deficit -= size
            budget -= size
            positions[index] += 1
            idle_visits = 0
            state.cursors[service_class] = (index + 1) % count
        else:
            idle_visits += 1
        index = (index + 1) % count

    state.deficits[service_class] = min(deficit, state.quanta[service_class])
    return budget


def dfpq_schedule(
    state: DfpqState,
    conns: Mapping[int, ConnectionState],
    frame: FrameBudget,
) -> GrantMap:
    """
    Deficit fair priority queue for one frame.

    Classes are visited in strict priority order. Each class adds its quantum
    to its deficit, then serves whole packets round-robin across its
    connections from the saved cursor. Unused deficit carries over, capped at
    one quantum.

    Args:
        state: DFPQ state carried across frames (mutated)
        conns: All connections
        frame: Current frame

    Returns:
        GrantMap of whole-packet grants
    """
    grants: Dict[int, int] = {}
    budget = frame.total_bytes
    by_class: Dict[ServiceClass, List[ConnectionState]] = {c: [] for c in ALL_CLASSES}
    for cid in sorted(conns):
        by_class[conns[cid].service_class].append(conns[cid])

    for service_class in ALL_CLASSES:
        state.deficits[service_class] += state.quanta[service_class]
        members = by_class[service_class]
        if not members:
            state.deficits[service_class] = min(
                state.deficits[service_class], state.quanta[service_class]
            )
            continue
        budget = _serve_class_round_robin(members, state, service_class, budget, grants)

    return GrantMap(grants, SchedulerKind.DFPQ.name)


class FifoScheduler(Scheduler):
    kind = SchedulerKind.FIFO

    def schedule(self, conns: Mapping[int, ConnectionState], frame: FrameBudget) -> GrantMap:
        return fifo_schedule(conns, frame)


class DfpqScheduler(Scheduler):
    kind = SchedulerKind.DFPQ

    def __init__(self, total_bytes: int, weights: Optional[Mapping[ServiceClass, float]] = None):
        super().__init__()
        if weights is None:
            weights = {ServiceClass[name]: value for name, value in config.DFPQ_CLASS_WEIGHTS.items()}
        self.state = DfpqState.from_weights(total_bytes, weights)

    def schedule(self, conns: Mapping[int, ConnectionState], frame: FrameBudget) -> GrantMap:
        return dfpq_schedule(self.state, conns, frame)
