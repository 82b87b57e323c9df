"""
Core domain types.
Service classes, QoS profiles, packets, per-connection state and the frame clock
shared by every other module.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, Iterator, Optional

from . import config

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

MICROSECONDS_PER_SECOND = 1_000_000


class SimulationError(RuntimeError):
    """Raised when a scheduler or the frame loop breaks its contract."""


class ServiceClass(Enum):
    """The five 802.16 service types, valued by strict priority (0 = highest)."""

    UGS = 0
    ERT_VR = 1
    RT_VR = 2
    NRT_VR = 3
    BE = 4

    @property
    def is_dcs(self) -> bool:
        return self in DCS_CLASSES

    @property
    def is_tgs(self) -> bool:
        return self in TGS_CLASSES

    @property
    def label(self) -> str:
        return self.name.replace("_", "-")

    def __lt__(self, other: "ServiceClass") -> bool:
        if not isinstance(other, ServiceClass):
            return NotImplemented
        return self.value < other.value


DCS_CLASSES = (ServiceClass.UGS, ServiceClass.ERT_VR, ServiceClass.RT_VR)
TGS_CLASSES = (ServiceClass.NRT_VR, ServiceClass.BE)
ALL_CLASSES = DCS_CLASSES + TGS_CLASSES


def rate_to_bytes(rate_bps: int, frame_duration_us: int) -> int:
    """Bytes a rate delivers in one frame, floored. Zero rate is allowed."""
    return (rate_bps * frame_duration_us) // (8 * MICROSECONDS_PER_SECOND)


def bytes_per_frame(link_rate: int, frame_duration: int) -> int:
    """
    Convert a link rate into the downlink byte budget of one frame.

    Args:
        link_rate: Link rate in bits per second
        frame_duration: Frame length in microseconds

    Returns:
        floor(link_rate * frame_duration / 8 / 10^6)
    """
    if link_rate <= 0:
        raise ValueError(f"link_rate must be positive, got {link_rate}")
    if frame_duration <= 0:
        raise ValueError(f"frame_duration must be positive, got {frame_duration}")
    return rate_to_bytes(link_rate, frame_duration)


@dataclass(frozen=True)
class QosProfile:
    """QoS parameters of one connection. Rates in bps, times in microseconds."""

    max_sustained_rate: int
    min_reserved_rate: int
    max_latency: int
    packet_size: int
    grant_interval: int = 0  # carried, no formula consumes it
    tolerated_jitter: int = 0  # carried, no formula consumes it

    def __post_init__(self):
        if self.min_reserved_rate < 0:
            raise ValueError(f"min_reserved_rate must be >= 0, got {self.min_reserved_rate}")
        if self.max_sustained_rate < self.min_reserved_rate:
            raise ValueError(
                f"max_sustained_rate ({self.max_sustained_rate}) must be >= "
                f"min_reserved_rate ({self.min_reserved_rate})"
            )
        if self.max_latency <= 0:
            raise ValueError(f"max_latency must be positive, got {self.max_latency}")
        if self.packet_size <= 0:
            raise ValueError(f"packet_size must be positive, got {self.packet_size}")

    def max_bytes(self, frame_duration: int) -> int:
        return rate_to_bytes(self.max_sustained_rate, frame_duration)

    def min_bytes(self, frame_duration: int) -> int:
        return rate_to_bytes(self.min_reserved_rate, frame_duration)


@dataclass(frozen=True)
class PacketRecord:
    cid: int
    arrival_time: int
    size: int

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"packet size must be positive, got {self.size}")


@dataclass(frozen=True)
class FrameBudget:
    """One downlink frame: its index, length and byte budget."""

    frame_index: int
    frame_duration: int
    total_bytes: int

    @property
    def now(self) -> int:
        return self.frame_index * self.frame_duration

    @property
    def end(self) -> int:
        return self.now + self.frame_duration


@dataclass
class GrantMap:
    """Per-CID byte grants for one frame."""

    grants: Dict[int, int] = field(default_factory=dict)
    case: Optional[str] = None  # allocator branch that produced the grants

    def __getitem__(self, cid: int) -> int:
        return self.grants.get(cid, 0)

    def __iter__(self) -> Iterator[int]:
        return iter(self.grants)

    def items(self):
        return self.grants.items()

    @property
    def total(self) -> int:
        return sum(self.grants.values())


@dataclass
class ConnectionState:
    """
    Per-CID queue and scheduling history.

    The queue is a bounded FIFO of PacketRecord; backlog_bytes and
    arrival_time_sum are maintained on every enqueue/dequeue.
    """

    cid: int
    service_class: ServiceClass
    qos: QosProfile
    capacity: int = config.QUEUE_CAPACITY
    ms_id: int = 0
    queue: Deque[PacketRecord] = field(default_factory=deque)
    backlog_bytes: int = 0
    arrival_time_sum: int = 0

    # History of frame m-1
    has_history: bool = False
    backlog_last_frame: int = 0
    served_last_frame: int = 0
    min_request_last_frame: int = 0
    interrupt_counter: int = 0

    # Cumulative statistics
    offered_bytes: int = 0
    offered_packets: int = 0
    served_bytes: int = 0
    served_packets: int = 0
    delay_sum: int = 0
    dropped_packets: int = 0
    dropped_bytes: int = 0

    def __post_init__(self):
        if self.cid <= 0:
            raise ValueError(f"cid must be a positive integer, got {self.cid}")
        if self.capacity <= 0:
            raise ValueError(f"queue capacity must be positive, got {self.capacity}")

    def __len__(self) -> int:
        return len(self.queue)

    @property
    def is_full(self) -> bool:
        return len(self.queue) >= self.capacity

    def head(self) -> Optional[PacketRecord]:
        return self.queue[0] if self.queue else None

    def enqueue(self, packet: PacketRecord) -> bool:
        """Append a packet; returns False (and leaves state untouched) when full."""
        if self.is_full:
            return False
        self.queue.append(packet)
        self.backlog_bytes += packet.size
        self.arrival_time_sum += packet.arrival_time
        return True

    def dequeue(self) -> PacketRecord:
        packet = self.queue.popleft()
        self.backlog_bytes -= packet.size
        self.arrival_time_sum -= packet.arrival_time
        return packet

    def record_history(self, snapshot_backlog: int, served: int, min_request: int) -> None:
        """Store the frame-m values that frame m+1 reads as m-1 history."""
        self.backlog_last_frame = snapshot_backlog
        self.served_last_frame = served
        self.min_request_last_frame = min_request
        self.has_history = True

