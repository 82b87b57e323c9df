"""
Traffic generation module.
Produces per-connection downlink arrival streams and applies finite-queue
drop semantics.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence

import numpy as np

from . import config
from .core import MICROSECONDS_PER_SECOND, ConnectionState, FrameBudget, PacketRecord

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

BITS_PER_BYTE_US = 8 * MICROSECONDS_PER_SECOND  # bps * us / this = bytes


class TrafficKind(Enum):
    CBR = "CBR"
    ON_OFF = "ON_OFF"
    POISSON = "POISSON"


@dataclass(frozen=True)
class TrafficModel:
    """
    Arrival process of one connection.

    mean_on / mean_off are the exponential phase means in microseconds and
    only matter for ON_OFF; while ON the source emits at the peak rate that
    keeps the long-run mean at mean_rate.
    """

    kind: TrafficKind
    mean_rate: int
    mean_on: int = 0
    mean_off: int = 0
    seed_stream: int = 0

    def __post_init__(self):
        if self.mean_rate <= 0:
            raise ValueError(f"mean_rate must be positive, got {self.mean_rate}")
        if self.kind is TrafficKind.ON_OFF and (self.mean_on <= 0 or self.mean_off <= 0):
            raise ValueError(
                f"ON_OFF needs positive mean_on/mean_off, got {self.mean_on}/{self.mean_off}"
            )

    @property
    def peak_rate(self) -> float:
        if self.kind is not TrafficKind.ON_OFF:
            return float(self.mean_rate)
        return self.mean_rate * (self.mean_on + self.mean_off) / self.mean_on


def make_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for one connection, derived from (scenario seed, stream id)."""
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


class TrafficSource:
    """
    Stateful arrival generator for one connection.

    Holds the model, its random substream, the fractional byte credit carried
    between frames and, for ON_OFF, the current phase.
    """

    def __init__(self, model: TrafficModel, rng: np.random.Generator):
        self.model = model
        self.rng = rng
        self.credit = 0.0
        self.is_on = False
        self.phase_left = 0.0
        if model.kind is TrafficKind.ON_OFF:
            duty = model.mean_on / (model.mean_on + model.mean_off)
            self.is_on = bool(rng.random() < duty)
            self.phase_left = self._draw_phase()

    def _draw_phase(self) -> float:
        mean = self.model.mean_on if self.is_on else self.model.mean_off
        return float(self.rng.exponential(mean))

    def _emit(self, cid: int, size: int, start: int, stop: int, volume: float) -> List[PacketRecord]:
        """Add volume bytes of credit and space the whole packets it fills over [start, stop)."""
        self.credit += volume
        count = int(self.credit // size)
        if count == 0:
            return []
        self.credit -= count * size
        width = stop - start
        return [PacketRecord(cid, start + (k * width) // count, size) for k in range(count)]

    def _cbr(self, cid: int, size: int, frame: FrameBudget) -> List[PacketRecord]:
        volume = self.model.mean_rate * frame.frame_duration / BITS_PER_BYTE_US
        return self._emit(cid, size, frame.now, frame.end, volume)

    def _on_off(self, cid: int, size: int, frame: FrameBudget) -> List[PacketRecord]:
        packets = []
        t = float(frame.now)
        while t < frame.end:
            span = min(self.phase_left, frame.end - t)
            if self.is_on:
                volume = self.model.peak_rate * span / BITS_PER_BYTE_US
                start = int(t)
                stop = max(start, min(frame.end, int(t + span)))
                packets.extend(self._emit(cid, size, start, stop, volume))
            self.phase_left -= span
            t += span
            if self.phase_left <= 0:
                self.is_on = not self.is_on
                self.phase_left = self._draw_phase()
        return packets

    def _poisson(self, cid: int, size: int, frame: FrameBudget) -> List[PacketRecord]:
        expected = self.model.mean_rate * frame.frame_duration / BITS_PER_BYTE_US / size
        count = int(self.rng.poisson(expected))
        if count == 0:
            return []
        offsets = np.sort(self.rng.integers(0, frame.frame_duration, size=count))
        return [PacketRecord(cid, frame.now + int(offset), size) for offset in offsets]

    def generate(self, conn: ConnectionState, frame: FrameBudget) -> List[PacketRecord]:
        size = conn.qos.packet_size
        if self.model.kind is TrafficKind.CBR:
            return self._cbr(conn.cid, size, frame)
        if self.model.kind is TrafficKind.ON_OFF:
            return self._on_off(conn.cid, size, frame)
        return self._poisson(conn.cid, size, frame)


def generate_arrivals(
    conn: ConnectionState,
    source: TrafficSource,
    frame: FrameBudget,
) -> List[PacketRecord]:
    """
    Generate the packets a connection receives during one frame.

    Args:
        conn: Connection the packets belong to (packet size is taken from its QoS)
        source: The connection's traffic source (model + seeded substream)
        frame: Current frame

    Returns:
        Packets sorted by arrival time, all within [frame.now, frame.now + T_frame)
    """
    return source.generate(conn, frame)


def enqueue_with_drop(conn: ConnectionState, packets: Sequence[PacketRecord]) -> int:
    """
    Append packets in order until the queue is full; count the rest as dropped.

    Args:
        conn: Target connection
        packets: Packets sorted by arrival time

    Returns:
        Number of dropped packets
    """
    dropped = 0
    for packet in packets:
        conn.offered_packets += 1
        conn.offered_bytes += packet.size
        if not conn.enqueue(packet):
            dropped += 1
            conn.dropped_packets += 1
            conn.dropped_bytes += packet.size

    if dropped:
        logger.debug(f"CID {conn.cid}: dropped {dropped} of {len(packets)} arrivals (queue full)")

    return dropped


if __name__ == "__main__":
    # Quick look at the three arrival processes
    from .core import QosProfile, ServiceClass

    qos = QosProfile(max_sustained_rate=512_000, min_reserved_rate=256_000,
                     max_latency=20_000, packet_size=160)
    for kind in TrafficKind:
        model = TrafficModel(kind, mean_rate=256_000, mean_on=50_000, mean_off=50_000)
        conn = ConnectionState(cid=1, service_class=ServiceClass.UGS, qos=qos)
        source = TrafficSource(model, make_rng(config.DEFAULT_SEED, 1))
        total = 0
        for m in range(200):
            frame = FrameBudget(m, config.FRAME_DURATION_US, 6250)
            total += sum(p.size for p in generate_arrivals(conn, source, frame))
        rate = total * 8 / (200 * config.FRAME_DURATION_US / MICROSECONDS_PER_SECOND)
        print(f"{kind.value:8s} mean rate over 200 frames: {rate / 1000:.1f} kbps")
