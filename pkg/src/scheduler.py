"""
Scheduler interface.
Every downlink scheduler turns the current queues into one frame's GrantMap;
APDS chains priority assignment and bandwidth allocation.
"""

import logging
from abc import ABC, abstractmethod
from enum import Enum
from typing import Mapping, Optional

from . import config
from .allocation import WpfWeights, allocate
from .core import ConnectionState, FrameBudget, GrantMap
from .priority import PrioritySchedule, assign_priorities

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)


class SchedulerKind(Enum):
    APDS = "apds"
    FIFO = "fifo"
    DFPQ = "dfpq"


class Scheduler(ABC):
    """Per-frame downlink scheduler."""

    kind: SchedulerKind

    def __init__(self):
        self.last_schedule: Optional[PrioritySchedule] = None

    @abstractmethod
    def schedule(self, conns: Mapping[int, ConnectionState], frame: FrameBudget) -> GrantMap:
        """Return the byte grants for this frame; must not mutate the queues."""


class ApdsScheduler(Scheduler):
    """Adaptive priority-based downlink scheduling."""

    kind = SchedulerKind.APDS

    def __init__(self, eta: int = config.INTERRUPT_THRESHOLD, weights: Optional[WpfWeights] = None):
        super().__init__()
        self.eta = eta
        self.weights = weights or WpfWeights.from_floats(config.BE_WEIGHTS, config.NRT_WEIGHTS)

    def schedule(self, conns: Mapping[int, ConnectionState], frame: FrameBudget) -> GrantMap:
        ordered = [conns[cid] for cid in sorted(conns)]
        self.last_schedule = assign_priorities(ordered, frame, self.eta)
        return allocate(frame, self.last_schedule, ordered, self.weights)
