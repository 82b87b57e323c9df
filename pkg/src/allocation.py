"""
Bandwidth allocation module (APDS phase 2).
Quantifies per-connection and per-class demand bounds, picks one of the three
allocation cases and splits the frame budget, using weight-based proportional
fairness (WPF) for the throughput-guaranteed classes when bandwidth is short.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, Mapping, Sequence, Tuple

from . import config
from .core import (
    ALL_CLASSES,
    DCS_CLASSES,
    ConnectionState,
    FrameBudget,
    GrantMap,
    ServiceClass,
)
from .priority import PrioritySchedule

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)


class AllocationCase(Enum):
    CASE_I = "CASE_I"  # budget exceeds every upper bound
    CASE_II = "CASE_II"  # budget between the lower and upper totals
    CASE_III = "CASE_III"  # budget below the lower total


@dataclass(frozen=True)
class ConnBounds:
    cid: int
    service_class: ServiceClass
    b_min: int
    b_max: int
    backlog: int

    def __post_init__(self):
        if not 0 <= self.b_min <= self.b_max <= self.backlog:
            raise ValueError(
                f"CID {self.cid}: bounds must satisfy 0 <= b_min <= b_max <= backlog, "
                f"got {self.b_min}/{self.b_max}/{self.backlog}"
            )


@dataclass
class DemandSummary:
    max_by_class: Dict[ServiceClass, int] = field(default_factory=dict)
    min_by_class: Dict[ServiceClass, int] = field(default_factory=dict)
    max_total: int = 0
    min_total: int = 0


@dataclass(frozen=True)
class WpfWeights:
    """WPF weights: (demand, interrupt) for BE and for NRT-VR."""

    be: Tuple[Fraction, Fraction] = (Fraction(3, 5), Fraction(2, 5))
    nrt: Tuple[Fraction, Fraction] = (Fraction(3, 5), Fraction(2, 5))

    def __post_init__(self):
        for name, pair in (("be", self.be), ("nrt", self.nrt)):
            if any(weight < 0 for weight in pair) or sum(pair) != 1:
                raise ValueError(f"{name} weights must be non-negative and sum to 1, got {pair}")

    @classmethod
    def from_floats(cls, be: Sequence[float], nrt: Sequence[float]) -> "WpfWeights":
        """Build exact weights from decimal values such as 0.6 / 0.4."""
        as_fraction = lambda value: Fraction(str(value))
        return cls(
            be=(as_fraction(be[0]), as_fraction(be[1])),
            nrt=(as_fraction(nrt[0]), as_fraction(nrt[1])),
        )


def largest_remainder(shares: Mapping[int, Fraction], total: int) -> Dict[int, int]:
    """
    Round rational shares to integers whose sum is total.

    Every share is floored, then the leftover units go one each to the largest
    fractional parts; ties by ascending CID.

    Args:
        shares: Rational share per CID
        total: Target integer sum (normally the exact sum of shares)

    Returns:
        Integer share per CID
    """
    floors = {cid: int(share) if share >= 0 else 0 for cid, share in shares.items()}
    extra = total - sum(floors.values())
    if extra <= 0:
        return floors

    by_remainder = sorted(shares, key=lambda cid: (-(shares[cid] - floors[cid]), cid))
    for cid in by_remainder[:extra]:
        floors[cid] += 1
    return floors


def conn_bounds(conn: ConnectionState, frame_duration: int) -> ConnBounds:
    """
    Upper and lower bandwidth requests of one connection for this frame.

    b_max = min(f, Gamma * T_frame); b_min = min(f, gamma * T_frame), except BE
    whose lower bound is replaced by its upper bound.
    """
    backlog = conn.backlog_bytes
    b_max = min(backlog, conn.qos.max_bytes(frame_duration))
    if conn.service_class is ServiceClass.BE:
        b_min = b_max
    else:
        b_min = min(backlog, conn.qos.min_bytes(frame_duration))
    return ConnBounds(conn.cid, conn.service_class, b_min, b_max, backlog)


def summarize_demand(bounds: Iterable[ConnBounds]) -> DemandSummary:
    summary = DemandSummary(
        max_by_class={service_class: 0 for service_class in ALL_CLASSES},
        min_by_class={service_class: 0 for service_class in ALL_CLASSES},
    )
    for bound in bounds:
        summary.max_by_class[bound.service_class] += bound.b_max
        summary.min_by_class[bound.service_class] += bound.b_min
    summary.max_total = sum(summary.max_by_class.values())
    summary.min_total = sum(summary.min_by_class.values())
    return summary


def select_case(summary: DemandSummary, total_bytes: int) -> AllocationCase:
    """Pick the allocation case; budgets equal to a bound fall to Case II."""
    if total_bytes > summary.max_total:
        return AllocationCase.CASE_I
    if total_bytes < summary.min_total:
        return AllocationCase.CASE_III
    return AllocationCase.CASE_II


def allocate_case1(bounds: Sequence[ConnBounds], total_bytes: int) -> GrantMap:
    """
    Grant every upper bound, then share the rest by unsatisfied backlog.

    Args:
        bounds: Per-connection bounds
        total_bytes: Frame budget, larger than the sum of upper bounds

    Returns:
        GrantMap with b_max plus a backlog-proportional share, never above backlog
    """
    grants = {bound.cid: bound.b_max for bound in bounds}
    remaining = total_bytes - sum(grants.values())
    residual = {bound.cid: bound.backlog - bound.b_max for bound in bounds if bound.backlog > bound.b_max}
    residual_total = sum(residual.values())

    if remaining > 0 and residual_total > 0:
        pool = min(remaining, residual_total)
        shares = {cid: Fraction(need * pool, residual_total) for cid, need in residual.items()}
        for cid, extra in largest_remainder(shares, pool).items():
            grants[cid] += extra

    return GrantMap(grants, AllocationCase.CASE_I.value)


def allocate_case2(bounds: Sequence[ConnBounds], total_bytes: int) -> GrantMap:
    """
    Grant every lower bound, then split the rest in proportion to (b_max - b_min).

    The shares telescope, so the grants sum to total_bytes exactly.
    """
    grants = {bound.cid: bound.b_min for bound in bounds}
    min_total = sum(bound.b_min for bound in bounds)
    spread = sum(bound.b_max for bound in bounds) - min_total
    remaining = total_bytes - min_total

    if remaining > 0 and spread > 0:
        shares = {
            bound.cid: Fraction((bound.b_max - bound.b_min) * remaining, spread)
            for bound in bounds
        }
        for cid, extra in largest_remainder(shares, remaining).items():
            grants[cid] += extra

    return GrantMap(grants, AllocationCase.CASE_II.value)


def wpf_share(
    b_max: int,
    class_max: int,
    counter: int,
    counter_sum: int,
    weights: Tuple[Fraction, Fraction],
    remaining: int,
) -> Fraction:
    """
    Raw WPF share of one connection.

    [b_max / B_max_class * w1 + phi / sum(phi) * w2] * B_rem. With sum(phi) = 0
    the whole weight goes to the demand term; with B_max_class = 0 the share is 0.

    Args:
        b_max: Connection upper bound
        class_max: Sum of upper bounds of the class
        counter: Connection service interrupt counter
        counter_sum: Sum of the class's counters
        weights: (demand weight, interrupt weight)
        remaining: Bandwidth left to distribute

    Returns:
        Exact rational share in bytes (before capping)
    """
    if class_max == 0:
        return Fraction(0)
    demand_weight, interrupt_weight = weights
    if counter_sum == 0:
        return Fraction(b_max * remaining, class_max)
    return (
        Fraction(b_max, class_max) * demand_weight
        + Fraction(counter, counter_sum) * interrupt_weight
    ) * remaining


def _wpf_pool(
    members: Sequence[ConnBounds],
    counters: Mapping[int, int],
    weights: Tuple[Fraction, Fraction],
    remaining: int,
) -> Dict[int, int]:
    """Split remaining over members by WPF, integerize, cap each grant at b_max."""
    class_max = sum(bound.b_max for bound in members)
    counter_sum = sum(counters.get(bound.cid, 0) for bound in members)
    if class_max == 0 or remaining <= 0:
        return {bound.cid: 0 for bound in members}

    shares = {
        bound.cid: wpf_share(
            bound.b_max, class_max, counters.get(bound.cid, 0), counter_sum, weights, remaining
        )
        for bound in members
    }
    rounded = largest_remainder(shares, remaining)
    # Capped surplus is not redistributed.
    return {bound.cid: min(rounded[bound.cid], bound.b_max) for bound in members}


def allocate_case3(
    schedule: PrioritySchedule,
    bounds: Mapping[int, ConnBounds],
    counters: Mapping[int, int],
    weights: "WpfWeights",
    total_bytes: int,
) -> GrantMap:
    """
    Serve DCS lower bounds in priority order, then TGS by WPF.

    The DCS walk follows the elevated tiers UGS -> ERT-VR -> RT-VR. A connection
    whose b_min exceeds what is left gets the residual and everyone after it
    gets 0. With bandwidth left, if it exceeds the NRT-VR lower total the NRT-VR
    connections get b_min and BE shares the rest by WPF with the BE weights;
    otherwise the NRT-VR tier (true NRT-VR plus elevated BE) shares everything
    left by WPF with the NRT-VR weights.

    Args:
        schedule: Elevated ranking queues of this frame
        bounds: ConnBounds per CID
        counters: Service interrupt counter per CID
        weights: WPF weights
        total_bytes: Frame budget, below the lower-bound total

    Returns:
        GrantMap covering every CID in bounds
    """
    grants = {cid: 0 for cid in bounds}
    remaining = total_bytes

    for tier in DCS_CLASSES:
        for cid in schedule.tier(tier):
            need = bounds[cid].b_min
            granted = min(need, remaining)
            grants[cid] = granted
            remaining -= granted

    if remaining > 0:
        nrt = [bounds[cid] for cid in sorted(bounds) if bounds[cid].service_class is ServiceClass.NRT_VR]
        be = [bounds[cid] for cid in sorted(bounds) if bounds[cid].service_class is ServiceClass.BE]
        nrt_min = sum(bound.b_min for bound in nrt)

        if remaining > nrt_min:
            for bound in nrt:
                grants[bound.cid] = bound.b_min
            remaining -= nrt_min
            grants.update(_wpf_pool(be, counters, weights.be, remaining))
        else:
            # Starved BE connections elevated into the NRT-VR tier share this pool
            in_tier = {cid for cid in schedule.tier(ServiceClass.NRT_VR) if cid in bounds}
            members = [bounds[cid] for cid in sorted(in_tier | {bound.cid for bound in nrt})]
            grants.update(_wpf_pool(members, counters, weights.nrt, remaining))

    return GrantMap(grants, AllocationCase.CASE_III.value)


def allocate_bounds(
    bounds: Sequence[ConnBounds],
    schedule: PrioritySchedule,
    counters: Mapping[int, int],
    weights: WpfWeights,
    total_bytes: int,
) -> GrantMap:
    """Pick the case for these bounds and run its allocator."""
    summary = summarize_demand(bounds)
    case = select_case(summary, total_bytes)
    logger.debug(f"B_max={summary.max_total} B_min={summary.min_total} -> {case.value}")

    if case is AllocationCase.CASE_I:
        return allocate_case1(bounds, total_bytes)
    if case is AllocationCase.CASE_II:
        return allocate_case2(bounds, total_bytes)
    by_cid = {bound.cid: bound for bound in bounds}
    return allocate_case3(schedule, by_cid, counters, weights, total_bytes)


def allocate(
    frame: FrameBudget,
    schedule: PrioritySchedule,
    conns: Iterable[ConnectionState],
    weights: WpfWeights,
) -> GrantMap:
    """
    Run the whole allocation phase for one frame.

    Args:
        frame: Current frame (provides B_total and T_frame)
        schedule: Output of the priority assignment phase
        conns: All connections (their current backlog is the demand)
        weights: WPF weights

    Returns:
        GrantMap from the case allocator that matches the demand summary
    """
    conns = list(conns)
    bounds = [conn_bounds(conn, frame.frame_duration) for conn in conns]
    counters = {conn.cid: conn.interrupt_counter for conn in conns}
    grants = allocate_bounds(bounds, schedule, counters, weights, frame.total_bytes)
    logger.debug(f"Frame {frame.frame_index}: B_total={frame.total_bytes} -> {grants.case}")
    return grants


if __name__ == "__main__":
    # Worked examples for the three cases
    def bound(cid, service_class, b_min, b_max, backlog):
        return ConnBounds(cid, service_class, b_min, b_max, backlog)

    print("Case I  :", allocate_case1(
        [bound(1, ServiceClass.UGS, 50, 100, 150), bound(2, ServiceClass.UGS, 50, 100, 100)], 230
    ).grants)
    print("Case II :", allocate_case2(
        [bound(1, ServiceClass.RT_VR, 100, 300, 300), bound(2, ServiceClass.RT_VR, 100, 200, 200)], 350
    ).grants)
    schedule = PrioritySchedule(queues={
        ServiceClass.UGS: [1], ServiceClass.ERT_VR: [2], ServiceClass.RT_VR: [3],
        ServiceClass.NRT_VR: [], ServiceClass.BE: [],
    })
    print("Case III:", allocate_case3(schedule, {
        1: bound(1, ServiceClass.UGS, 300, 300, 300),
        2: bound(2, ServiceClass.ERT_VR, 200, 200, 200),
        3: bound(3, ServiceClass.RT_VR, 200, 200, 200),
    }, {}, WpfWeights(), 450).grants)
