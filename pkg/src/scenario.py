"""
Scenario module.
Loads and validates scenario files and builds the bundled reference scenario
(one base station, nine mobile stations, five downlink connections each).
"""

import hashlib
import json
import logging
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import config
from .core import ALL_CLASSES, QosProfile, ServiceClass, bytes_per_frame
from .traffic import TrafficKind, TrafficModel

# Set up logging
logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
logger = logging.getLogger(__name__)

SUPPORTED_SCHEDULERS = ("apds", "fifo", "dfpq")

DEFAULT_TRAFFIC_KIND = {
    ServiceClass.UGS: TrafficKind.CBR,
    ServiceClass.ERT_VR: TrafficKind.ON_OFF,
    ServiceClass.RT_VR: TrafficKind.ON_OFF,
    ServiceClass.NRT_VR: TrafficKind.POISSON,
    ServiceClass.BE: TrafficKind.POISSON,
}


class ScenarioError(ValueError):
    """Raised when a scenario file is rejected; the message names the offending field."""


def parse_service_class(value: str) -> ServiceClass:
    """Accept 'ERT_VR', 'ERT-VR' or 'ert-vr'."""
    key = str(value).strip().upper().replace("-", "_")
    if key not in ServiceClass.__members__:
        raise ValueError(f"unknown service class '{value}'")
    return ServiceClass[key]


# ============================================================================
# File Schema
# ============================================================================

class QosSpec(BaseModel):
    """QoS fields; every field may be left to the class profile."""

    model_config = ConfigDict(extra="forbid")

    max_sustained_rate: Optional[int] = Field(default=None, ge=0)
    min_reserved_rate: Optional[int] = Field(default=None, ge=0)
    max_latency: Optional[int] = Field(default=None, gt=0)
    packet_size: Optional[int] = Field(default=None, gt=0)
    grant_interval: Optional[int] = Field(default=None, ge=0)
    tolerated_jitter: Optional[int] = Field(default=None, ge=0)


class TrafficSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Optional[TrafficKind] = None
    mean_rate: Optional[int] = Field(default=None, gt=0)
    mean_on: Optional[int] = Field(default=None, gt=0)
    mean_off: Optional[int] = Field(default=None, gt=0)


class ProfileSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    qos: QosSpec = Field(default_factory=QosSpec)
    traffic: TrafficSpec = Field(default_factory=TrafficSpec)


class ConnectionSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    cid: int = Field(gt=0)
    ms: int = Field(default=0, ge=0)
    service_class: str = Field(alias="class")
    qos: QosSpec = Field(default_factory=QosSpec)
    traffic: TrafficSpec = Field(default_factory=TrafficSpec)

    @field_validator("service_class")
    @classmethod
    def _known_class(cls, value: str) -> str:
        return parse_service_class(value).name


class WeightsSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    be: Tuple[float, float] = config.BE_WEIGHTS
    nrt: Tuple[float, float] = config.NRT_WEIGHTS

    @field_validator("be", "nrt")
    @classmethod
    def _sum_to_one(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        # same exact decimal rule the allocator applies when it builds WpfWeights
        if min(value) < 0 or sum(Fraction(str(weight)) for weight in value) != 1:
            raise ValueError(f"weights must be non-negative and sum to 1 exactly, got {value}")
        return value


class ConnectionSetup(NamedTuple):
    """A connection after profile resolution."""

    cid: int
    ms: int
    service_class: ServiceClass
    qos: QosProfile
    traffic: TrafficModel


class Scenario(BaseModel):
    """
    A complete simulation scenario.

    link is in bits per second, frame in microseconds and duration in frames.
    profiles hold per-class QoS/traffic defaults; each connection may override
    any field.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "scenario"
    link: int = Field(default=config.LINK_RATE_BPS, gt=0)
    frame: int = Field(default=config.FRAME_DURATION_US, gt=0)
    duration: int = Field(default=config.NUM_FRAMES, gt=0)
    queue_capacity: int = Field(default=config.QUEUE_CAPACITY, gt=0)
    eta: int = Field(default=config.INTERRUPT_THRESHOLD, ge=0)
    weights: WeightsSpec = Field(default_factory=WeightsSpec)
    scheduler: str = "apds"
    seed: int = Field(default=config.DEFAULT_SEED, ge=0, lt=2**64)
    dfpq_weights: Optional[Dict[str, float]] = None
    profiles: Dict[str, ProfileSpec] = Field(default_factory=dict)
    connections: List[ConnectionSpec] = Field(min_length=1)

    @field_validator("scheduler")
    @classmethod
    def _known_scheduler(cls, value: str) -> str:
        value = value.strip().lower()
        if value not in SUPPORTED_SCHEDULERS:
            raise ValueError(
                f"scheduler '{value}' is not supported (choose from {', '.join(SUPPORTED_SCHEDULERS)})"
            )
        return value

    @field_validator("profiles")
    @classmethod
    def _known_profiles(cls, value: Dict[str, ProfileSpec]) -> Dict[str, ProfileSpec]:
        return {parse_service_class(name).name: profile for name, profile in value.items()}

    @field_validator("dfpq_weights")
    @classmethod
    def _dfpq_weights(cls, value: Optional[Dict[str, float]]) -> Optional[Dict[str, float]]:
        if value is None:
            return value
        weights = {parse_service_class(name).name: weight for name, weight in value.items()}
        missing = [c.name for c in ALL_CLASSES if c.name not in weights]
        if missing:
            raise ValueError(f"dfpq_weights missing classes: {', '.join(missing)}")
        if any(weight <= 0 for weight in weights.values()):
            raise ValueError("dfpq_weights must all be positive")
        return weights

    @model_validator(mode="after")
    def _check_connections(self) -> "Scenario":
        seen = set()
        for connection in self.connections:
            if connection.cid in seen:
                raise ValueError(f"duplicate CID {connection.cid}")
            seen.add(connection.cid)
        # Resolving validates every connection's QoS and traffic
        self.resolved_connections()
        return self

    @property
    def total_bytes(self) -> int:
        return bytes_per_frame(self.link, self.frame)

    def resolved_connections(self) -> List[ConnectionSetup]:
        return [self._resolve(index, spec) for index, spec in enumerate(self.connections)]

    def _resolve(self, index: int, spec: ConnectionSpec) -> ConnectionSetup:
        service_class = ServiceClass[spec.service_class]
        profile = self.profiles.get(service_class.name, ProfileSpec())
        path = f"connections[{index}] (CID {spec.cid})"

        qos = {**profile.qos.model_dump(exclude_none=True), **spec.qos.model_dump(exclude_none=True)}
        for key in ("max_sustained_rate", "max_latency", "packet_size"):
            if key not in qos:
                raise ValueError(f"{path}.qos.{key}: required for {service_class.label}")
        if service_class is ServiceClass.BE:
            if qos.get("min_reserved_rate", 0) != 0:
                raise ValueError(f"{path}.qos.min_reserved_rate: BE has no minimum reserved rate")
            qos["min_reserved_rate"] = 0
        elif "min_reserved_rate" not in qos:
            raise ValueError(f"{path}.qos.min_reserved_rate: required for {service_class.label}")
        try:
            qos_profile = QosProfile(**qos)
        except ValueError as e:
            raise ValueError(f"{path}.qos: {e}") from e

        traffic = {
            **profile.traffic.model_dump(exclude_none=True),
            **spec.traffic.model_dump(exclude_none=True),
        }
        traffic.setdefault("kind", DEFAULT_TRAFFIC_KIND[service_class])
        if "mean_rate" not in traffic:
            raise ValueError(f"{path}.traffic.mean_rate: required")
        try:
            model = TrafficModel(seed_stream=spec.cid, **traffic)
        except ValueError as e:
            raise ValueError(f"{path}.traffic: {e}") from e

        return ConnectionSetup(spec.cid, spec.ms, service_class, qos_profile, model)

    def dfpq_class_weights(self) -> Dict[ServiceClass, float]:
        weights = self.dfpq_weights or config.DFPQ_CLASS_WEIGHTS
        return {ServiceClass[name]: value for name, value in weights.items()}


def _format_validation_error(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        message = item["msg"].removeprefix("Value error, ")
        parts.append(f"{location}: {message}" if location else message)
    return "; ".join(parts)


def parse_scenario(data: dict) -> Scenario:
    """Validate an already-decoded scenario mapping."""
    try:
        return Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioError(_format_validation_error(e)) from e


def load_scenario(path: Union[str, Path]) -> Scenario:
    """
    Load and validate a scenario file.

    Args:
        path: JSON scenario file

    Returns:
        Validated Scenario

    Raises:
        ScenarioError: unreadable file, malformed JSON or a rejected field
    """
    path = Path(path)
    logger.info(f"Loading scenario: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ScenarioError(f"cannot read scenario {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON at line {e.lineno}: {e.msg}") from e

    if isinstance(data, dict):
        data.setdefault("name", path.stem)
    scenario = parse_scenario(data)
    logger.info(
        f"Scenario '{scenario.name}': {len(scenario.connections)} connections, "
        f"{scenario.duration} frames, B_total={scenario.total_bytes} bytes/frame"
    )
    return scenario


def scenario_hash(scenario: Scenario) -> str:
    """Short content hash of the scenario, carried as run metadata."""
    content = scenario.model_dump_json(by_alias=True)
    return hashlib.sha256(content.encode()).hexdigest()[:12]


# ============================================================================
# Reference Scenario
# ============================================================================

# Per-class defaults for the reference run. Rates in bps, times in us.
# Minimum reserved rates are one packet per frame so that a lower-bound grant
# always moves at least one whole packet. DCS minima cover the mean offered rate
# and total about 80% of B_total. BE traffic pushes the link into overload.
REFERENCE_PROFILES = {
    "UGS": {
        "qos": {"max_sustained_rate": 256_000, "min_reserved_rate": 256_000,
                "max_latency": 20_000, "packet_size": 160, "grant_interval": 5_000},
        "traffic": {"kind": "CBR", "mean_rate": 256_000},
    },
    "ERT_VR": {
        "qos": {"max_sustained_rate": 512_000, "min_reserved_rate": 256_000,
                "max_latency": 100_000, "packet_size": 160},
        "traffic": {"kind": "ON_OFF", "mean_rate": 192_000, "mean_on": 50_000, "mean_off": 50_000},
    },
    "RT_VR": {
        "qos": {"max_sustained_rate": 768_000, "min_reserved_rate": 320_000,
                "max_latency": 150_000, "packet_size": 200},
        "traffic": {"kind": "ON_OFF", "mean_rate": 240_000, "mean_on": 50_000, "mean_off": 50_000},
    },
    "NRT_VR": {
        "qos": {"max_sustained_rate": 576_000, "min_reserved_rate": 64_000,
                "max_latency": 1_000_000, "packet_size": 40},
        "traffic": {"kind": "POISSON", "mean_rate": 48_000},
    },
    "BE": {
        "qos": {"max_sustained_rate": 576_000, "max_latency": 2_000_000, "packet_size": 120},
        "traffic": {"kind": "POISSON", "mean_rate": 440_000},
    },
}

NUM_MOBILE_STATIONS = 9


def reference_scenario(seed: int = config.DEFAULT_SEED) -> Scenario:
    """
    Build the reference scenario: 9 mobile stations, each with one downlink
    connection per class, CIDs 1..45 assigned station by station.
    """
    connections = []
    cid = 1
    for ms in range(1, NUM_MOBILE_STATIONS + 1):
        for service_class in ALL_CLASSES:
            connections.append({"cid": cid, "ms": ms, "class": service_class.name})
            cid += 1

    return parse_scenario({
        "name": "reference",
        "link": config.LINK_RATE_BPS,
        "frame": config.FRAME_DURATION_US,
        "duration": config.NUM_FRAMES,
        "queue_capacity": config.QUEUE_CAPACITY,
        "eta": config.INTERRUPT_THRESHOLD,
        "weights": {"be": list(config.BE_WEIGHTS), "nrt": list(config.NRT_WEIGHTS)},
        "scheduler": "apds",
        "seed": seed,
        "profiles": REFERENCE_PROFILES,
        "connections": connections,
    })
