"""
On-air timing of BLE/ESB frames and the RSSI-driven packet-error channel
"""
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from core.sim.rng import RngStream
from core.utils.errors import ErrorCode, PayloadTooLarge, SimError

BLE_MAX_APP_PAYLOAD = 244
ESB_MAX_PAYLOAD = 252
RSSI_MIN_DBM = -120.0
RSSI_MAX_DBM = 0.0


class PhyMode(Enum):
    """Physical layer modes; BLE stops at 2M, ESB reaches 4M"""
    BLE_1M = ("BLE-1M", 1_000_000)
    BLE_2M = ("BLE-2M", 2_000_000)
    ESB_1M = ("ESB-1M", 1_000_000)
    ESB_2M = ("ESB-2M", 2_000_000)
    ESB_4M = ("ESB-4M", 4_000_000)

    def __init__(self, label: str, bit_rate: int):
        self.label = label
        self.bit_rate = bit_rate

    @property
    def is_ble(self) -> bool:
        return self.label.startswith("BLE")

    @property
    def max_payload(self) -> int:
        return BLE_MAX_APP_PAYLOAD if self.is_ble else ESB_MAX_PAYLOAD

    @classmethod
    def from_label(cls, label: str) -> 'PhyMode':
        for mode in cls:
            if mode.label.lower() == label.lower() or mode.name.lower() == label.lower():
                return mode
        raise SimError(f"Unknown PHY mode: {label}", code=ErrorCode.INVALID_INPUT)


@dataclass(frozen=True)
class FrameOverhead:
    preamble_bits: int
    address_bits: int
    header_bits: int
    crc_bits: int
    upper_stack_bytes: int = 0
    ifs_or_turnaround_us: int = 0

    def __post_init__(self):
        values = (self.preamble_bits, self.address_bits, self.header_bits,
                  self.crc_bits, self.upper_stack_bytes, self.ifs_or_turnaround_us)
        if any(v < 0 for v in values):
            raise SimError("Frame overhead fields must be >= 0", code=ErrorCode.INVALID_CONFIGURATION)
        if self.total_bits >= 8 * 300:
            raise SimError("Frame overhead must stay below 300 bytes", code=ErrorCode.INVALID_CONFIGURATION)

    @property
    def link_bits(self) -> int:
        return self.preamble_bits + self.address_bits + self.header_bits + self.crc_bits

    @property
    def total_bits(self) -> int:
        return self.link_bits + 8 * self.upper_stack_bytes


# BLE-2M data PDU: preamble 2 B, access address 4 B, header 2 B, CRC 3 B, L2CAP 4 + ATT 3
BLE_DATA_OVERHEAD = FrameOverhead(16, 32, 16, 24, upper_stack_bytes=7, ifs_or_turnaround_us=150)
# Empty PDU and LL control PDUs carry no host-stack header
BLE_EMPTY_OVERHEAD = replace(BLE_DATA_OVERHEAD, upper_stack_bytes=0)
# Legacy advertising on BLE-1M: 1 B preamble
BLE_ADV_OVERHEAD = FrameOverhead(8, 32, 16, 24, upper_stack_bytes=0, ifs_or_turnaround_us=150)
# ESB: preamble 2 B, address 5 B, 9-bit packet control field, CRC 2 B
ESB_OVERHEAD = FrameOverhead(16, 40, 9, 16, upper_stack_bytes=0, ifs_or_turnaround_us=40)

ADV_IND_BYTES = 37
SCAN_REQ_BYTES = 12
SCAN_RSP_BYTES = 37
CONNECT_IND_BYTES = 34


def on_air_time(phy: PhyMode, payload_bytes: int, ov: FrameOverhead) -> int:
    """Whole-microsecond air time, rounded up from the exact bit time"""
    if payload_bytes < 0:
        raise SimError("Payload size must be >= 0", code=ErrorCode.INVALID_INPUT)
    if payload_bytes > phy.max_payload:
        raise PayloadTooLarge(
            f"{payload_bytes} B exceeds the {phy.label} maximum of {phy.max_payload} B",
            details={"payload_bytes": payload_bytes, "max": phy.max_payload}
        )
    bits = ov.total_bits + 8 * payload_bytes
    return -(-bits * 1_000_000 // phy.bit_rate)


@dataclass(frozen=True)
class PerCurve:
    """Logistic packet-error curve"""
    rssi50_dbm: float
    width_db: float = 2.0

    def __post_init__(self):
        if self.width_db <= 0:
            raise SimError("PER curve width must be > 0", code=ErrorCode.INVALID_CONFIGURATION)


DEFAULT_PER_CURVES: Dict[PhyMode, PerCurve] = {
    PhyMode.BLE_1M: PerCurve(-93.0, 2.0),
    PhyMode.BLE_2M: PerCurve(-87.0, 2.0),
    PhyMode.ESB_1M: PerCurve(-90.0, 2.0),
    PhyMode.ESB_2M: PerCurve(-85.0, 2.0),
    PhyMode.ESB_4M: PerCurve(-78.0, 2.0),
}


def packet_error_prob(rssi: float, phy: PhyMode, curves: Optional[Dict[PhyMode, PerCurve]] = None) -> float:
    if not RSSI_MIN_DBM <= rssi <= RSSI_MAX_DBM:
        raise SimError(f"RSSI {rssi} dBm outside [-120, 0]", code=ErrorCode.INVALID_INPUT)
    curve = (curves or DEFAULT_PER_CURVES)[phy]
    z = (rssi - curve.rssi50_dbm) / curve.width_db
    if z > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


class FrameKind(Enum):
    DATA = "data"
    ACK = "ack"
    EMPTY = "empty"
    ADV = "adv"
    CONTROL = "control"


class Delivery(Enum):
    DELIVERED = "delivered"
    LOST = "lost"


@dataclass(frozen=True)
class Frame:
    kind: FrameKind
    phy: PhyMode
    payload_bytes: int
    overhead: FrameOverhead

    @property
    def air_us(self) -> int:
        return on_air_time(self.phy, self.payload_bytes, self.overhead)


@dataclass
class ChannelState:
    """Lossy channel shared by the two ends of one link.

    `per_override` pins the loss probability of a frame kind regardless of RSSI,
    which is how forced-loss scenarios are expressed.
    """
    rssi_dbm: float
    loss_rng: RngStream
    per_curves: Dict[PhyMode, PerCurve] = field(default_factory=lambda: dict(DEFAULT_PER_CURVES))
    per_override: Dict[FrameKind, float] = field(default_factory=dict)
    record: bool = False
    counters: Dict[Tuple[str, str], int] = field(default_factory=dict)
    log: List[Tuple[str, str, int, str]] = field(default_factory=list)
    _per_cache: Dict[PhyMode, float] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not RSSI_MIN_DBM <= self.rssi_dbm <= RSSI_MAX_DBM:
            raise SimError(f"RSSI {self.rssi_dbm} dBm outside [-120, 0]", code=ErrorCode.INVALID_INPUT)
        for kind, p in self.per_override.items():
            if not 0.0 <= p <= 1.0:
                raise SimError(f"PER override for {kind.value} must be in [0, 1]", code=ErrorCode.INVALID_INPUT)

    def per(self, phy: PhyMode, kind: FrameKind) -> float:
        if kind in self.per_override:
            return self.per_override[kind]
        if phy not in self._per_cache:
            self._per_cache[phy] = packet_error_prob(self.rssi_dbm, phy, self.per_curves)
        return self._per_cache[phy]

    def lost_count(self, kind: FrameKind) -> int:
        return self.counters.get((kind.value, Delivery.LOST.value), 0)

    def delivered_count(self, kind: FrameKind) -> int:
        return self.counters.get((kind.value, Delivery.DELIVERED.value), 0)


def deliver(frame: Frame, channel: ChannelState, at: int = 0) -> Delivery:
    """Bernoulli loss draw for one frame; counted on the channel (and logged when recording)"""
    outcome = Delivery.LOST if channel.loss_rng.bernoulli(channel.per(frame.phy, frame.kind)) else Delivery.DELIVERED
    key = (frame.kind.value, outcome.value)
    channel.counters[key] = channel.counters.get(key, 0) + 1
    if channel.record:
        channel.log.append((frame.kind.value, frame.phy.label, at, outcome.value))
    return outcome
