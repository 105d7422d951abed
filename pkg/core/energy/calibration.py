"""
Calibration constants tying the simulator to measured anchors.

A CalibrationSet is a versioned JSON artifact; its content hash tags every result row.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from typing import Any, Dict, Union

from core.energy.power import PowerProfile
from core.utils.errors import ErrorCode, SimError

CALIBRATION_VERSION = "1"


class Protocol(Enum):
    BLE = "ble"
    ESB = "esb"

    @classmethod
    def parse(cls, value: str) -> 'Protocol':
        try:
            return cls(value.lower())
        except ValueError:
            raise SimError(f"Unknown protocol: {value}", code=ErrorCode.INVALID_INPUT) from None


def _check_positive(section: Any) -> None:
    for f in fields(section):
        value = getattr(section, f.name)
        if isinstance(value, (int, float)) and value <= 0:
            raise SimError(
                f"Calibration constant {type(section).__name__}.{f.name} must be positive, got {value}",
                code=ErrorCode.INVALID_CONFIGURATION
            )


@dataclass(frozen=True)
class PowerCalibration:
    """State powers shared by both radios (mW)"""
    system_off_mw: float = 0.004
    cpu_active_mw: float = 2.0
    radio_ramp_mw: float = 24.0
    radio_tx_mw: float = 35.0
    radio_rx_mw: float = 6.0

    def __post_init__(self):
        _check_positive(self)


@dataclass(frozen=True)
class EsbCalibration:
    idle_mw: float = 1.15
    pre_cpu_us: int = 111
    ramp_us: int = 20
    post_cpu_us: int = 579
    rx_processing_us: int = 40
    stream_rearm_us: int = 308
    init_cpu_us: int = 18864
    init_radio_us: int = 2266

    def __post_init__(self):
        _check_positive(self)


@dataclass(frozen=True)
class BleCalibration:
    idle_mw: float = 0.9569
    pre_cpu_us: int = 300
    ramp_us: int = 40
    post_cpu_us: int = 1018
    rx_processing_us: int = 40
    stack_latency_us: int = 700
    ce_guard_us: int = 1800
    connect_delay_us: int = 100_000
    conn_setup_events: int = 8
    conn_setup_cpu_us: int = 4971
    init_cpu_us: int = 20993
    init_radio_us: int = 20872

    def __post_init__(self):
        _check_positive(self)


@dataclass(frozen=True)
class NodeCalibration:
    """Loop-recorder pipeline constants"""
    spi_read_us_per_word: int = 8
    sensor_idle_mw: float = 0.49
    sensor_read_mw: float = 1.5
    esb_standby_irq_cpu_us: int = 500
    esb_standby_radio_hold_us: int = 767
    esb_onoff_init_cpu_us: int = 9009
    esb_onoff_init_radio_us: int = 2991
    esb_onoff_teardown_us: int = 12000
    ble_irq_cpu_us: int = 500
    ble_radio_hold_us: int = 1503
    ble_ce_overhead_us: int = 111

    def __post_init__(self):
        _check_positive(self)

    @property
    def esb_onoff_wake_init_us(self) -> int:
        return self.esb_onoff_init_cpu_us + self.esb_onoff_init_radio_us


@dataclass(frozen=True)
class CalibrationSet:
    version: str = CALIBRATION_VERSION
    power: PowerCalibration = field(default_factory=PowerCalibration)
    esb: EsbCalibration = field(default_factory=EsbCalibration)
    ble: BleCalibration = field(default_factory=BleCalibration)
    node: NodeCalibration = field(default_factory=NodeCalibration)

    def profile(self, protocol: Protocol) -> PowerProfile:
        """MCU power profile; the standby floor is protocol specific"""
        idle = self.esb.idle_mw if protocol is Protocol.ESB else self.ble.idle_mw
        return PowerProfile(
            system_off_mw=self.power.system_off_mw,
            idle_standby_mw=idle,
            cpu_active_mw=self.power.cpu_active_mw,
            radio_ramp_mw=self.power.radio_ramp_mw,
            radio_tx_mw=self.power.radio_tx_mw,
            radio_rx_mw=self.power.radio_rx_mw,
            sensor_read_mw=self.node.sensor_read_mw,
        )

    def sensor_profile(self) -> PowerProfile:
        """Sensor channel: IdleStandby is the sensor's continuous draw"""
        return PowerProfile(
            system_off_mw=self.power.system_off_mw,
            idle_standby_mw=self.node.sensor_idle_mw,
            cpu_active_mw=self.power.cpu_active_mw,
            radio_ramp_mw=self.power.radio_ramp_mw,
            radio_tx_mw=self.power.radio_tx_mw,
            radio_rx_mw=self.power.radio_rx_mw,
            sensor_read_mw=self.node.sensor_read_mw,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()[:12]

    def get(self, path: str) -> Union[int, float]:
        section, name = _split(path)
        return getattr(getattr(self, section), name)

    def with_value(self, path: str, value: Union[int, float]) -> 'CalibrationSet':
        section, name = _split(path)
        current = getattr(self, section)
        if not hasattr(current, name):
            raise SimError(f"Unknown calibration parameter: {path}", code=ErrorCode.NOT_FOUND)
        if isinstance(getattr(current, name), int):
            value = max(1, int(round(value)))
        return replace(self, **{section: replace(current, **{name: value})})

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'CalibrationSet':
        sections = {"power": PowerCalibration, "esb": EsbCalibration, "ble": BleCalibration, "node": NodeCalibration}
        unknown = set(data) - set(sections) - {"version"}
        if unknown:
            raise SimError(
                f"Unknown calibration sections: {', '.join(sorted(unknown))}",
                code=ErrorCode.INVALID_CONFIGURATION
            )
        kwargs: Dict[str, Any] = {"version": str(data.get("version", CALIBRATION_VERSION))}
        for key, section_cls in sections.items():
            values = data.get(key, {})
            names = {f.name for f in fields(section_cls)}
            extra = set(values) - names
            if extra:
                raise SimError(
                    f"Unknown keys in calibration section '{key}': {', '.join(sorted(extra))}",
                    code=ErrorCode.INVALID_CONFIGURATION
                )
            kwargs[key] = section_cls(**values)
        return cls(**kwargs)


def _split(path: str):
    section, _, name = path.partition(".")
    if section not in ("power", "esb", "ble", "node") or not name:
        raise SimError(f"Unknown calibration parameter: {path}", code=ErrorCode.NOT_FOUND)
    return section, name


DEFAULT_CALIBRATION = CalibrationSet()
