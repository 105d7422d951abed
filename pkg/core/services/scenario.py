"""
Scenario files: load a --config JSON and turn it into link/node configurations
"""
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import ValidationError

from config.settings import OverheadSection, ScenarioFile
from core.energy.calibration import CalibrationSet
from core.node.node import CommMode
from core.phy.channel import (
    BLE_DATA_OVERHEAD,
    BLE_EMPTY_OVERHEAD,
    DEFAULT_PER_CURVES,
    ESB_OVERHEAD,
    FrameOverhead,
    PerCurve,
    PhyMode,
)
from core.protocols.ble import BleConfig
from core.protocols.esb import EsbConfig
from core.utils.errors import SimError, SpecError
from core.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_PAYLOADS = [2, 12, 66, 132, 198, 244]
DEFAULT_RATE_FRACTIONS = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
DEFAULT_RSSI_DBM = [-95.0, -92.0, -90.0, -88.0, -85.0, -82.0, -80.0, -78.0, -75.0, -72.0, -70.0,
                    -65.0, -60.0, -50.0, -40.0, -30.0]
DEFAULT_ACK_SIZES = [2, 132, 252]
DEFAULT_THRESHOLDS = list(range(1, 33))
DEFAULT_MODES = [CommMode.BLE_CONNECTION, CommMode.ESB_STANDBY, CommMode.ESB_ONOFF]
DEFAULT_RSSI = -40.0
DEFAULT_CYCLE_PERIOD_S = 10.0


@dataclass
class ScenarioContext:
    """Everything an experiment needs besides its sweep"""
    esb: EsbConfig = field(default_factory=EsbConfig)
    ble: BleConfig = field(default_factory=BleConfig)
    per_curves: Dict[PhyMode, PerCurve] = field(default_factory=lambda: dict(DEFAULT_PER_CURVES))
    rssi_dbm: float = DEFAULT_RSSI
    payloads: List[int] = field(default_factory=lambda: list(DEFAULT_PAYLOADS))
    rate_fractions: List[float] = field(default_factory=lambda: list(DEFAULT_RATE_FRACTIONS))
    rssi_sweep: List[float] = field(default_factory=lambda: list(DEFAULT_RSSI_DBM))
    ack_sizes: List[int] = field(default_factory=lambda: list(DEFAULT_ACK_SIZES))
    thresholds: List[int] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    modes: List[CommMode] = field(default_factory=lambda: list(DEFAULT_MODES))
    node_duration_s: Optional[float] = None
    node_sample_rate_hz: int = 128
    node_word_bytes: int = 3
    stream_duration_s: Optional[float] = None
    cycle_period_s: float = DEFAULT_CYCLE_PERIOD_S


def load_scenario_file(path: Optional[str]) -> ScenarioFile:
    if path is None:
        return ScenarioFile()
    p = Path(path)
    if not p.exists():
        raise SpecError(f"Scenario file not found: {p}", details={"path": str(p)})
    try:
        with p.open("r", encoding="utf-8") as fh:
            return ScenarioFile.model_validate(json.load(fh))
    except json.JSONDecodeError as e:
        raise SpecError(f"{p} is not valid JSON: {e}") from e
    except ValidationError as e:
        raise SpecError(f"Invalid scenario file {p}: {e}", details={"errors": e.errors(include_url=False)}) from e


def _overhead(base: FrameOverhead, section: Optional[OverheadSection]) -> FrameOverhead:
    if section is None:
        return base
    return replace(base, **section.model_dump(exclude_none=True))


def _phy(label: Optional[str], default: PhyMode) -> PhyMode:
    return default if label is None else PhyMode.from_label(label)


def build_context(scenario: ScenarioFile, calib: CalibrationSet) -> tuple:
    """Returns (ScenarioContext, CalibrationSet); scenario keys that live in the calibration set override it"""
    try:
        esb_overhead = _overhead(ESB_OVERHEAD, scenario.phy.esb_overhead)
        esb_kwargs = scenario.esb.model_dump(exclude_none=True)
        esb_kwargs["phy"] = _phy(esb_kwargs.pop("phy", None), PhyMode.ESB_4M)
        esb = EsbConfig(overhead=esb_overhead, **esb_kwargs)

        ble_kwargs = scenario.ble.model_dump(exclude_none=True)
        guard = ble_kwargs.pop("ce_guard_us", None)
        ble_kwargs["phy"] = _phy(ble_kwargs.pop("phy", None), PhyMode.BLE_2M)
        ble_data = _overhead(BLE_DATA_OVERHEAD, scenario.phy.ble_overhead)
        ble_empty = _overhead(BLE_EMPTY_OVERHEAD, scenario.phy.ble_overhead)
        if scenario.phy.ble_overhead is not None:
            ble_empty = replace(ble_empty, upper_stack_bytes=0)
        ble = BleConfig(data_overhead=ble_data, empty_overhead=ble_empty, **ble_kwargs)
        if guard is not None:
            calib = calib.with_value("ble.ce_guard_us", guard)

        curves = dict(DEFAULT_PER_CURVES)
        for label, curve in scenario.phy.per_curves.items():
            curves[PhyMode.from_label(label)] = PerCurve(curve.rssi50_dbm, curve.width_db)
    except SimError as e:
        raise SpecError(f"Invalid scenario: {e.message}", details=e.details) from e

    ctx = ScenarioContext(esb=esb, ble=ble, per_curves=curves)
    if scenario.rssi_dbm is not None:
        ctx.rssi_dbm = scenario.rssi_dbm
    sweep = scenario.sweep
    if sweep.payloads is not None:
        ctx.payloads = list(sweep.payloads)
    if sweep.rate_fractions is not None:
        if any(not 0.0 <= f <= 1.0 for f in sweep.rate_fractions):
            raise SpecError("rate_fractions must lie in [0, 1]")
        ctx.rate_fractions = list(sweep.rate_fractions)
    if sweep.rssi_dbm is not None:
        ctx.rssi_sweep = list(sweep.rssi_dbm)
    if sweep.ack_sizes is not None:
        ctx.ack_sizes = list(sweep.ack_sizes)
    if sweep.thresholds is not None:
        ctx.thresholds = list(sweep.thresholds)
    if sweep.modes is not None:
        ctx.modes = [CommMode.parse(m) for m in sweep.modes]
    if sweep.stream_duration_s is not None:
        ctx.stream_duration_s = sweep.stream_duration_s
    if sweep.cycle_period_s is not None:
        ctx.cycle_period_s = sweep.cycle_period_s

    node = scenario.node
    if node.mode is not None:
        ctx.modes = [CommMode.parse(node.mode)]
    if node.threshold is not None:
        ctx.thresholds = [node.threshold]
    if node.duration_s is not None:
        ctx.node_duration_s = node.duration_s
    if node.sample_rate_hz is not None:
        ctx.node_sample_rate_hz = node.sample_rate_hz
    if node.word_bytes is not None:
        ctx.node_word_bytes = node.word_bytes
    return ctx, calib
