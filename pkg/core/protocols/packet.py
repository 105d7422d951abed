"""
One isolated application packet from an idle, connected radio
"""
from dataclasses import dataclass
from typing import Optional

from core.energy.calibration import DEFAULT_CALIBRATION, CalibrationSet, Protocol
from core.energy.power import PowerTrace, excess_energy
from core.phy.channel import ChannelState
from core.protocols.ble import BleConfig, BleConnection, Role
from core.protocols.esb import EsbConfig, ptx_transact
from core.sim.engine import Simulator
from core.utils.errors import ErrorCode, SimError


@dataclass
class PacketEvent:
    protocol: Protocol
    payload_bytes: int
    duration_us: int
    energy_uj: float
    peak_power_mw: float
    acked: bool
    trace: PowerTrace


def esb_packet_event(
    payload_bytes: int,
    cfg: EsbConfig,
    channel: ChannelState,
    calib: CalibrationSet = DEFAULT_CALIBRATION
) -> PacketEvent:
    """Pre-CPU, ramp, data, ACK and post-CPU of a single PTX transaction"""
    trace = PowerTrace(calib.profile(Protocol.ESB), name="esb-packet")
    result = ptx_transact(bytes(payload_bytes), cfg, channel, calib.esb, trace=trace)
    end = trace.last_change
    trace.close(end)
    return PacketEvent(
        protocol=Protocol.ESB,
        payload_bytes=payload_bytes,
        duration_us=end,
        energy_uj=excess_energy(trace, 0, end),
        peak_power_mw=trace.peak_power_mw(0, end),
        acked=result.acked,
        trace=trace,
    )


def ble_packet_event(
    payload_bytes: int,
    cfg: BleConfig,
    channel: ChannelState,
    calib: CalibrationSet = DEFAULT_CALIBRATION
) -> PacketEvent:
    """One connection event in which the central sends a single notification"""
    sim = Simulator()
    trace = PowerTrace(calib.profile(Protocol.BLE), name="ble-packet")
    conn = BleConnection(sim, cfg, channel, calib.ble, trace, Role.CENTRAL, name="ble-packet")
    conn.notify(Role.CENTRAL, payload_bytes, stack_latency=False)
    report = conn.connection_event(conn.lead_us)
    end = report.end
    trace.close(end)
    return PacketEvent(
        protocol=Protocol.BLE,
        payload_bytes=payload_bytes,
        duration_us=end,
        energy_uj=excess_energy(trace, 0, end),
        peak_power_mw=trace.peak_power_mw(0, end),
        acked=conn.delivered[Role.PERIPHERAL] == 1 and not report.closed_by_loss,
        trace=trace,
    )


def packet_event(
    protocol: Protocol,
    payload_bytes: int,
    channel: ChannelState,
    calib: CalibrationSet = DEFAULT_CALIBRATION,
    esb_cfg: Optional[EsbConfig] = None,
    ble_cfg: Optional[BleConfig] = None
) -> PacketEvent:
    if protocol is Protocol.ESB:
        return esb_packet_event(payload_bytes, esb_cfg or EsbConfig(), channel, calib)
    if protocol is Protocol.BLE:
        return ble_packet_event(payload_bytes, ble_cfg or BleConfig(), channel, calib)
    raise SimError(f"Unsupported protocol: {protocol}", code=ErrorCode.INVALID_INPUT)
