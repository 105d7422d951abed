"""
Sleep-to-first-packet warm-up for both links, labelled by phase
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

from core.energy.calibration import DEFAULT_CALIBRATION, CalibrationSet, Protocol
from core.energy.power import PowerState, PowerTrace, integrate
from core.phy.channel import BLE_MAX_APP_PAYLOAD, ChannelState
from core.protocols.ble import (
    PHASE_INIT,
    PHASE_PACKET,
    BleConfig,
    BleConnection,
    ConnectionEventReport,
    Role,
    advertise_and_connect,
)
from core.protocols.esb import EsbConfig, EsbPrx, EsbPtx
from core.sim.engine import Simulator
from core.sim.rng import RngStream
from core.utils.errors import ErrorCode, SimError


@dataclass
class WarmupResult:
    protocol: Protocol
    duration_us: int
    energy_uj: float
    phase_energies_uj: Dict[str, float] = field(default_factory=dict)
    adv_events: int = 0


def esb_warmup(
    cfg: EsbConfig,
    channel: ChannelState,
    calib: CalibrationSet = DEFAULT_CALIBRATION,
    payload_bytes: int = BLE_MAX_APP_PAYLOAD
) -> WarmupResult:
    """Wake, initialise the radio, then run the first acknowledged packet"""
    trace = PowerTrace(calib.profile(Protocol.ESB), phase=PHASE_INIT, name="esb-warmup")
    init_end = trace.sequence(0, [(PowerState.CPU_ACTIVE, calib.esb.init_cpu_us),
                                  (PowerState.RADIO_RAMP, calib.esb.init_radio_us)])
    trace.set_phase(PHASE_PACKET, at=init_end)

    sim = Simulator()
    prx = EsbPrx(cfg, rx_processing_us=calib.esb.rx_processing_us)
    ptx = EsbPtx(sim, cfg, channel, prx, calib.esb, trace, name="esb-warmup")
    done: Dict[str, int] = {}
    sim.schedule(init_end, "app", "first-packet",
                 lambda _e: ptx.send(bytes(payload_bytes), lambda _r: done.setdefault("end", sim.now)))
    sim.run()
    if "end" not in done:
        raise SimError("ESB warm-up never released the radio", code=ErrorCode.SIMULATION_FAULT)
    end = done["end"]
    trace.close(end)
    return WarmupResult(
        protocol=Protocol.ESB,
        duration_us=end,
        energy_uj=integrate(trace, 0, end),
        phase_energies_uj=trace.phase_energies_uj(),
    )


def ble_warmup(
    cfg: BleConfig,
    channel: ChannelState,
    rng: RngStream,
    calib: CalibrationSet = DEFAULT_CALIBRATION,
    payload_bytes: int = BLE_MAX_APP_PAYLOAD,
    max_duration_us: int = 10_000_000
) -> WarmupResult:
    """Wake, advertise, connect, run the set-up events, then send the first notification.

    The traced device is the peripheral.
    """
    trace = PowerTrace(calib.profile(Protocol.BLE), name="ble-warmup")
    sim = Simulator()
    done: Dict[str, int] = {}
    conn = BleConnection(sim, cfg, channel, calib.ble, trace, traced_role=Role.PERIPHERAL, name="ble-warmup")
    conn.data_phase = PHASE_PACKET

    def connected(conn_end: int, first_anchor: int) -> None:
        conn.start(first_anchor, setup_events=calib.ble.conn_setup_events)

    def event_end(report: ConnectionEventReport) -> None:
        if report.frames_s2m:
            done["end"] = report.end
            conn.stop()
        elif conn.setup_events_remaining == 0 and conn.queue_depth(Role.PERIPHERAL) == 0:
            conn.notify(Role.PERIPHERAL, payload_bytes, stack_latency=False)

    conn.on_event_end = event_end
    adv = advertise_and_connect(cfg, channel, rng, calib.ble, trace, sim, connected)
    while "end" not in done and sim.now <= max_duration_us:
        if sim.run(limit=1) == 0:
            break
    if "end" not in done:
        raise SimError(
            "BLE warm-up did not reach the first packet",
            code=ErrorCode.SIMULATION_FAULT,
            details={"adv_events": adv.events, "now": sim.now}
        )
    end = done["end"]
    trace.close(end)
    return WarmupResult(
        protocol=Protocol.BLE,
        duration_us=end,
        energy_uj=integrate(trace, 0, end),
        phase_energies_uj=trace.phase_energies_uj(),
        adv_events=adv.events,
    )


def warmup(
    protocol: Protocol,
    channel: ChannelState,
    rng: Optional[RngStream] = None,
    calib: CalibrationSet = DEFAULT_CALIBRATION,
    esb_cfg: Optional[EsbConfig] = None,
    ble_cfg: Optional[BleConfig] = None
) -> WarmupResult:
    if protocol is Protocol.ESB:
        return esb_warmup(esb_cfg or EsbConfig(), channel, calib)
    if rng is None:
        raise SimError("BLE warm-up needs a random stream for advertising jitter", code=ErrorCode.INVALID_INPUT)
    return ble_warmup(ble_cfg or BleConfig(), channel, rng, calib)
