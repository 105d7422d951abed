"""
BLE link layer: advertising and connection set-up, connection events with
SN/NESN implicit acknowledgement, keep-alive empty PDUs and supervision timeout
"""
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional

from core.energy.calibration import DEFAULT_CALIBRATION, BleCalibration
from core.energy.power import PowerState, PowerTrace, average_power
from core.phy.channel import (
    ADV_IND_BYTES,
    BLE_ADV_OVERHEAD,
    BLE_DATA_OVERHEAD,
    BLE_EMPTY_OVERHEAD,
    BLE_MAX_APP_PAYLOAD,
    CONNECT_IND_BYTES,
    SCAN_REQ_BYTES,
    SCAN_RSP_BYTES,
    ChannelState,
    Delivery,
    Frame,
    FrameKind,
    FrameOverhead,
    PhyMode,
    deliver,
    on_air_time,
)
from core.sim.engine import SimEvent, Simulator
from core.sim.rng import RngStream
from core.utils.errors import ErrorCode, PayloadTooLarge, SimError
from core.utils.logger import get_logger

logger = get_logger(__name__)

PHASE_INIT = "Init"
PHASE_ADVERTISING = "Advertising"
PHASE_CONNECTION = "Connection"
PHASE_PACKET = "Packet"


@dataclass(frozen=True)
class BleConfig:
    phy: PhyMode = PhyMode.BLE_2M
    adv_phy: PhyMode = PhyMode.BLE_1M
    conn_interval_us: int = 7500
    adv_interval_us: int = 20000
    adv_jitter_max_us: int = 10000
    adv_pdus_per_event: int = 3
    scan_interval_us: int = 2500
    scan_window_us: int = 2500
    transmit_window_delay_us: int = 1250
    supervision_timeout_us: int = 4_000_000
    max_app_payload: int = BLE_MAX_APP_PAYLOAD
    tx_power_dbm: int = 8
    tx_queue_depth: int = 64
    data_overhead: FrameOverhead = BLE_DATA_OVERHEAD
    empty_overhead: FrameOverhead = BLE_EMPTY_OVERHEAD
    adv_overhead: FrameOverhead = BLE_ADV_OVERHEAD

    def __post_init__(self):
        if not self.phy.is_ble or not self.adv_phy.is_ble:
            raise SimError("BLE links need BLE PHY modes", code=ErrorCode.INVALID_CONFIGURATION)
        if self.conn_interval_us < 7500:
            raise SimError("conn_interval_us must be >= 7500", code=ErrorCode.INVALID_CONFIGURATION)
        if self.adv_interval_us < 20000:
            raise SimError("adv_interval_us must be >= 20000", code=ErrorCode.INVALID_CONFIGURATION)
        if not 0 < self.scan_window_us <= self.scan_interval_us:
            raise SimError("scan window must be in (0, scan_interval]", code=ErrorCode.INVALID_CONFIGURATION)
        if self.tx_queue_depth < 1 or self.adv_pdus_per_event < 1:
            raise SimError("queue depth and PDUs per event must be >= 1", code=ErrorCode.INVALID_CONFIGURATION)

    @property
    def ifs_us(self) -> int:
        return self.data_overhead.ifs_or_turnaround_us

    def data_air(self, payload_bytes: int) -> int:
        return on_air_time(self.phy, payload_bytes, self.data_overhead)

    def empty_air(self) -> int:
        return on_air_time(self.phy, 0, self.empty_overhead)

    def adv_air(self, pdu_bytes: int) -> int:
        return on_air_time(self.adv_phy, pdu_bytes, self.adv_overhead)


class LinkPhase(Enum):
    STANDBY = "Standby"
    ADVERTISING = "Advertising"
    INITIATING = "Initiating"
    CONNECTED = "Connected"


class Role(Enum):
    CENTRAL = "M"
    PERIPHERAL = "S"

    @property
    def peer(self) -> 'Role':
        return Role.PERIPHERAL if self is Role.CENTRAL else Role.CENTRAL


@dataclass
class QueuedPdu:
    payload_bytes: int
    enqueued_at: int
    ready_at: int
    tag: object = None


@dataclass(frozen=True)
class EnqueueReceipt:
    accepted: bool
    queue_depth: int
    ready_at: int


@dataclass
class ConnectionEventReport:
    anchor: int
    frames_m2s: int = 0
    frames_s2m: int = 0
    airtime_us: int = 0
    empty_pdu: bool = False
    closed_by_loss: bool = False
    end: int = 0


_EMPTY = QueuedPdu(payload_bytes=0, enqueued_at=0, ready_at=0, tag="empty")


class _Endpoint:
    """One side of the link: its queue and 1-bit sequence state"""

    def __init__(self, role: Role):
        self.role = role
        self.queue: Deque[QueuedPdu] = deque()
        self.sn = 0
        self.nesn = 0
        self.pending: Optional[QueuedPdu] = None
        self.last_heard = 0
        self.saturate_bytes: Optional[int] = None

    def has_data(self, t: int) -> bool:
        if self.pending is not None:
            return self.pending is not _EMPTY
        return bool(self.queue) and self.queue[0].ready_at <= t

    def more_data(self, t: int) -> bool:
        """MD bit: a ready PDU is queued behind the one in flight"""
        if self.pending is None or self.pending is _EMPTY:
            return bool(self.queue) and self.queue[0].ready_at <= t
        return len(self.queue) > 1 and self.queue[1].ready_at <= t

    def peek(self, t: int) -> QueuedPdu:
        """PDU that would go out at `t`; an unacked PDU is always resent unchanged"""
        if self.pending is not None:
            return self.pending
        if self.queue and self.queue[0].ready_at <= t:
            return self.queue[0]
        return _EMPTY

    def current(self, t: int) -> QueuedPdu:
        self.pending = self.peek(t)
        return self.pending

    def receive(self, sn: int, nesn: int, pdu: QueuedPdu) -> bool:
        """Apply a received PDU; returns True when it carries new data"""
        new_data = False
        if sn == self.nesn:
            self.nesn ^= 1
            new_data = pdu is not _EMPTY
        if nesn != self.sn:
            self.sn ^= 1
            if self.pending is not None and self.pending is not _EMPTY:
                self.queue.popleft()
            self.pending = None
        return new_data


class BleConnection:
    """Connected-state actor running both ends of one link"""

    def __init__(
        self,
        sim: Simulator,
        cfg: BleConfig,
        channel: ChannelState,
        calib: BleCalibration = DEFAULT_CALIBRATION.ble,
        trace: Optional[PowerTrace] = None,
        traced_role: Role = Role.CENTRAL,
        on_deliver: Optional[Callable[[Role, QueuedPdu, int], None]] = None,
        on_event_end: Optional[Callable[[ConnectionEventReport], None]] = None,
        ce_overhead_us: int = 0,
        data_tail_us: int = 0,
        name: str = "ble"
    ):
        self.sim = sim
        self.cfg = cfg
        self.channel = channel
        self.calib = calib
        self.trace = trace
        self.traced_role = traced_role
        self.on_deliver = on_deliver
        self.on_event_end = on_event_end
        self.ce_overhead_us = ce_overhead_us
        self.data_tail_us = data_tail_us
        self.name = name
        self.phase = LinkPhase.STANDBY
        self.next_ce_at: Optional[int] = None
        self.setup_events_remaining = 0
        self.data_phase: Optional[str] = None
        self.endpoints: Dict[Role, _Endpoint] = {Role.CENTRAL: _Endpoint(Role.CENTRAL),
                                                 Role.PERIPHERAL: _Endpoint(Role.PERIPHERAL)}
        self.reports: List[ConnectionEventReport] = []
        self.keep_reports = False
        self.events = 0
        self.delivered: Dict[Role, int] = {Role.CENTRAL: 0, Role.PERIPHERAL: 0}
        self.delivered_bytes: Dict[Role, int] = {Role.CENTRAL: 0, Role.PERIPHERAL: 0}

    @property
    def lead_us(self) -> int:
        """How long before the anchor the traced device starts working on a CE"""
        return self.ce_overhead_us + self.calib.ramp_us + self.calib.pre_cpu_us

    def start(self, anchor: int, setup_events: int = 0) -> None:
        if anchor - self.lead_us < self.sim.now:
            raise SimError("First anchor leaves no room for CE preparation", code=ErrorCode.SIMULATION_FAULT)
        self.phase = LinkPhase.CONNECTED
        self.setup_events_remaining = setup_events
        for ep in self.endpoints.values():
            ep.last_heard = anchor
        self._schedule_ce(anchor)

    def stop(self) -> None:
        self.phase = LinkPhase.STANDBY

    def saturate(self, role: Role, payload_bytes: int = BLE_MAX_APP_PAYLOAD) -> None:
        """Keep `role`'s queue full of ready PDUs (saturation experiments)"""
        self.endpoints[role].saturate_bytes = payload_bytes

    def notify(self, role: Role, payload_bytes: int, tag: object = None, stack_latency: bool = True) -> EnqueueReceipt:
        if payload_bytes > self.cfg.max_app_payload:
            raise PayloadTooLarge(
                f"BLE notification of {payload_bytes} B exceeds {self.cfg.max_app_payload} B",
                details={"payload_bytes": payload_bytes}
            )
        ep = self.endpoints[role]
        now = self.sim.now
        ready = now + (self.calib.stack_latency_us if stack_latency else 0)
        if len(ep.queue) >= self.cfg.tx_queue_depth:
            return EnqueueReceipt(False, len(ep.queue), ready)
        ep.queue.append(QueuedPdu(payload_bytes, now, ready, tag))
        return EnqueueReceipt(True, len(ep.queue), ready)

    def queue_depth(self, role: Role) -> int:
        return len(self.endpoints[role].queue)

    def _schedule_ce(self, anchor: int) -> None:
        self.next_ce_at = anchor
        self.sim.schedule(anchor - self.lead_us, self.name, "connection-event", self._on_ce, anchor)

    def _top_up(self, now: int) -> None:
        for ep in self.endpoints.values():
            if ep.saturate_bytes is not None:
                while len(ep.queue) < self.cfg.tx_queue_depth:
                    ep.queue.append(QueuedPdu(ep.saturate_bytes, now, now))

    def _on_ce(self, event: SimEvent) -> None:
        if self.phase is not LinkPhase.CONNECTED:
            return
        anchor = event.payload
        silent_for = anchor - min(ep.last_heard for ep in self.endpoints.values())
        if silent_for >= self.cfg.supervision_timeout_us:
            logger.debug(f"{self.name}: supervision timeout after {silent_for} us without a frame")
            self.phase = LinkPhase.STANDBY
            self.next_ce_at = None
            return
        self._top_up(event.fire_at)
        report = self.connection_event(anchor)
        self.events += 1
        if self.keep_reports:
            self.reports.append(report)
        if self.on_event_end is not None:
            self.on_event_end(report)
        if self.phase is LinkPhase.CONNECTED:
            self._schedule_ce(anchor + self.cfg.conn_interval_us)

    def connection_event(self, anchor: int) -> ConnectionEventReport:
        """Run one CE starting at `anchor`; writes the traced device's power states"""
        cfg = self.cfg
        m = self.endpoints[Role.CENTRAL]
        s = self.endpoints[Role.PERIPHERAL]
        me = self.endpoints[self.traced_role]
        report = ConnectionEventReport(anchor=anchor)
        report.empty_pdu = not m.queue and not s.queue and m.pending in (None, _EMPTY) and s.pending in (None, _EMPTY)
        # a peripheral PDU in flight is acked by the first central frame
        has_data = me.has_data(anchor) if self.traced_role is Role.CENTRAL else me.more_data(anchor)
        trace = self.trace
        phase = self.data_phase if (has_data and self.data_phase) else None

        if trace is not None:
            t = anchor - self.lead_us
            if has_data:
                t = trace.dwell(t, PowerState.CPU_ACTIVE, self.calib.pre_cpu_us, phase)
            else:
                t += self.calib.pre_cpu_us
            t = trace.dwell(t, PowerState.RADIO_RAMP, self.ce_overhead_us + self.calib.ramp_us, phase)

        budget_end = anchor + cfg.conn_interval_us - self.calib.ce_guard_us
        t = anchor
        sent_data = False
        first = True
        while True:
            m_pdu = m.peek(t)
            m_air = cfg.data_air(m_pdu.payload_bytes) if m_pdu is not _EMPTY else cfg.empty_air()
            s_next = s.peek(t)
            s_air_est = cfg.data_air(s_next.payload_bytes) if s_next is not _EMPTY else cfg.empty_air()
            if not first and t + m_air + cfg.ifs_us + s_air_est > budget_end:
                # a fresh PDU that no longer fits waits; an empty poll may still collect peripheral data
                poll_fits = t + cfg.empty_air() + cfg.ifs_us + s_air_est <= budget_end
                if m.pending is not None or m_pdu is _EMPTY or s_next is _EMPTY or not poll_fits:
                    break
                m_pdu, m_air = _EMPTY, cfg.empty_air()
            first = False
            m.pending = m_pdu

            # central -> peripheral
            self._radio(trace, t, Role.CENTRAL, m_air, phase)
            if m_pdu is not _EMPTY:
                report.frames_m2s += 1
                sent_data |= self.traced_role is Role.CENTRAL
            m_end = t + m_air
            m_frame = Frame(FrameKind.DATA if m_pdu is not _EMPTY else FrameKind.EMPTY, cfg.phy, m_pdu.payload_bytes,
                            cfg.data_overhead if m_pdu is not _EMPTY else cfg.empty_overhead)
            if deliver(m_frame, self.channel, m_end) is Delivery.LOST:
                report.closed_by_loss = True
                t = self._listen(trace, m_end, cfg.ifs_us + cfg.empty_air(), phase)
                break
            s.last_heard = m_end
            if s.receive(m.sn, m.nesn, m_pdu):
                self._delivered(Role.PERIPHERAL, m_pdu, m_end)

            # peripheral -> central
            s_start = m_end + cfg.ifs_us
            self._listen(trace, m_end, cfg.ifs_us, phase)
            s_pdu = s.current(s_start)
            s_air = cfg.data_air(s_pdu.payload_bytes) if s_pdu is not _EMPTY else cfg.empty_air()
            self._radio(trace, s_start, Role.PERIPHERAL, s_air, phase)
            if s_pdu is not _EMPTY:
                report.frames_s2m += 1
                sent_data |= self.traced_role is Role.PERIPHERAL
            s_end = s_start + s_air
            s_frame = Frame(FrameKind.DATA if s_pdu is not _EMPTY else FrameKind.EMPTY, cfg.phy, s_pdu.payload_bytes,
                            cfg.data_overhead if s_pdu is not _EMPTY else cfg.empty_overhead)
            t = s_end
            if deliver(s_frame, self.channel, s_end) is Delivery.LOST:
                report.closed_by_loss = True
                break
            m.last_heard = s_end
            if m.receive(s.sn, s.nesn, s_pdu):
                self._delivered(Role.CENTRAL, s_pdu, s_end)

            if not (m.has_data(t) or s.more_data(t)):
                break
            self._listen(trace, t, cfg.ifs_us, phase)
            t += cfg.ifs_us

        report.airtime_us = t - anchor
        end = t
        if trace is not None:
            if sent_data:
                end = trace.sequence(end, [(PowerState.RADIO_RAMP, self.data_tail_us),
                                           (PowerState.CPU_ACTIVE, self.calib.post_cpu_us)])
                if phase is not None:
                    # the packet event is over; later dwell falls back to the running phase
                    trace.enter(end, PowerState.IDLE_STANDBY, trace.phase)
            if self.setup_events_remaining > 0:
                end = trace.dwell(end, PowerState.CPU_ACTIVE, self.calib.conn_setup_cpu_us)
            trace.enter(end, PowerState.IDLE_STANDBY)
        elif sent_data:
            end += self.data_tail_us + self.calib.post_cpu_us
        if self.setup_events_remaining > 0:
            if trace is None:
                end += self.calib.conn_setup_cpu_us
            self.setup_events_remaining -= 1
        report.end = end
        return report

    def _radio(self, trace: Optional[PowerTrace], t: int, sender: Role, air: int, phase: Optional[str]) -> None:
        if trace is None:
            return
        state = PowerState.RADIO_TX if sender is self.traced_role else PowerState.RADIO_RX
        trace.dwell(t, state, air, phase)

    def _listen(self, trace: Optional[PowerTrace], t: int, duration: int, phase: Optional[str]) -> int:
        if trace is not None:
            trace.dwell(t, PowerState.RADIO_RX, duration, phase)
        return t + duration

    def _delivered(self, receiver: Role, pdu: QueuedPdu, frame_end: int) -> None:
        self.delivered[receiver] += 1
        self.delivered_bytes[receiver] += pdu.payload_bytes
        if self.on_deliver is not None:
            self.on_deliver(receiver, pdu, frame_end + self.calib.rx_processing_us)


def ble_notify(conn: BleConnection, payload_bytes: int, role: Role = Role.CENTRAL, tag: object = None) -> EnqueueReceipt:
    """Queue an application notification; requires a connected link"""
    if conn.phase is not LinkPhase.CONNECTED:
        raise SimError("ble_notify requires a connected link", code=ErrorCode.INVALID_INPUT)
    return conn.notify(role, payload_bytes, tag)


@dataclass
class ConnectResult:
    t_established_us: int
    first_anchor: int
    adv_events: int
    phase_energies_uj: Dict[str, float] = field(default_factory=dict)


class Advertiser:
    """Peripheral advertising with active scanning and a central that connects after a host delay"""

    def __init__(
        self,
        sim: Simulator,
        cfg: BleConfig,
        channel: ChannelState,
        rng: RngStream,
        calib: BleCalibration = DEFAULT_CALIBRATION.ble,
        trace: Optional[PowerTrace] = None,
        on_connected: Optional[Callable[[int, int], None]] = None,
        name: str = "adv"
    ):
        self.sim = sim
        self.cfg = cfg
        self.channel = channel
        self.rng = rng
        self.calib = calib
        self.trace = trace
        self.on_connected = on_connected
        self.name = name
        self.phase = LinkPhase.STANDBY
        self.events = 0
        self.discovered_at: Optional[int] = None
        self.connect_ind_end: Optional[int] = None

    def start(self, at: int) -> None:
        self.phase = LinkPhase.ADVERTISING
        self.sim.schedule(at, self.name, "adv-event", self._on_adv_event)

    def _scanner_listening(self, t: int) -> bool:
        return t % self.cfg.scan_interval_us < self.cfg.scan_window_us

    def _on_adv_event(self, event: SimEvent) -> None:
        cfg = self.cfg
        event_start = event.fire_at
        self.events += 1
        ready_to_connect = self.discovered_at is not None and event_start >= self.discovered_at + self.calib.connect_delay_us
        adv_air = cfg.adv_air(ADV_IND_BYTES)
        t = event_start
        for _ in range(cfg.adv_pdus_per_event):
            t = self._dwell(t, PowerState.RADIO_RAMP, self.calib.ramp_us)
            adv_end = self._dwell(t, PowerState.RADIO_TX, adv_air)
            heard = self._scanner_listening(t) and deliver(
                Frame(FrameKind.ADV, cfg.adv_phy, ADV_IND_BYTES, cfg.adv_overhead), self.channel, adv_end
            ) is Delivery.DELIVERED
            if heard and self.discovered_at is None:
                self.discovered_at = adv_end
            if heard and ready_to_connect:
                conn_end = self._dwell(adv_end, PowerState.RADIO_RX, cfg.ifs_us + cfg.adv_air(CONNECT_IND_BYTES))
                if deliver(Frame(FrameKind.CONTROL, cfg.adv_phy, CONNECT_IND_BYTES, cfg.adv_overhead),
                           self.channel, conn_end) is Delivery.DELIVERED:
                    self._connected(conn_end)
                    return
                t = conn_end
                continue
            scan_req_end = self._dwell(adv_end, PowerState.RADIO_RX, cfg.ifs_us + cfg.adv_air(SCAN_REQ_BYTES))
            t = scan_req_end
            if heard and deliver(Frame(FrameKind.CONTROL, cfg.adv_phy, SCAN_REQ_BYTES, cfg.adv_overhead),
                                 self.channel, scan_req_end) is Delivery.DELIVERED:
                t = self._dwell(t, PowerState.RADIO_RX, cfg.ifs_us)
                rsp_end = self._dwell(t, PowerState.RADIO_TX, cfg.adv_air(SCAN_RSP_BYTES))
                deliver(Frame(FrameKind.ADV, cfg.adv_phy, SCAN_RSP_BYTES, cfg.adv_overhead), self.channel, rsp_end)
                t = rsp_end
        if self.trace is not None:
            self.trace.enter(t, PowerState.IDLE_STANDBY)
        jitter = self.rng.integer(0, cfg.adv_jitter_max_us + 1) if cfg.adv_jitter_max_us else 0
        self.sim.schedule(event_start + cfg.adv_interval_us + jitter, self.name, "adv-event", self._on_adv_event)

    def _dwell(self, t: int, state: PowerState, duration: int) -> int:
        if self.trace is not None:
            return self.trace.dwell(t, state, duration)
        return t + duration

    def _connected(self, conn_end: int) -> None:
        self.phase = LinkPhase.CONNECTED
        self.connect_ind_end = conn_end
        if self.trace is not None:
            self.trace.set_phase(PHASE_CONNECTION, at=conn_end)
            self.trace.enter(conn_end, PowerState.IDLE_STANDBY)
        first_anchor = conn_end + self.cfg.transmit_window_delay_us
        if self.on_connected is not None:
            self.on_connected(conn_end, first_anchor)


def advertise_and_connect(
    cfg: BleConfig,
    channel: ChannelState,
    rng: RngStream,
    calib: BleCalibration = DEFAULT_CALIBRATION.ble,
    trace: Optional[PowerTrace] = None,
    sim: Optional[Simulator] = None,
    on_connected: Optional[Callable[[int, int], None]] = None
) -> Advertiser:
    """Schedule wake-up init and advertising on `sim` (Standby after wake at sim.now)"""
    sim = sim or Simulator()
    t0 = sim.now
    if trace is not None:
        trace.set_phase(PHASE_INIT, at=t0)
        init_end = trace.sequence(t0, [(PowerState.CPU_ACTIVE, calib.init_cpu_us),
                                       (PowerState.RADIO_RAMP, calib.init_radio_us)])
        trace.set_phase(PHASE_ADVERTISING, at=init_end)
    else:
        init_end = t0 + calib.init_cpu_us + calib.init_radio_us
    adv = Advertiser(sim, cfg, channel, rng, calib, trace, on_connected)
    adv.start(init_end)
    return adv


def connect(
    cfg: BleConfig,
    channel: ChannelState,
    rng: RngStream,
    calib: BleCalibration = DEFAULT_CALIBRATION.ble,
    trace: Optional[PowerTrace] = None
) -> ConnectResult:
    """Run wake -> advertising -> CONNECT_IND -> first connection event and report it"""
    sim = Simulator()
    result: Dict[str, int] = {}

    def connected(conn_end: int, first_anchor: int) -> None:
        result["anchor"] = first_anchor

    adv = advertise_and_connect(cfg, channel, rng, calib, trace, sim, connected)
    while "anchor" not in result:
        if sim.run(limit=1) == 0:
            break
    if "anchor" not in result:
        raise SimError("Advertising ended without a connection", code=ErrorCode.SIMULATION_FAULT)
    energies: Dict[str, float] = {}
    if trace is not None:
        trace.close(result["anchor"])
        energies = trace.phase_energies_uj()
    return ConnectResult(
        t_established_us=result["anchor"],
        first_anchor=result["anchor"],
        adv_events=adv.events,
        phase_energies_uj=energies,
    )


@dataclass
class BleStreamResult:
    duration_us: int
    forward_bytes: int = 0
    reverse_bytes: int = 0
    offered: int = 0
    rejected: int = 0
    events: int = 0
    avg_power_mw: float = 0.0

    @property
    def forward_kbps(self) -> float:
        return self.forward_bytes * 8 * 1000 / self.duration_us

    @property
    def reverse_kbps(self) -> float:
        return self.reverse_bytes * 8 * 1000 / self.duration_us


def ble_stream(
    cfg: BleConfig,
    channel: ChannelState,
    trace: PowerTrace,
    calib: BleCalibration = DEFAULT_CALIBRATION.ble,
    payload_bytes: int = BLE_MAX_APP_PAYLOAD,
    duration_us: int = 1_000_000,
    offered_kbps: Optional[float] = None,
    reverse_saturated: bool = False
) -> BleStreamResult:
    """Central -> peripheral stream on an established connection.

    offered_kbps=None saturates the forward direction; reverse_saturated keeps
    the peripheral's queue full.
    """
    sim = Simulator()
    result = BleStreamResult(duration_us=duration_us)

    def delivered(receiver: Role, pdu: QueuedPdu, at: int) -> None:
        if at > duration_us:
            return
        if receiver is Role.PERIPHERAL:
            result.forward_bytes += pdu.payload_bytes
        else:
            result.reverse_bytes += pdu.payload_bytes

    conn = BleConnection(sim, cfg, channel, calib, trace, Role.CENTRAL, on_deliver=delivered)
    conn.start(anchor=conn.lead_us)
    if offered_kbps is None:
        conn.saturate(Role.CENTRAL, payload_bytes)
    if reverse_saturated:
        conn.saturate(Role.PERIPHERAL, payload_bytes)

    if offered_kbps is not None and offered_kbps > 0:
        period = payload_bytes * 8 * 1000 / offered_kbps

        def arrive(event: SimEvent) -> None:
            k = event.payload
            result.offered += 1
            if not conn.notify(Role.CENTRAL, payload_bytes).accepted:
                result.rejected += 1
            nxt = int(round((k + 1) * period))
            if nxt < duration_us:
                sim.schedule(nxt, "app", "arrival", arrive, k + 1)

        sim.schedule(0, "app", "arrival", arrive, 0)

    sim.run_until(duration_us)
    trace.close(max(duration_us, trace.last_change))
    result.events = conn.events
    result.avg_power_mw = average_power(trace, 0, duration_us)
    return result


def ble_latency(
    payload_bytes: int,
    cfg: BleConfig,
    channel: ChannelState,
    rng: RngStream,
    calib: BleCalibration = DEFAULT_CALIBRATION.ble
) -> int:
    """Send request at a random phase of the connection interval to delivery at the peer (us)"""
    sim = Simulator()
    delivered: Dict[str, int] = {}

    def on_deliver(receiver: Role, pdu: QueuedPdu, at: int) -> None:
        if pdu.tag == "measured":
            delivered["at"] = at
            conn.stop()

    conn = BleConnection(sim, cfg, channel, calib, on_deliver=on_deliver)
    conn.start(anchor=conn.lead_us)
    sent_at = conn.lead_us + cfg.conn_interval_us + rng.integer(0, cfg.conn_interval_us)
    sim.schedule(sent_at, "app", "notify", lambda _e: conn.notify(Role.CENTRAL, payload_bytes, tag="measured"))
    sim.run_until(sent_at + cfg.supervision_timeout_us)
    if "at" not in delivered:
        raise SimError("Notification was never delivered", code=ErrorCode.SIMULATION_FAULT,
                       details={"payload_bytes": payload_bytes})
    return delivered["at"] - sent_at
