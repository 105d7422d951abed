"""
Enhanced ShockBurst link: PTX/PRX state machines with ACK payloads,
PID de-duplication and fixed-delay automatic retransmission
"""
import binascii
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, List, Optional

from core.energy.calibration import DEFAULT_CALIBRATION, EsbCalibration
from core.energy.power import PowerState, PowerTrace
from core.phy.channel import (
    ESB_MAX_PAYLOAD,
    ESB_OVERHEAD,
    ChannelState,
    Delivery,
    Frame,
    FrameKind,
    FrameOverhead,
    PhyMode,
    deliver,
    on_air_time,
)
from core.sim.engine import EventHandle, SimEvent, Simulator
from core.utils.errors import ErrorCode, PayloadTooLarge, QueueFull, SimError
from core.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_ADDRESS = bytes.fromhex("e7e7e7e7e7")


@dataclass(frozen=True)
class EsbConfig:
    phy: PhyMode = PhyMode.ESB_4M
    ard_us: int = 600
    arc: int = 15
    tx_power_dbm: int = 8
    turnaround_us: int = 40
    ack_payload_max: int = 32
    ack_queue_depth: int = 3
    overhead: FrameOverhead = ESB_OVERHEAD

    def __post_init__(self):
        if self.phy.is_ble:
            raise SimError(f"{self.phy.label} is not an ESB PHY", code=ErrorCode.INVALID_CONFIGURATION)
        if not 0 <= self.arc <= 15:
            raise SimError("arc must be in [0, 15]", code=ErrorCode.INVALID_CONFIGURATION)
        if self.ack_queue_depth < 1:
            raise SimError("ack_queue_depth must be >= 1", code=ErrorCode.INVALID_CONFIGURATION)
        if not 0 <= self.ack_payload_max <= ESB_MAX_PAYLOAD:
            raise SimError("ack_payload_max must be in [0, 252]", code=ErrorCode.INVALID_CONFIGURATION)
        max_ack = on_air_time(self.phy, self.ack_payload_max, self.overhead)
        if self.ard_us < max_ack:
            raise SimError(
                f"ard_us={self.ard_us} is shorter than a maximal ACK ({max_ack} us)",
                code=ErrorCode.INVALID_CONFIGURATION,
                details={"ard_us": self.ard_us, "max_ack_us": max_ack}
            )

    def air_us(self, payload_bytes: int) -> int:
        return on_air_time(self.phy, payload_bytes, self.overhead)

    def attempt_window(self, payload_bytes: int) -> int:
        """Data frame, turnaround and the longest ACK the PTX may have to listen to"""
        return self.air_us(payload_bytes) + self.turnaround_us + self.air_us(self.ack_payload_max)

    def retransmit_interval(self, payload_bytes: int) -> int:
        return max(self.ard_us, self.attempt_window(payload_bytes))


@dataclass(frozen=True)
class EsbPacket:
    payload: bytes
    pid: int = 0
    address: bytes = DEFAULT_ADDRESS
    no_ack: bool = False

    def __post_init__(self):
        if len(self.payload) > ESB_MAX_PAYLOAD:
            raise PayloadTooLarge(
                f"ESB payload of {len(self.payload)} B exceeds {ESB_MAX_PAYLOAD} B",
                details={"payload_bytes": len(self.payload)}
            )
        if not 0 <= self.pid <= 3:
            raise SimError("pid is a 2-bit counter", code=ErrorCode.INVALID_INPUT)

    @property
    def crc(self) -> int:
        return binascii.crc_hqx(self.address + self.payload, 0xFFFF)


@dataclass
class TransactionResult:
    acked: bool
    attempts: int
    duration_us: int
    ack_payload: bytes = b""
    tx_start: int = 0
    completed_at: int = 0
    delivered_at: Optional[int] = None


class RxOutcome:
    DELIVER_TO_APP = "DeliverToApp"
    DUPLICATE_DISCARDED = "DuplicateDiscarded"


class EsbPrx:
    """Receiver: de-duplicates on (pid, crc) and answers every frame with an ACK"""

    def __init__(
        self,
        cfg: EsbConfig,
        rx_processing_us: int = DEFAULT_CALIBRATION.esb.rx_processing_us,
        address: bytes = DEFAULT_ADDRESS,
        on_deliver: Optional[Callable[[bytes, int], None]] = None,
        ack_source: Optional[Callable[[], bytes]] = None
    ):
        self.cfg = cfg
        self.rx_processing_us = rx_processing_us
        self.address = address
        self.on_deliver = on_deliver
        self.ack_source = ack_source
        self._ack_queue: Deque[bytes] = deque()
        self._last_key = None
        self.delivered = 0
        self.delivered_bytes = 0
        self.duplicates = 0
        self.ack_queue_rejected = 0
        self.ack_payloads_sent = 0
        self.ack_bytes_sent = 0

    @property
    def ack_queue_depth(self) -> int:
        return len(self._ack_queue)

    def queue_ack_payload(self, payload: bytes) -> int:
        if len(payload) > self.cfg.ack_payload_max:
            raise PayloadTooLarge(
                f"ACK payload of {len(payload)} B exceeds ack_payload_max={self.cfg.ack_payload_max}",
                details={"payload_bytes": len(payload), "max": self.cfg.ack_payload_max}
            )
        if len(self._ack_queue) >= self.cfg.ack_queue_depth:
            self._ack_queue.popleft()
            self.ack_queue_rejected += 1
            logger.debug("ACK payload queue full, oldest entry evicted")
        self._ack_queue.append(payload)
        return len(self._ack_queue)

    def receive(self, packet: EsbPacket, at: int) -> str:
        if packet.address != self.address:
            raise SimError("Frame address does not match the PRX pipe", code=ErrorCode.INVALID_INPUT)
        key = (packet.pid, packet.crc)
        if key == self._last_key:
            self.duplicates += 1
            return RxOutcome.DUPLICATE_DISCARDED
        self._last_key = key
        self.delivered += 1
        self.delivered_bytes += len(packet.payload)
        if self.on_deliver is not None:
            self.on_deliver(packet.payload, at + self.rx_processing_us)
        return RxOutcome.DELIVER_TO_APP

    def next_ack_payload(self) -> bytes:
        if not self._ack_queue and self.ack_source is not None:
            self.queue_ack_payload(self.ack_source())
        payload = self._ack_queue.popleft() if self._ack_queue else b""
        if payload:
            self.ack_payloads_sent += 1
            self.ack_bytes_sent += len(payload)
        return payload


class EsbPtx:
    """Transmitter actor driven by the simulator clock"""

    def __init__(
        self,
        sim: Simulator,
        cfg: EsbConfig,
        channel: ChannelState,
        prx: EsbPrx,
        calib: EsbCalibration = DEFAULT_CALIBRATION.esb,
        trace: Optional[PowerTrace] = None,
        name: str = "ptx",
        radio_hold_us: int = 0
    ):
        self.sim = sim
        self.cfg = cfg
        self.channel = channel
        self.prx = prx
        self.calib = calib
        self.trace = trace
        self.name = name
        self.radio_hold_us = radio_hold_us
        self.pid = 0
        self.busy = False
        self.ack_payloads_received = 0
        self.ack_bytes_received = 0
        self.transactions: List[TransactionResult] = []
        self._packet: Optional[EsbPacket] = None
        self._attempts = 0
        self._first_tx = 0
        self._tx_start = 0
        self._timer: Optional[EventHandle] = None
        self._ack_pending: Optional[EventHandle] = None
        self._txn = 0
        self._open = False
        self._continuous = False
        self._delivered_at: Optional[int] = None
        self._on_done: Optional[Callable[[TransactionResult], None]] = None

    def send(
        self,
        payload: bytes,
        on_done: Optional[Callable[[TransactionResult], None]] = None,
        continuous: bool = False
    ) -> int:
        """Start a transaction now; returns the scheduled transmit start"""
        if self.busy:
            raise QueueFull(f"{self.name} is busy with PID {self._packet.pid}", details={"queue_depth": 1})
        packet = EsbPacket(payload=payload, pid=self.pid, address=self.prx.address)
        self.pid = (self.pid + 1) % 4
        self.busy = True
        self._packet = packet
        self._txn += 1
        self._open = True
        self._attempts = 0
        self._continuous = continuous
        self._delivered_at = None
        self._on_done = on_done

        now = self.sim.now
        if continuous:
            steps = [(PowerState.RADIO_RAMP, self.calib.stream_rearm_us)]
        else:
            steps = [(PowerState.CPU_ACTIVE, self.calib.pre_cpu_us), (PowerState.RADIO_RAMP, self.calib.ramp_us)]
        tx_start = now + sum(d for _, d in steps)
        if self.trace is not None:
            self.trace.sequence(now, steps)
        self.sim.schedule(tx_start, self.name, "tx-start", self._start_attempt)
        return tx_start

    def _start_attempt(self, event: SimEvent) -> None:
        now = event.fire_at
        self._attempts += 1
        if self._attempts == 1:
            self._first_tx = now
        self._tx_start = now
        size = len(self._packet.payload)
        air = self.cfg.air_us(size)
        if self.trace is not None:
            self.trace.enter(now, PowerState.RADIO_TX)
            self.trace.dwell(now + air, PowerState.RADIO_RX, self.cfg.turnaround_us + self.cfg.air_us(self.cfg.ack_payload_max))
        self._ack_pending = None
        self.sim.schedule(now + air, self.name, "data-end", self._on_data_end, self._token)
        if self._attempts < 1 + self.cfg.arc:
            self._timer = self.sim.schedule(now + self.cfg.retransmit_interval(size), self.name, "retransmit", self._on_timeout)
        else:
            self._timer = self.sim.schedule(now + self.cfg.attempt_window(size), self.name, "final-timeout", self._on_timeout)

    @property
    def _token(self):
        return self._txn, self._attempts

    def _stale(self, token) -> bool:
        return not self._open or token != self._token

    def _on_data_end(self, event: SimEvent) -> None:
        if self._stale(event.payload):
            return
        frame = Frame(FrameKind.DATA, self.cfg.phy, len(self._packet.payload), self.cfg.overhead)
        if deliver(frame, self.channel, event.fire_at) is Delivery.LOST:
            return
        outcome = self.prx.receive(self._packet, event.fire_at)
        if outcome == RxOutcome.DELIVER_TO_APP:
            self._delivered_at = event.fire_at + self.prx.rx_processing_us
        ack_payload = self.prx.next_ack_payload()
        ack_end = event.fire_at + self.cfg.turnaround_us + self.cfg.air_us(len(ack_payload))
        self._ack_pending = self.sim.schedule(ack_end, self.name, "ack-end", self._on_ack_end,
                                              (self._token, ack_payload))

    def _on_ack_end(self, event: SimEvent) -> None:
        token, ack_payload = event.payload
        if self._stale(token):
            return
        self._ack_pending = None
        frame = Frame(FrameKind.ACK, self.cfg.phy, len(ack_payload), self.cfg.overhead)
        if deliver(frame, self.channel, event.fire_at) is Delivery.LOST:
            # ACKs are never retransmitted; a piggybacked payload is gone
            return
        if self._timer is not None:
            self._timer.cancel()
        if ack_payload:
            self.ack_payloads_received += 1
            self.ack_bytes_received += len(ack_payload)
        self._finish(event.fire_at, True, ack_payload)

    def _on_timeout(self, event: SimEvent) -> None:
        now = event.fire_at
        if self._ack_pending is not None and self._ack_pending.active:
            # an ACK ending on the timeout instant is still in time
            self._timer = self.sim.schedule(now, self.name, event.kind, self._on_timeout)
            return
        if self._attempts >= 1 + self.cfg.arc:
            self._finish(now, False, b"")
            return
        if self.trace is not None:
            window_end = self._tx_start + self.cfg.attempt_window(len(self._packet.payload))
            if window_end < now:
                self.trace.enter(window_end, PowerState.RADIO_RAMP)
        self._start_attempt(event)

    def _finish(self, now: int, acked: bool, ack_payload: bytes) -> None:
        result = TransactionResult(
            acked=acked,
            attempts=self._attempts,
            duration_us=now - self._first_tx,
            ack_payload=ack_payload,
            tx_start=self._first_tx,
            completed_at=now,
            delivered_at=self._delivered_at,
        )
        self.transactions.append(result)
        self._open = False
        self._timer = None
        self._ack_pending = None
        if not acked:
            logger.debug(f"{self.name}: retransmit count exhausted after {result.attempts} attempts")
        release = now
        if self.trace is not None:
            if self._continuous:
                self.trace.enter(now, PowerState.IDLE_STANDBY)
            else:
                release = self.trace.sequence(now, [(PowerState.RADIO_RAMP, self.radio_hold_us),
                                                    (PowerState.CPU_ACTIVE, self.calib.post_cpu_us)])
                self.trace.enter(release, PowerState.IDLE_STANDBY)
        elif not self._continuous:
            release = now + self.radio_hold_us + self.calib.post_cpu_us
        if release == now:
            self._release(result)
        else:
            self.sim.schedule(release, self.name, "release", lambda _e: self._release(result))

    def _release(self, result: TransactionResult) -> None:
        self.busy = False
        if self._on_done is not None:
            self._on_done(result)


def _run_single(payload: bytes, cfg: EsbConfig, channel: ChannelState,
                calib: EsbCalibration, prx: Optional[EsbPrx], trace: Optional[PowerTrace]):
    sim = Simulator()
    prx = prx or EsbPrx(cfg, rx_processing_us=calib.rx_processing_us)
    ptx = EsbPtx(sim, cfg, channel, prx, calib, trace)
    ptx.send(payload)
    sim.run()
    return ptx.transactions[-1]


def ptx_transact(
    payload: bytes,
    cfg: EsbConfig,
    channel: ChannelState,
    calib: EsbCalibration = DEFAULT_CALIBRATION.esb,
    prx: Optional[EsbPrx] = None,
    trace: Optional[PowerTrace] = None
) -> TransactionResult:
    """One isolated transaction from an idle PTX"""
    if len(payload) > ESB_MAX_PAYLOAD:
        raise PayloadTooLarge(f"ESB payload of {len(payload)} B exceeds {ESB_MAX_PAYLOAD} B")
    return _run_single(payload, cfg, channel, calib, prx, trace)


def esb_latency(
    payload_bytes: int,
    cfg: EsbConfig,
    channel: ChannelState,
    calib: EsbCalibration = DEFAULT_CALIBRATION.esb
) -> int:
    """Application send request at the PTX to application delivery at the PRX (us)"""
    result = ptx_transact(bytes(payload_bytes), cfg, channel, calib)
    if result.delivered_at is None:
        raise SimError("Packet was never delivered", code=ErrorCode.SIMULATION_FAULT,
                       details={"attempts": result.attempts})
    return result.delivered_at


@dataclass
class StreamResult:
    duration_us: int
    packets_offered: int = 0
    transactions: int = 0
    packets_acked: int = 0
    forward_bytes: int = 0
    reverse_bytes_sent: int = 0
    reverse_bytes: int = 0
    avg_power_mw: float = 0.0
    latencies_us: List[int] = field(default_factory=list)

    @property
    def forward_kbps(self) -> float:
        return self.forward_bytes * 8 * 1000 / self.duration_us

    @property
    def reverse_kbps(self) -> float:
        return self.reverse_bytes * 8 * 1000 / self.duration_us


def esb_stream(
    cfg: EsbConfig,
    channel: ChannelState,
    trace: PowerTrace,
    calib: EsbCalibration = DEFAULT_CALIBRATION.esb,
    payload_bytes: int = ESB_MAX_PAYLOAD,
    duration_us: int = 1_000_000,
    offered_kbps: Optional[float] = None,
    ack_bytes: int = 0
) -> StreamResult:
    """Continuous PTX->PRX stream.

    offered_kbps=None saturates the forward direction; ack_bytes > 0 keeps the
    PRX ACK-payload queue full so the reverse direction is saturated.
    """
    from core.energy.power import average_power

    sim = Simulator()
    reverse = bytes(ack_bytes)
    prx = EsbPrx(cfg, rx_processing_us=calib.rx_processing_us,
                 ack_source=(lambda: reverse) if ack_bytes else None)
    ptx = EsbPtx(sim, cfg, channel, prx, calib, trace)
    result = StreamResult(duration_us=duration_us)
    payload = bytes(payload_bytes)
    backlog: Deque[int] = deque()

    def kick() -> None:
        if ptx.busy or sim.now >= duration_us:
            return
        if offered_kbps is None:
            ptx.send(payload, on_done, continuous=True)
        elif backlog:
            backlog.popleft()
            ptx.send(payload, on_done, continuous=True)

    def on_done(tx: TransactionResult) -> None:
        result.transactions += 1
        if tx.acked:
            result.packets_acked += 1
        kick()

    if offered_kbps is not None and offered_kbps > 0:
        period = payload_bytes * 8 * 1000 / offered_kbps

        def arrive(event: SimEvent) -> None:
            k = event.payload
            result.packets_offered += 1
            backlog.append(event.fire_at)
            kick()
            nxt = int(round((k + 1) * period))
            if nxt < duration_us:
                sim.schedule(nxt, "app", "arrival", arrive, k + 1)

        sim.schedule(0, "app", "arrival", arrive, 0)
    elif offered_kbps is None:
        sim.schedule(0, "app", "start", lambda _e: kick())

    def count_delivery(data: bytes, at: int) -> None:
        if at <= duration_us:
            result.forward_bytes += len(data)

    prx.on_deliver = count_delivery
    sim.run_until(duration_us)
    trace.close(max(duration_us, trace.last_change))
    result.reverse_bytes_sent = prx.ack_bytes_sent
    result.reverse_bytes = ptx.ack_bytes_received
    result.avg_power_mw = average_power(trace, 0, duration_us)
    return result
