"""
On-demand loop-recorder node: a 128 Hz sampler fills the sensor FIFO, the
threshold interrupt wakes the MCU and one of the communication pipelines
moves the burst to the peer.

The MCU and the sensor are traced separately, like two independently
powered supply rails.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

from core.energy.calibration import DEFAULT_CALIBRATION, CalibrationSet, Protocol
from core.energy.power import PowerState, PowerTrace, average_power
from core.node.fifo import FifoBuffer, StepOutcome
from core.phy.channel import ChannelState
from core.protocols.ble import (
    BleConfig,
    BleConnection,
    ConnectionEventReport,
    QueuedPdu,
    Role,
    advertise_and_connect,
)
from core.protocols.esb import EsbConfig, EsbPrx, EsbPtx, TransactionResult
from core.sim.engine import US_PER_S, SimEvent, Simulator
from core.sim.rng import RngFactory, SamplePeriod
from core.utils.errors import ConfigurationRejected, ErrorCode, SimError
from core.utils.logger import get_logger

logger = get_logger(__name__)

PHASE_IDLE = "Idle"
PHASE_SLEEP = "Sleep"
PHASE_READ = "Read"
PHASE_TRANSMIT = "Transmit"
PHASE_WAKE = "Wake"
PHASE_TEARDOWN = "Teardown"

ESB_ONOFF_MIN_THRESHOLD = 3
ESB_ONOFF_MAX_THRESHOLD = 31


class CommMode(Enum):
    BLE_CONNECTION = "BleConnection"
    ESB_STANDBY = "EsbStandby"
    ESB_ONOFF = "EsbOnOff"
    BLE_ONOFF = "BleOnOff"

    @property
    def protocol(self) -> Protocol:
        return Protocol.BLE if self in (CommMode.BLE_CONNECTION, CommMode.BLE_ONOFF) else Protocol.ESB

    @property
    def sleeps(self) -> bool:
        """MCU returns to SystemOff between bursts"""
        return self in (CommMode.ESB_ONOFF, CommMode.BLE_ONOFF)

    @classmethod
    def parse(cls, value: str) -> 'CommMode':
        key = value.replace("-", "").replace("_", "").lower()
        for mode in cls:
            if mode.value.lower() == key:
                return mode
        raise SimError(f"Unknown communication mode: {value}", code=ErrorCode.INVALID_INPUT)


@dataclass(frozen=True)
class NodeScenario:
    mode: CommMode
    threshold: int
    duration_s: float = 60.0
    sample_rate_hz: int = 128
    word_bytes: int = 3
    fifo_depth: int = 32
    rssi_dbm: float = -40.0

    @property
    def duration_us(self) -> int:
        return int(round(self.duration_s * US_PER_S))


@dataclass
class ScenarioResult:
    mode: CommMode
    threshold: int
    duration_us: int
    mcu_avg_mw: float
    sensor_avg_mw: float
    overflow_events: int
    samples_produced: int
    samples_delivered: int
    samples_in_flight: int
    samples_lost: int
    completeness: float
    mean_delivery_latency_us: float
    interrupts: int
    transmissions: int
    stalled: bool
    phase_energies_uj: Dict[str, float] = field(default_factory=dict)


def validate(scenario: NodeScenario) -> None:
    """Reject configurations that cannot keep up with the sampler"""
    if scenario.duration_s <= 0 or scenario.sample_rate_hz <= 0:
        raise ConfigurationRejected("duration_s and sample_rate_hz must be positive",
                                    details={"duration_s": scenario.duration_s})
    if not 1 <= scenario.threshold <= scenario.fifo_depth:
        raise ConfigurationRejected(
            f"FIFO threshold {scenario.threshold} outside [1, {scenario.fifo_depth}]",
            details={"threshold": scenario.threshold}
        )
    if scenario.mode is CommMode.ESB_ONOFF:
        if scenario.threshold < ESB_ONOFF_MIN_THRESHOLD:
            raise ConfigurationRejected(
                f"EsbOnOff needs threshold >= {ESB_ONOFF_MIN_THRESHOLD}: the next interrupt edge arrives "
                "before transmission and teardown finish, the sleeping MCU never sees it and the FIFO "
                "overflows persistently",
                details={"mode": scenario.mode.value, "threshold": scenario.threshold}
            )
        if scenario.threshold > ESB_ONOFF_MAX_THRESHOLD:
            raise ConfigurationRejected(
                f"EsbOnOff needs threshold <= {ESB_ONOFF_MAX_THRESHOLD}: the FIFO is already full when "
                "wake-up initialisation starts and the next sample overflows",
                details={"mode": scenario.mode.value, "threshold": scenario.threshold}
            )
    if scenario.mode is CommMode.BLE_ONOFF:
        raise ConfigurationRejected(
            "BleOnOff is a rejected configuration: re-advertising and reconnecting takes about as long "
            "as the FIFO full-buffer interval, so samples overflow on every cycle",
            details={"mode": scenario.mode.value, "threshold": scenario.threshold}
        )


class SensorNode:
    """Sampler, FIFO and communication pipeline of one node inside a simulation"""

    def __init__(
        self,
        sim: Simulator,
        scenario: NodeScenario,
        calib: CalibrationSet = DEFAULT_CALIBRATION,
        rngs: Optional[RngFactory] = None,
        channel: Optional[ChannelState] = None,
        esb_cfg: Optional[EsbConfig] = None,
        ble_cfg: Optional[BleConfig] = None
    ):
        self.sim = sim
        self.scenario = scenario
        self.calib = calib
        self.mode = scenario.mode
        rngs = rngs or RngFactory(0)
        self.channel = channel or ChannelState(scenario.rssi_dbm, rngs.stream("node-channel"))
        self.fifo = FifoBuffer(scenario.threshold, scenario.fifo_depth, scenario.word_bytes)
        self.sampler = SamplePeriod(scenario.sample_rate_hz)
        self.mcu = PowerTrace(
            calib.profile(self.mode.protocol),
            state=PowerState.SYSTEM_OFF if self.mode.sleeps else PowerState.IDLE_STANDBY,
            phase=PHASE_SLEEP if self.mode.sleeps else PHASE_IDLE,
            name="mcu",
        )
        self.sensor = PowerTrace(calib.sensor_profile(), name="sensor")
        self.busy = False
        self.stalled = False
        self.samples_produced = 0
        self.samples_delivered = 0
        self.samples_lost = 0
        self.in_transit = 0
        self.latency_sum = 0
        self.interrupts = 0
        self.transmissions = 0
        self._airborne: List[int] = []
        self._read_started = False

        self.ble_cfg = ble_cfg or BleConfig()
        self.link: Optional[BleConnection] = None
        self.ptx: Optional[EsbPtx] = None
        if self.mode.protocol is Protocol.ESB:
            cfg = esb_cfg or EsbConfig()
            prx = EsbPrx(cfg, rx_processing_us=calib.esb.rx_processing_us, on_deliver=self._esb_delivered)
            hold = calib.node.esb_standby_radio_hold_us if self.mode is CommMode.ESB_STANDBY else 0
            self.ptx = EsbPtx(sim, cfg, self.channel, prx, calib.esb, self.mcu, name="node-ptx", radio_hold_us=hold)
        elif self.mode is CommMode.BLE_CONNECTION:
            self.link = BleConnection(
                sim, self.ble_cfg, self.channel, calib.ble, self.mcu,
                traced_role=Role.PERIPHERAL,
                on_deliver=self._ble_delivered,
                ce_overhead_us=calib.node.ble_ce_overhead_us,
                data_tail_us=calib.node.ble_radio_hold_us,
                name="node-ble",
            )
            self.link.data_phase = PHASE_TRANSMIT
        else:
            self._adv_rng = rngs.stream("node-advertising")

    def start(self) -> None:
        if self.link is not None:
            self.link.start(anchor=self.sim.now + self.link.lead_us)
        self.sim.schedule(self.sampler.sample_time(1), "sampler", "sample", self._on_sample, 1)

    def _on_sample(self, event: SimEvent) -> None:
        n = event.payload
        self.step_sample(event.fire_at)
        self.sim.schedule(self.sampler.sample_time(n + 1), "sampler", "sample", self._on_sample, n + 1)

    def step_sample(self, t: int) -> StepOutcome:
        self.samples_produced += 1
        outcome = self.fifo.push(t)
        if outcome is StepOutcome.INTERRUPT_RAISED:
            if self.mode.sleeps:
                # the sleeping MCU wakes on the falling edge only
                if not self.busy and not self.stalled:
                    self.handle_interrupt(t)
            elif not self.busy:
                self.handle_interrupt(t)
        return outcome

    def handle_interrupt(self, t: int) -> None:
        """Start the mode's pipeline for a pending FIFO interrupt"""
        node = self.calib.node
        self.busy = True
        self.interrupts += 1
        if self.mode is CommMode.ESB_STANDBY:
            read_at = self.mcu.dwell(t, PowerState.CPU_ACTIVE, node.esb_standby_irq_cpu_us, PHASE_READ)
        elif self.mode is CommMode.BLE_CONNECTION:
            read_at = self.mcu.overlay(t, PowerState.CPU_ACTIVE, node.ble_irq_cpu_us)
        elif self.mode is CommMode.ESB_ONOFF:
            read_at = self.mcu.dwell(t, PowerState.CPU_ACTIVE, node.esb_onoff_init_cpu_us, PHASE_WAKE)
            read_at = self.mcu.dwell(read_at, PowerState.RADIO_RAMP, node.esb_onoff_init_radio_us, PHASE_WAKE)
        else:
            self._reconnect()
            return
        self.sim.schedule(read_at, "node", "spi-read", self._on_read)

    def _on_read(self, event: SimEvent) -> None:
        t = event.fire_at
        words = self.fifo.drain()
        spi_us = len(words) * self.calib.node.spi_read_us_per_word
        self.in_transit += len(words)
        if spi_us:
            self.sensor.dwell(t, PowerState.SENSOR_READ, spi_us)
            self.sensor.enter(t + spi_us, PowerState.IDLE_STANDBY)
            if self.mode.protocol is Protocol.BLE:
                self.mcu.overlay(t, PowerState.CPU_ACTIVE, spi_us)
            else:
                self.mcu.dwell(t, PowerState.CPU_ACTIVE, spi_us, PHASE_READ)
        self.sim.schedule(t + spi_us, "node", "transmit", self._on_transmit, words)

    def _on_transmit(self, event: SimEvent) -> None:
        words: List[int] = event.payload
        t = event.fire_at
        if not words:
            self._pipeline_done(t)
            return
        payload = self.fifo.payload_bytes(len(words))
        self.transmissions += 1
        if self.ptx is not None:
            self._airborne = words
            self.mcu.set_phase(PHASE_TRANSMIT)
            self.ptx.send(bytes(payload), self._esb_done)
            return
        receipt = self.link.notify(Role.PERIPHERAL, payload, tag=words,
                                   stack_latency=self.mode is CommMode.BLE_CONNECTION)
        if not receipt.accepted:
            self.in_transit -= len(words)
            self.samples_lost += len(words)
            logger.debug(f"BLE queue full, {len(words)} samples dropped")
        if self.mode is CommMode.BLE_CONNECTION:
            self._pipeline_done(t)

    def _esb_delivered(self, payload: bytes, at: int) -> None:
        self._delivered(self._airborne, at)
        self._airborne = []

    def _ble_delivered(self, receiver: Role, pdu: QueuedPdu, at: int) -> None:
        if receiver is Role.CENTRAL and pdu.tag is not None:
            self._delivered(pdu.tag, at)

    def _delivered(self, words: List[int], at: int) -> None:
        self.in_transit -= len(words)
        self.samples_delivered += len(words)
        self.latency_sum += sum(at - sampled for sampled in words)

    def _esb_done(self, result: TransactionResult) -> None:
        now = self.sim.now
        if self._airborne:
            self.in_transit -= len(self._airborne)
            self.samples_lost += len(self._airborne)
            self._airborne = []
        if self.mode is CommMode.ESB_STANDBY:
            self.mcu.set_phase(PHASE_IDLE, at=now)
            self._pipeline_done(now)
            return
        end = self.mcu.dwell(now, PowerState.CPU_ACTIVE, self.calib.node.esb_onoff_teardown_us, PHASE_TEARDOWN)
        self.sim.schedule(end, "node", "sleep", self._sleep)

    def _pipeline_done(self, t: int) -> None:
        self.busy = False
        # always-on modes latch the interrupt while busy
        if self.fifo.interrupt_asserted:
            self.handle_interrupt(t)

    def _sleep(self, event: SimEvent) -> None:
        self.mcu.enter(event.fire_at, PowerState.SYSTEM_OFF, PHASE_SLEEP)
        self.mcu.set_phase(PHASE_SLEEP)
        self.busy = False
        if self.fifo.interrupt_asserted:
            self.stalled = True
            logger.debug(
                f"Interrupt edge missed at {event.fire_at} us, node stalled",
                extra={"mode": self.mode.value, "threshold": self.scenario.threshold}
            )

    def _reconnect(self) -> None:
        """BleOnOff: advertise, connect, send one burst, disconnect"""
        link = BleConnection(self.sim, self.ble_cfg, self.channel, self.calib.ble, self.mcu,
                             traced_role=Role.PERIPHERAL, on_deliver=self._ble_delivered, name="node-ble")
        link.data_phase = PHASE_TRANSMIT
        self.link = link
        self._read_started = False

        def connected(conn_end: int, first_anchor: int) -> None:
            link.start(first_anchor, setup_events=self.calib.ble.conn_setup_events)

        def event_end(report: ConnectionEventReport) -> None:
            if report.frames_s2m:
                link.stop()
                self.sim.schedule(report.end, "node", "sleep", self._sleep)
            elif link.setup_events_remaining == 0 and not self._read_started:
                self._read_started = True
                self.sim.schedule(self.sim.now, "node", "spi-read", self._on_read)

        link.on_event_end = event_end
        advertise_and_connect(self.ble_cfg, self.channel, self._adv_rng, self.calib.ble, self.mcu, self.sim, connected)

    @property
    def samples_in_flight(self) -> int:
        return self.fifo.count + self.in_transit

    def result(self, end: int) -> ScenarioResult:
        for trace in (self.mcu, self.sensor):
            trace.close(max(end, trace.last_change))
        in_flight = self.samples_in_flight
        settled = self.samples_produced - in_flight
        completeness = self.samples_delivered / settled if settled > 0 else 1.0
        return ScenarioResult(
            mode=self.mode,
            threshold=self.scenario.threshold,
            duration_us=end,
            mcu_avg_mw=average_power(self.mcu, 0, end),
            sensor_avg_mw=average_power(self.sensor, 0, end),
            overflow_events=self.fifo.overflow_events,
            samples_produced=self.samples_produced,
            samples_delivered=self.samples_delivered,
            samples_in_flight=in_flight,
            samples_lost=self.samples_lost,
            completeness=completeness,
            mean_delivery_latency_us=self.latency_sum / self.samples_delivered if self.samples_delivered else 0.0,
            interrupts=self.interrupts,
            transmissions=self.transmissions,
            stalled=self.stalled,
            phase_energies_uj=self.mcu.phase_energies_uj(),
        )


def run_scenario(
    scenario: NodeScenario,
    calib: CalibrationSet = DEFAULT_CALIBRATION,
    seed: int = 1,
    force: bool = False,
    esb_cfg: Optional[EsbConfig] = None,
    ble_cfg: Optional[BleConfig] = None
) -> ScenarioResult:
    """Simulate one node for scenario.duration_s and integrate both rails"""
    if not force:
        validate(scenario)
    sim = Simulator()
    node = SensorNode(sim, scenario, calib, RngFactory(seed), esb_cfg=esb_cfg, ble_cfg=ble_cfg)
    node.start()
    end = scenario.duration_us
    sim.run_until(end)
    result = node.result(end)
    logger.debug(
        f"{scenario.mode.value} threshold {scenario.threshold}: {result.mcu_avg_mw:.3f} mW",
        extra={"mode": scenario.mode.value, "threshold": scenario.threshold,
               "overflow_events": result.overflow_events, "completeness": result.completeness}
    )
    return result
