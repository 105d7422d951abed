"""
Experiment runner: one method per named experiment, each turning a sweep into ResultRows
"""
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import ExperimentDefaults
from core.concurrency import run_bounded
from core.energy.calibration import CalibrationSet, Protocol
from core.energy.power import PowerTrace
from core.node.node import CommMode, NodeScenario, run_scenario, validate
from core.phy.channel import ESB_MAX_PAYLOAD, ChannelState
from core.protocols.ble import ble_latency, ble_stream
from core.protocols.esb import esb_latency, esb_stream
from core.protocols.packet import packet_event
from core.protocols.warmup import warmup
from core.services.reporting import fit_slope
from core.services.scenario import ScenarioContext
from core.sim.engine import US_PER_S
from core.sim.rng import RngFactory
from core.utils.errors import ConfigurationRejected, FitError, SpecError
from core.utils.logger import get_logger, log_run_info
from repositories.results import ResultRepository, ResultRow

logger = get_logger(__name__)

EXPERIMENT_NAMES = ("latency", "single-packet", "throughput", "rssi", "dutycycle", "bidir", "loop-recorder")
ALL_PROTOCOLS = [Protocol.BLE, Protocol.ESB]

SATURATED = "max"
SUMMARY = "summary"


@dataclass
class ExperimentSpec:
    name: str
    protocols: List[Protocol] = field(default_factory=lambda: list(ALL_PROTOCOLS))
    seed: int = 1
    reps: Optional[int] = None
    out: str = "results"

    def __post_init__(self):
        if self.name not in EXPERIMENT_NAMES:
            raise SpecError(f"Unknown experiment '{self.name}'", details={"known": list(EXPERIMENT_NAMES)})
        if not self.protocols:
            raise SpecError("At least one protocol is required")
        if self.reps is not None and self.reps < 1:
            raise SpecError("reps must be >= 1", details={"reps": self.reps})
        if not 0 <= self.seed < 2 ** 64:
            raise SpecError("seed must be an unsigned 64-bit integer", details={"seed": self.seed})


@dataclass
class ExperimentRun:
    spec: ExperimentSpec
    rows: List[ResultRow]
    path: Optional[Path] = None


class ExperimentService:
    """Runs experiments against one scenario context and calibration set"""

    def __init__(
        self,
        ctx: ScenarioContext,
        calib: CalibrationSet,
        results: ResultRepository,
        defaults: Optional[ExperimentDefaults] = None,
        workers: int = 4
    ):
        self.ctx = ctx
        self.calib = calib
        self.calib_hash = calib.content_hash()
        self.results = results
        self.defaults = defaults or ExperimentDefaults()
        self.workers = workers
        self._handlers: Dict[str, Callable[[ExperimentSpec], List[ResultRow]]] = {
            "latency": self.latency,
            "single-packet": self.single_packet,
            "throughput": self.throughput,
            "rssi": self.rssi,
            "dutycycle": self.dutycycle,
            "bidir": self.bidir,
            "loop-recorder": self.loop_recorder,
        }

    def run(self, spec: ExperimentSpec, save: bool = True) -> ExperimentRun:
        log_run_info(spec, self.calib_hash)
        rows = self._handlers[spec.name](spec)
        run = ExperimentRun(spec, rows)
        if save:
            run.path = self.results.save(rows, spec.name)
        logger.info(f"{spec.name}: {len(rows)} rows",
                    extra={"event": "experiment_done", "experiment": spec.name, "seed": spec.seed})
        return run

    # helpers

    def _row(self, spec: ExperimentSpec, protocol: str, x_name: str, x_value, metric: str,
             value: float, unit: str, seed: int) -> ResultRow:
        return ResultRow(
            experiment=spec.name, protocol=protocol, x_name=x_name, x_value=x_value, metric=metric,
            value=float(value), unit=unit, seed=seed, calib_hash=self.calib_hash,
        )

    def _reps(self, spec: ExperimentSpec, stochastic: bool) -> int:
        if spec.reps is not None:
            return spec.reps
        return self.defaults.stochastic_reps if stochastic else self.defaults.deterministic_reps

    def _seeds(self, spec: ExperimentSpec, reps: int) -> List[int]:
        return [(spec.seed + rep) % 2 ** 64 for rep in range(reps)]

    def _channel(self, rngs: RngFactory, rssi_dbm: Optional[float] = None) -> ChannelState:
        return ChannelState(
            rssi_dbm=self.ctx.rssi_dbm if rssi_dbm is None else rssi_dbm,
            loss_rng=rngs.stream("channel"),
            per_curves=self.ctx.per_curves,
        )

    def _gather(self, tasks: List[Callable[[], list]]) -> list:
        """Run independent points in parallel and concatenate in submission order"""
        out = []
        for part in run_bounded(tasks, self.workers, domain="simulation"):
            out.extend(part)
        return out

    def _stream_us(self) -> int:
        seconds = self.ctx.stream_duration_s or self.defaults.stream_duration_s
        return int(round(seconds * US_PER_S))

    def _stream(self, protocol: Protocol, seed: int, offered_kbps: Optional[float] = None,
                rssi_dbm: Optional[float] = None, ack_bytes: int = 0,
                reverse_saturated: bool = False) -> Tuple[float, float, float]:
        """(forward kbps, reverse kbps, average power mW) of one stream point"""
        channel = self._channel(RngFactory(seed), rssi_dbm)
        trace = PowerTrace(self.calib.profile(protocol), name=f"{protocol.value}-stream")
        if protocol is Protocol.ESB:
            cfg = self.ctx.esb
            if ack_bytes > cfg.ack_payload_max:
                cfg = replace(cfg, ack_payload_max=ESB_MAX_PAYLOAD)
            result = esb_stream(cfg, channel, trace, self.calib.esb, duration_us=self._stream_us(),
                                offered_kbps=offered_kbps, ack_bytes=ack_bytes)
        else:
            result = ble_stream(self.ctx.ble, channel, trace, self.calib.ble, duration_us=self._stream_us(),
                                offered_kbps=offered_kbps, reverse_saturated=reverse_saturated)
        return result.forward_kbps, result.reverse_kbps, result.avg_power_mw

    # experiments

    def latency(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Send request to delivery per payload size"""
        tasks = []
        for protocol in spec.protocols:
            seeds = self._seeds(spec, self._reps(spec, stochastic=protocol is Protocol.BLE))
            for payload in self.ctx.payloads:
                tasks.append(partial(self._latency_point, spec, protocol, payload, seeds))
        return self._gather(tasks)

    def _latency_point(self, spec: ExperimentSpec, protocol: Protocol, payload: int,
                       seeds: Sequence[int]) -> List[ResultRow]:
        rows = []
        for seed in seeds:
            rngs = RngFactory(seed)
            channel = self._channel(rngs)
            if protocol is Protocol.ESB:
                value = esb_latency(payload, self.ctx.esb, channel, self.calib.esb)
            else:
                value = ble_latency(payload, self.ctx.ble, channel, rngs.stream("send-phase"), self.calib.ble)
            rows.append(self._row(spec, protocol.value, "payload_bytes", payload, "latency_us", value, "us", seed))
        return rows

    def single_packet(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Time, energy above the standby floor and peak power of one isolated packet"""
        seed = spec.seed
        tasks = [partial(self._packet_point, spec, protocol, payload, seed)
                 for protocol in spec.protocols for payload in self.ctx.payloads]
        rows = self._gather(tasks)
        if set(ALL_PROTOCOLS) <= set(spec.protocols):
            energy = {(r.protocol, r.x_value): r.value for r in rows if r.metric == "energy_uj"}
            for payload in self.ctx.payloads:
                esb = energy.get((Protocol.ESB.value, payload))
                if esb:
                    ratio = energy[(Protocol.BLE.value, payload)] / esb
                    rows.append(self._row(spec, "both", "payload_bytes", payload, "energy_ratio", ratio, "ratio", seed))
        return rows

    def _packet_point(self, spec: ExperimentSpec, protocol: Protocol, payload: int, seed: int) -> List[ResultRow]:
        event = packet_event(protocol, payload, self._channel(RngFactory(seed)), self.calib,
                             esb_cfg=self.ctx.esb, ble_cfg=self.ctx.ble)
        p = protocol.value
        return [
            self._row(spec, p, "payload_bytes", payload, "duration_us", event.duration_us, "us", seed),
            self._row(spec, p, "payload_bytes", payload, "energy_uj", event.energy_uj, "uJ", seed),
            self._row(spec, p, "payload_bytes", payload, "peak_power_mw", event.peak_power_mw, "mW", seed),
        ]

    def throughput(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Power against throughput from idle to saturation"""
        seeds = self._seeds(spec, self._reps(spec, stochastic=False))
        points = [(protocol, seed) for protocol in spec.protocols for seed in seeds]
        saturated = run_bounded([partial(self._stream, protocol, seed) for protocol, seed in points],
                                self.workers, domain="simulation")
        max_kbps = {point: fwd for point, (fwd, _rev, _mw) in zip(points, saturated)}

        sweep = [(protocol, seed, fraction) for protocol, seed in points for fraction in self.ctx.rate_fractions]
        if 0.0 not in self.ctx.rate_fractions:
            sweep += [(protocol, seed, 0.0) for protocol, seed in points]
        measured = run_bounded(
            [partial(self._stream, protocol, seed, fraction * max_kbps[(protocol, seed)])
             for protocol, seed, fraction in sweep],
            self.workers, domain="simulation"
        )

        rows: List[ResultRow] = []
        best: Dict[Protocol, float] = {}
        for protocol, seed in points:
            p = protocol.value
            xs, ys = [], []
            standby = None
            for (proto, s, fraction), (fwd, _rev, mw) in zip(sweep, measured):
                if (proto, s) != (protocol, seed):
                    continue
                offered = round(fraction * max_kbps[(protocol, seed)], 3)
                if fraction == 0.0:
                    standby = mw
                if fraction in self.ctx.rate_fractions:
                    rows.append(self._row(spec, p, "offered_kbps", offered, "throughput_kbps", fwd, "kbps", seed))
                    rows.append(self._row(spec, p, "offered_kbps", offered, "power_mw", mw, "mW", seed))
                xs.append(fwd)
                ys.append(mw)
            fwd, _rev, mw = saturated[points.index((protocol, seed))]
            rows.append(self._row(spec, p, "offered_kbps", SATURATED, "throughput_kbps", fwd, "kbps", seed))
            rows.append(self._row(spec, p, "offered_kbps", SATURATED, "power_mw", mw, "mW", seed))
            xs.append(fwd)
            ys.append(mw)

            rows.append(self._row(spec, p, "point", SUMMARY, "max_throughput_kbps", fwd, "kbps", seed))
            rows.append(self._row(spec, p, "point", SUMMARY, "standby_mw", standby, "mW", seed))
            try:
                fit = fit_slope(xs, ys)
                rows.append(self._row(spec, p, "point", SUMMARY, "slope_mw_per_kbps", fit.k, "mW/kbps", seed))
            except FitError as e:
                logger.warning(f"{p}: no power-throughput slope: {e.message}")
            if fwd > 0:
                # mW / kbps = mJ per kbit
                rows.append(self._row(spec, p, "point", SUMMARY, "energy_per_kbit_uj", mw / fwd * 1000, "uJ/kbit", seed))
            best[protocol] = max(best.get(protocol, 0.0), fwd)

        if set(ALL_PROTOCOLS) <= set(best) and best[Protocol.BLE] > 0:
            rows.append(self._row(spec, "both", "point", SUMMARY, "max_throughput_ratio",
                                  best[Protocol.ESB] / best[Protocol.BLE], "ratio", spec.seed))
        return rows

    def rssi(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Saturated throughput across received signal strength"""
        reps = spec.reps if spec.reps is not None else self.defaults.sweep_reps
        seeds = self._seeds(spec, reps)
        sweep = [(protocol, seed, rssi) for protocol in spec.protocols for seed in seeds for rssi in self.ctx.rssi_sweep]
        measured = run_bounded([partial(self._stream, protocol, seed, None, rssi) for protocol, seed, rssi in sweep],
                               self.workers, domain="simulation")
        peak: Dict[Tuple[Protocol, int], float] = {}
        for (protocol, seed, _rssi), (fwd, _rev, _mw) in zip(sweep, measured):
            peak[(protocol, seed)] = max(peak.get((protocol, seed), 0.0), fwd)

        rows = []
        for (protocol, seed, rssi), (fwd, _rev, _mw) in zip(sweep, measured):
            top = peak[(protocol, seed)]
            rows.append(self._row(spec, protocol.value, "rssi_dbm", rssi, "throughput_kbps", fwd, "kbps", seed))
            rows.append(self._row(spec, protocol.value, "rssi_dbm", rssi, "normalized_throughput",
                                  fwd / top if top > 0 else 0.0, "ratio", seed))
        return rows

    def dutycycle(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Sleep-to-first-packet warm-up and the average power of one wake-transmit-sleep cycle"""
        tasks = []
        for protocol in spec.protocols:
            for seed in self._seeds(spec, self._reps(spec, stochastic=protocol is Protocol.BLE)):
                tasks.append(partial(self._warmup_point, spec, protocol, seed))
        rows = self._gather(tasks)

        if set(ALL_PROTOCOLS) <= set(spec.protocols):
            means = {}
            for metric in ("warmup_us", "warmup_energy_uj"):
                for protocol in ALL_PROTOCOLS:
                    values = [r.value for r in rows if r.metric == metric and r.protocol == protocol.value]
                    means[(protocol, metric)] = float(np.mean(values))
            period = self.ctx.cycle_period_s
            for metric, ratio_metric in (("warmup_us", "warmup_time_ratio"), ("warmup_energy_uj", "warmup_energy_ratio")):
                ratio = means[(Protocol.BLE, metric)] / means[(Protocol.ESB, metric)]
                rows.append(self._row(spec, "both", "cycle_period_s", period, ratio_metric, ratio, "ratio", spec.seed))
        return rows

    def _warmup_point(self, spec: ExperimentSpec, protocol: Protocol, seed: int) -> List[ResultRow]:
        rngs = RngFactory(seed)
        result = warmup(protocol, self._channel(rngs), rngs.stream("advertising"), self.calib,
                        esb_cfg=self.ctx.esb, ble_cfg=self.ctx.ble)
        period = self.ctx.cycle_period_s
        period_us = int(round(period * US_PER_S))
        sleep_us = max(0, period_us - result.duration_us)
        cycle_uj = result.energy_uj + self.calib.power.system_off_mw * sleep_us / 1000
        p = protocol.value
        rows = [
            self._row(spec, p, "cycle_period_s", period, "warmup_us", result.duration_us, "us", seed),
            self._row(spec, p, "cycle_period_s", period, "warmup_energy_uj", result.energy_uj, "uJ", seed),
        ]
        for phase, energy in sorted(result.phase_energies_uj.items()):
            rows.append(self._row(spec, p, "cycle_period_s", period, f"energy_uj_{phase.lower()}", energy, "uJ", seed))
        rows.append(self._row(spec, p, "cycle_period_s", period, "cycle_avg_power_mw",
                              cycle_uj / period / 1000, "mW", seed))
        if result.adv_events:
            rows.append(self._row(spec, p, "cycle_period_s", period, "adv_events", result.adv_events, "count", seed))
        return rows

    def bidir(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Reverse against forward throughput with a saturated reverse direction"""
        seeds = self._seeds(spec, self._reps(spec, stochastic=False))
        cases: List[Tuple[Protocol, int, int]] = []
        for protocol in spec.protocols:
            sizes = self.ctx.ack_sizes if protocol is Protocol.ESB else [0]
            cases += [(protocol, ack, seed) for ack in sizes for seed in seeds]

        saturated = run_bounded([partial(self._bidir_stream, protocol, seed, None, ack)
                                 for protocol, ack, seed in cases], self.workers, domain="simulation")
        sweep = [(case, fraction) for case in cases for fraction in self.ctx.rate_fractions]
        measured = run_bounded(
            [partial(self._bidir_stream, case[0], case[2], fraction * saturated[cases.index(case)][0], case[1])
             for case, fraction in sweep],
            self.workers, domain="simulation"
        )

        rows = []
        for case, top in zip(cases, saturated):
            protocol, ack, seed = case
            p = protocol.value
            suffix = f"_ack{ack}" if protocol is Protocol.ESB else ""
            xs, ys = [], []
            points = [(round(fraction * top[0], 3), result) for (c, fraction), result in zip(sweep, measured) if c == case]
            points.append((SATURATED, top))
            for offered, (fwd, rev, _mw) in points:
                rows.append(self._row(spec, p, "offered_kbps", offered, f"forward_kbps{suffix}", fwd, "kbps", seed))
                rows.append(self._row(spec, p, "offered_kbps", offered, f"reverse_kbps{suffix}", rev, "kbps", seed))
                xs.append(fwd)
                ys.append(rev)
            x_name, x_value = ("ack_bytes", ack) if protocol is Protocol.ESB else ("point", SUMMARY)
            try:
                fit = fit_slope(xs, ys)
                rows.append(self._row(spec, p, x_name, x_value, "slope_k", fit.k, "ratio", seed))
                rows.append(self._row(spec, p, x_name, x_value, "slope_r2", fit.r2, "ratio", seed))
            except FitError as e:
                logger.warning(f"{p}{suffix}: no bidirectional slope: {e.message}")
            rows.append(self._row(spec, p, x_name, x_value, "aggregate_kbps", top[0] + top[1], "kbps", seed))
        return rows

    def _bidir_stream(self, protocol: Protocol, seed: int, offered_kbps: Optional[float], ack: int):
        if protocol is Protocol.ESB:
            return self._stream(protocol, seed, offered_kbps, ack_bytes=ack)
        return self._stream(protocol, seed, offered_kbps, reverse_saturated=True)

    def loop_recorder(self, spec: ExperimentSpec) -> List[ResultRow]:
        """Node power and data integrity across FIFO thresholds for each communication mode"""
        modes = [m for m in self.ctx.modes if m.protocol in spec.protocols]
        seed = spec.seed
        tasks = [partial(self._node_point, spec, mode, threshold, seed)
                 for mode in modes for threshold in self.ctx.thresholds]
        rows = self._gather(tasks)

        mcu = {(r.protocol, r.x_value): r.value for r in rows if r.metric == "mcu_avg_mw"}
        onoff = mcu.get((CommMode.ESB_ONOFF.value, 31))
        ble = mcu.get((CommMode.BLE_CONNECTION.value, 32))
        if onoff is not None and ble:
            rows.append(self._row(spec, "both", "threshold", "31/32", "onoff_to_connection_ratio",
                                  onoff / ble, "ratio", seed))
        return rows

    def _node_point(self, spec: ExperimentSpec, mode: CommMode, threshold: int, seed: int) -> List[ResultRow]:
        scenario = NodeScenario(
            mode=mode,
            threshold=threshold,
            duration_s=self.ctx.node_duration_s or self.defaults.node_duration_s,
            sample_rate_hz=self.ctx.node_sample_rate_hz,
            word_bytes=self.ctx.node_word_bytes,
            rssi_dbm=self.ctx.rssi_dbm,
        )
        p = mode.value
        try:
            validate(scenario)
            feasible = True
        except ConfigurationRejected as e:
            feasible = False
            logger.info(f"{p} threshold {threshold} rejected: {e.message}")
        result = run_scenario(scenario, self.calib, seed=seed, force=not feasible,
                              esb_cfg=self.ctx.esb, ble_cfg=self.ctx.ble)
        suffix = "" if feasible else "_forced"
        rows = [self._row(spec, p, "threshold", threshold, "feasible", int(feasible), "bool", seed)]
        metrics = [
            ("mcu_avg_mw", result.mcu_avg_mw, "mW"),
            ("sensor_avg_mw", result.sensor_avg_mw, "mW"),
            ("overflow_events", result.overflow_events, "count"),
            ("completeness", result.completeness, "ratio"),
            ("mean_delivery_latency_us", result.mean_delivery_latency_us, "us"),
            ("stalled", int(result.stalled), "bool"),
        ]
        for metric, value, unit in metrics:
            rows.append(self._row(spec, p, "threshold", threshold, metric + suffix, value, unit, seed))
        return rows


__all__ = [
    'EXPERIMENT_NAMES',
    'ExperimentRun',
    'ExperimentService',
    'ExperimentSpec',
]
