"""
Deterministic coordinate-descent fit of the calibration constants against measured anchors
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from core.energy.calibration import CalibrationSet, Protocol
from core.energy.power import PowerTrace
from core.phy.channel import BLE_MAX_APP_PAYLOAD, ChannelState
from core.protocols.ble import ble_stream
from core.protocols.esb import esb_latency
from core.protocols.packet import packet_event
from core.protocols.warmup import warmup
from core.services.scenario import ScenarioContext
from core.sim.rng import RngFactory
from core.utils.errors import CalibrationFailed
from core.utils.logger import get_logger

logger = get_logger(__name__)

# Walked in this order on every iteration
FREE_PARAMETERS = (
    "esb.post_cpu_us",
    "esb.pre_cpu_us",
    "ble.post_cpu_us",
    "ble.pre_cpu_us",
    "esb.idle_mw",
    "ble.idle_mw",
    "esb.rx_processing_us",
    "esb.init_cpu_us",
    "ble.init_cpu_us",
    "ble.connect_delay_us",
)


@dataclass(frozen=True)
class Anchor:
    name: str
    protocol: Protocol
    target: float
    tolerance: float
    unit: str
    measure: Callable[[CalibrationSet], float]

    def residual(self, value: float) -> float:
        return (value - self.target) / abs(self.target)


@dataclass(frozen=True)
class AnchorCheck:
    anchor: Anchor
    value: float

    @property
    def residual(self) -> float:
        return self.anchor.residual(self.value)

    @property
    def passed(self) -> bool:
        return abs(self.residual) <= self.anchor.tolerance

    def line(self) -> str:
        a = self.anchor
        return (f"{'PASS' if self.passed else 'FAIL':<5} {a.name:<24} target {a.target:>10.3f} {a.unit:<3} "
                f"fitted {self.value:>10.3f}  residual {self.residual:+.2%} (tol {a.tolerance:.0%})")


@dataclass
class CalibrationOutcome:
    calib: CalibrationSet
    checks: List[AnchorCheck] = field(default_factory=list)
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def worst(self) -> Optional[AnchorCheck]:
        if not self.checks:
            return None
        return max(self.checks, key=lambda c: abs(c.residual) / c.anchor.tolerance)

    def lines(self) -> List[str]:
        out = [c.line() for c in self.checks]
        out.append(f"calibration {self.calib.content_hash()} after {self.iterations} iterations")
        return out

    def raise_for_failure(self) -> None:
        if self.converged:
            return
        worst = self.worst
        raise CalibrationFailed(
            f"Anchor '{worst.anchor.name}' stays {worst.residual:+.2%} off its target "
            f"(tolerance {worst.anchor.tolerance:.0%})",
            details={"anchor": worst.anchor.name, "target": worst.anchor.target, "value": worst.value}
        )


class CalibrationService:
    """Builds the measured anchor set and fits the free constants to it"""

    def __init__(self, ctx: ScenarioContext, reps: int = 10, seed: int = 1):
        self.ctx = ctx
        self.reps = reps
        self.seed = seed
        self._warmup_cache: Dict[tuple, list] = {}

    def _channel(self, seed: int) -> ChannelState:
        return ChannelState(self.ctx.rssi_dbm, RngFactory(seed).stream("channel"), self.ctx.per_curves)

    def _packet(self, protocol: Protocol, calib: CalibrationSet):
        return packet_event(protocol, BLE_MAX_APP_PAYLOAD, self._channel(self.seed), calib,
                            esb_cfg=self.ctx.esb, ble_cfg=self.ctx.ble)

    def _warmups(self, protocol: Protocol, calib: CalibrationSet):
        key = (protocol, calib.content_hash())
        if key in self._warmup_cache:
            return self._warmup_cache[key]
        reps = self.reps if protocol is Protocol.BLE else 1
        results = []
        for rep in range(reps):
            rngs = RngFactory(self.seed + rep)
            results.append(warmup(protocol, self._channel(self.seed + rep), rngs.stream("advertising"), calib,
                                  esb_cfg=self.ctx.esb, ble_cfg=self.ctx.ble))
        self._warmup_cache[key] = results
        return results

    def _ble_standby(self, calib: CalibrationSet) -> float:
        trace = PowerTrace(calib.profile(Protocol.BLE), name="ble-standby")
        return ble_stream(self.ctx.ble, self._channel(self.seed), trace, calib.ble, offered_kbps=0).avg_power_mw

    def default_anchors(self) -> List[Anchor]:
        esb, ble = Protocol.ESB, Protocol.BLE
        return [
            Anchor("esb_packet_us", esb, 1280, 0.05, "us", lambda c: self._packet(esb, c).duration_us),
            Anchor("esb_packet_uj", esb, 18.30, 0.05, "uJ", lambda c: self._packet(esb, c).energy_uj),
            Anchor("ble_packet_us", ble, 2600, 0.05, "us", lambda c: self._packet(ble, c).duration_us),
            Anchor("ble_packet_uj", ble, 38.16, 0.05, "uJ", lambda c: self._packet(ble, c).energy_uj),
            Anchor("esb_standby_mw", esb, 1.15, 0.05, "mW", lambda c: c.esb.idle_mw),
            Anchor("ble_standby_mw", ble, 1.41, 0.05, "mW", self._ble_standby),
            Anchor("esb_latency_244_us", esb, 680, 0.10, "us",
                   lambda c: esb_latency(BLE_MAX_APP_PAYLOAD, self.ctx.esb, self._channel(self.seed), c.esb)),
            Anchor("esb_warmup_us", esb, 22410, 0.15, "us",
                   lambda c: float(np.mean([w.duration_us for w in self._warmups(esb, c)]))),
            Anchor("esb_warmup_uj", esb, 112.16, 0.15, "uJ",
                   lambda c: float(np.mean([w.energy_uj for w in self._warmups(esb, c)]))),
            Anchor("ble_warmup_us", ble, 218960, 0.15, "us",
                   lambda c: float(np.mean([w.duration_us for w in self._warmups(ble, c)]))),
            Anchor("ble_warmup_uj", ble, 1226.55, 0.15, "uJ",
                   lambda c: float(np.mean([w.energy_uj for w in self._warmups(ble, c)]))),
        ]

    def check(self, calib: CalibrationSet, anchors: Sequence[Anchor]) -> List[AnchorCheck]:
        return [AnchorCheck(anchor, float(anchor.measure(calib))) for anchor in anchors]

    @staticmethod
    def _score(checks: Sequence[AnchorCheck]) -> float:
        """Largest residual in units of its own tolerance"""
        return max(abs(c.residual) / c.anchor.tolerance for c in checks)

    def calibrate(
        self,
        start: CalibrationSet,
        anchors: Optional[Sequence[Anchor]] = None,
        parameters: Sequence[str] = FREE_PARAMETERS,
        max_iterations: int = 50,
        step: float = 0.1,
        min_step: float = 1e-3
    ) -> CalibrationOutcome:
        anchors = self.default_anchors() if anchors is None else list(anchors)
        if not anchors:
            return CalibrationOutcome(start)

        best = start
        checks = self.check(best, anchors)
        score = self._score(checks)
        iterations = 0
        cache: Dict[str, float] = {best.content_hash(): score}

        while score > 1.0 and iterations < max_iterations and step >= min_step:
            iterations += 1
            moved = False
            for path in parameters:
                for direction in (1, -1):
                    candidate = best.with_value(path, best.get(path) * (1 + direction * step))
                    key = candidate.content_hash()
                    if key not in cache:
                        cache[key] = self._score(self.check(candidate, anchors))
                    if cache[key] < score:
                        best, score, moved = candidate, cache[key], True
                        logger.debug(f"calibrate: {path} -> {best.get(path)} (score {score:.4f})")
                        break
            if not moved:
                step /= 2
            logger.info(
                f"Calibration iteration {iterations}: worst residual {score:.3f} x tolerance",
                extra={"event": "calibration_iteration", "calib_hash": best.content_hash()}
            )

        outcome = CalibrationOutcome(best, self.check(best, anchors), iterations)
        if not outcome.converged:
            logger.warning(f"Calibration did not converge; worst anchor {outcome.worst.anchor.name}")
        return outcome
