"""
Piecewise-constant power-state traces and their exact integration.

Powers are held in integer nanowatts and times in integer microseconds, so
energies accumulate exactly in femtojoules (nW x us) before being reported in uJ.
"""
import csv
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, TextIO, Tuple

from core.utils.errors import CoverageError, ErrorCode, SimError

FJ_PER_UJ = 1_000_000_000


class PowerState(Enum):
    SYSTEM_OFF = "SystemOff"
    IDLE_STANDBY = "IdleStandby"
    CPU_ACTIVE = "CpuActive"
    RADIO_RAMP = "RadioRamp"
    RADIO_TX = "RadioTx"
    RADIO_RX = "RadioRx"
    SENSOR_READ = "SensorRead"


def mw_to_nw(mw: float) -> int:
    return int(round(mw * 1_000_000))


@dataclass(frozen=True)
class PowerProfile:
    """Draw of every power state for one device (mW)"""
    system_off_mw: float
    idle_standby_mw: float
    cpu_active_mw: float
    radio_ramp_mw: float
    radio_tx_mw: float
    radio_rx_mw: float
    sensor_read_mw: float

    def __post_init__(self):
        values = (self.system_off_mw, self.idle_standby_mw, self.cpu_active_mw, self.radio_ramp_mw,
                  self.radio_tx_mw, self.radio_rx_mw, self.sensor_read_mw)
        if any(v <= 0 for v in values):
            raise SimError("State powers must be positive", code=ErrorCode.INVALID_CONFIGURATION)
        if not self.system_off_mw < self.idle_standby_mw < self.cpu_active_mw < self.radio_tx_mw:
            raise SimError(
                "State powers must satisfy SystemOff < IdleStandby < CpuActive < RadioTx",
                code=ErrorCode.INVALID_CONFIGURATION,
                details={"profile": self.as_dict()}
            )

    def mw(self, state: PowerState) -> float:
        return {
            PowerState.SYSTEM_OFF: self.system_off_mw,
            PowerState.IDLE_STANDBY: self.idle_standby_mw,
            PowerState.CPU_ACTIVE: self.cpu_active_mw,
            PowerState.RADIO_RAMP: self.radio_ramp_mw,
            PowerState.RADIO_TX: self.radio_tx_mw,
            PowerState.RADIO_RX: self.radio_rx_mw,
            PowerState.SENSOR_READ: self.sensor_read_mw,
        }[state]

    def as_dict(self) -> Dict[str, float]:
        return {state.value: self.mw(state) for state in PowerState}


@dataclass(frozen=True)
class Segment:
    start: int
    state: PowerState
    power_nw: int
    phase: Optional[str] = None

    @property
    def power_mw(self) -> float:
        return self.power_nw / 1_000_000


class PowerTrace:
    """Time-sorted, gap-free dwell list covering [start, end].

    The base timeline is written in time order by the actor that owns the
    device. Activities that run concurrently with it (CPU work during a radio
    event) are added as overlays; an overlay adds its state's draw above the
    idle floor on top of whatever the base timeline is doing.
    """

    def __init__(
        self,
        profile: PowerProfile,
        start: int = 0,
        state: PowerState = PowerState.IDLE_STANDBY,
        phase: Optional[str] = None,
        name: str = "mcu"
    ):
        self.profile = profile
        self.name = name
        self.phase = phase
        self._nw = {s: mw_to_nw(profile.mw(s)) for s in PowerState}
        self._base: List[Segment] = [Segment(start, state, self._nw[state], phase)]
        self._overlays: List[Tuple[int, int, PowerState]] = []
        self._view: Optional[Tuple[List[int], List[Segment]]] = None
        self.end = start

    @property
    def start(self) -> int:
        return self._base[0].start

    @property
    def segments(self) -> List[Segment]:
        return list(self._composed()[1])

    @property
    def state(self) -> PowerState:
        return self._base[-1].state

    @property
    def last_change(self) -> int:
        return self._base[-1].start

    def set_phase(self, phase: Optional[str], at: Optional[int] = None) -> None:
        """Label segments entered from now on; with `at`, split the current dwell there"""
        self.phase = phase
        if at is not None:
            self.enter(at, self.state)

    def enter(self, t: int, state: PowerState, phase: Optional[str] = None) -> None:
        label = phase if phase is not None else self.phase
        last = self._base[-1]
        if t < last.start:
            raise SimError(
                f"{self.name} trace: segment at {t} us precedes the last change at {last.start} us",
                code=ErrorCode.SIMULATION_FAULT
            )
        self._view = None
        self.end = max(self.end, t)
        if last.state is state and last.phase == label:
            return
        segment = Segment(t, state, self._nw[state], label)
        if t == last.start:
            self._base[-1] = segment
        else:
            self._base.append(segment)

    def dwell(self, t: int, state: PowerState, duration: int, phase: Optional[str] = None) -> int:
        """Enter `state` at t for `duration` us; returns the dwell end"""
        self.enter(t, state, phase)
        self.end = max(self.end, t + duration)
        return t + duration

    def sequence(self, t: int, steps: Iterable[Tuple[PowerState, int]]) -> int:
        for state, duration in steps:
            if duration > 0:
                t = self.dwell(t, state, duration)
        return t

    def overlay(self, t: int, state: PowerState, duration: int) -> int:
        """Concurrent activity on top of the base timeline; returns its end"""
        if t < self.start:
            raise SimError(f"{self.name} trace: overlay before trace start", code=ErrorCode.SIMULATION_FAULT)
        if duration > 0:
            self._overlays.append((t, t + duration, state))
            self.end = max(self.end, t + duration)
            self._view = None
        return t + duration

    def close(self, t: int) -> None:
        """Extend coverage to t in the current state"""
        if t < self._base[-1].start:
            raise SimError(f"{self.name} trace: close({t}) precedes the last change", code=ErrorCode.SIMULATION_FAULT)
        self.end = max(self.end, t)

    def _composed(self) -> Tuple[List[int], List[Segment]]:
        if self._view is not None:
            return self._view
        if not self._overlays:
            segments = list(self._base)
        else:
            segments = self._compose_overlays()
        self._view = ([s.start for s in segments], segments)
        return self._view

    def _compose_overlays(self) -> List[Segment]:
        idle = self._nw[PowerState.IDLE_STANDBY]
        # (time, +1/-1, state) edges of every overlay
        edges = []
        for o_start, o_end, state in self._overlays:
            edges.append((o_start, 1, state))
            edges.append((o_end, -1, state))
        edges.sort(key=lambda e: (e[0], e[1]))
        bounds = sorted({s.start for s in self._base} | {e[0] for e in edges if e[0] <= self.end})

        active: Dict[PowerState, int] = {}
        out: List[Segment] = []
        b = 0
        e = 0
        for t in bounds:
            while b + 1 < len(self._base) and self._base[b + 1].start <= t:
                b += 1
            while e < len(edges) and edges[e][0] <= t:
                _, delta, state = edges[e]
                active[state] = active.get(state, 0) + delta
                if active[state] == 0:
                    del active[state]
                e += 1
            base = self._base[b]
            power = base.power_nw
            label_state = base.state
            for state, count in active.items():
                power += count * max(0, self._nw[state] - idle)
                if self._nw[state] > self._nw[label_state]:
                    label_state = state
            if out and out[-1].state is label_state and out[-1].power_nw == power and out[-1].phase == base.phase:
                continue
            out.append(Segment(t, label_state, power, base.phase))
        return out

    def _check_window(self, t0: int, t1: int) -> None:
        if t1 < t0 or t0 < self.start or t1 > self.end:
            raise CoverageError(
                f"Window [{t0}, {t1}] outside {self.name} trace coverage [{self.start}, {self.end}]",
                details={"t0": t0, "t1": t1, "start": self.start, "end": self.end}
            )

    def _spans(self):
        starts, segments = self._composed()
        n = len(segments)
        for i, seg in enumerate(segments):
            seg_end = starts[i + 1] if i + 1 < n else self.end
            yield seg, seg_end

    def integrate_fj(self, t0: int, t1: int) -> int:
        """Exact energy over [t0, t1] in femtojoules"""
        self._check_window(t0, t1)
        if t1 == t0:
            return 0
        starts, segments = self._composed()
        total = 0
        i = bisect_right(starts, t0) - 1
        n = len(segments)
        while i < n:
            seg = segments[i]
            seg_end = starts[i + 1] if i + 1 < n else self.end
            lo = max(seg.start, t0)
            hi = min(seg_end, t1)
            if hi > lo:
                total += seg.power_nw * (hi - lo)
            if seg_end >= t1:
                break
            i += 1
        return total

    def phase_energies_uj(self) -> Dict[str, float]:
        """Energy per phase label over the whole coverage"""
        totals: Dict[str, int] = {}
        for seg, seg_end in self._spans():
            if seg.phase is None or seg_end <= seg.start:
                continue
            totals[seg.phase] = totals.get(seg.phase, 0) + seg.power_nw * (seg_end - seg.start)
        return {phase: fj / FJ_PER_UJ for phase, fj in totals.items()}

    def phase_bounds(self, phase: str) -> Optional[Tuple[int, int]]:
        spans = [(seg.start, seg_end) for seg, seg_end in self._spans() if seg.phase == phase]
        if not spans:
            return None
        return spans[0][0], spans[-1][1]

    def peak_power_mw(self, t0: Optional[int] = None, t1: Optional[int] = None) -> float:
        t0 = self.start if t0 is None else t0
        t1 = self.end if t1 is None else t1
        peak = 0
        for seg, seg_end in self._spans():
            if seg_end > t0 and seg.start < t1:
                peak = max(peak, seg.power_nw)
        return peak / 1_000_000

    def to_csv(self, stream: TextIO) -> None:
        """Write (t_us, state, power_mw, phase) rows, one per segment start"""
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(["t_us", "state", "power_mw", "phase"])
        for seg in self._composed()[1]:
            writer.writerow([seg.start, seg.state.value, f"{seg.power_mw:.6f}", seg.phase or ""])
        writer.writerow([self.end, "End", "", ""])


def integrate(trace: PowerTrace, t0: int, t1: int) -> float:
    """Energy in uJ over [t0, t1]"""
    return trace.integrate_fj(t0, t1) / FJ_PER_UJ


def average_power(trace: PowerTrace, t0: int, t1: int) -> float:
    """Average power in mW over [t0, t1]"""
    if t1 <= t0:
        raise SimError("average_power needs t1 > t0", code=ErrorCode.INVALID_INPUT)
    # fJ / us = nW
    return trace.integrate_fj(t0, t1) / (t1 - t0) / 1_000_000


def excess_energy(trace: PowerTrace, t0: int, t1: int, floor_mw: Optional[float] = None) -> float:
    """Energy above the idle floor over [t0, t1], in uJ"""
    floor_nw = mw_to_nw(trace.profile.idle_standby_mw if floor_mw is None else floor_mw)
    return (trace.integrate_fj(t0, t1) - floor_nw * (t1 - t0)) / FJ_PER_UJ
