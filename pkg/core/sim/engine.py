"""
Discrete-event engine: integer-microsecond virtual clock and a (fire_at, seq) ordered queue
"""
import heapq
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Deque, List, Optional, Tuple

from core.utils.errors import SchedulingError
from core.utils.logger import get_logger

logger = get_logger(__name__)

SimTime = int  # microseconds since simulation start

US_PER_MS = 1_000
US_PER_S = 1_000_000


@dataclass
class SimEvent:
    """One scheduled event; (fire_at, seq) is unique within a run"""
    fire_at: SimTime
    seq: int
    target: str
    kind: str
    handler: Callable[['SimEvent'], None] = field(repr=False)
    payload: Any = field(default=None, repr=False)
    cancelled: bool = False


class EventHandle:
    """Returned by schedule(); lets the owner cancel a pending event"""

    __slots__ = ('_event',)

    def __init__(self, event: SimEvent):
        self._event = event

    @property
    def fire_at(self) -> SimTime:
        return self._event.fire_at

    @property
    def active(self) -> bool:
        return not self._event.cancelled

    def cancel(self) -> bool:
        if self._event.cancelled:
            return False
        self._event.cancelled = True
        return True


class Simulator:
    """Single-threaded event loop owned by one simulation instance"""

    def __init__(self, trace_depth: int = 64):
        self._now: SimTime = 0
        self._seq = 0
        self._queue: List[Tuple[int, int, SimEvent]] = []
        self.dispatched = 0
        self._recent: Deque[SimEvent] = deque(maxlen=trace_depth)

    @property
    def now(self) -> SimTime:
        return self._now

    @property
    def pending(self) -> int:
        return sum(1 for _, _, e in self._queue if not e.cancelled)

    @property
    def recent_events(self) -> List[SimEvent]:
        """Most recently dispatched events, oldest first"""
        return list(self._recent)

    def schedule(
        self,
        fire_at: SimTime,
        target: str,
        kind: str,
        handler: Callable[[SimEvent], None],
        payload: Any = None
    ) -> EventHandle:
        if fire_at < self._now:
            raise SchedulingError(
                f"{target}/{kind} scheduled at {fire_at} us, clock is at {self._now} us",
                details={"target": target, "kind": kind, "fire_at": fire_at, "now": self._now}
            )
        event = SimEvent(int(fire_at), self._seq, target, kind, handler, payload)
        self._seq += 1
        heapq.heappush(self._queue, (event.fire_at, event.seq, event))
        return EventHandle(event)

    def schedule_in(
        self,
        delay: SimTime,
        target: str,
        kind: str,
        handler: Callable[[SimEvent], None],
        payload: Any = None
    ) -> EventHandle:
        return self.schedule(self._now + delay, target, kind, handler, payload)

    def cancel(self, handle: EventHandle) -> bool:
        return handle.cancel()

    def _pop_ready(self, t_end: Optional[SimTime]) -> Optional[SimEvent]:
        while self._queue:
            fire_at, _, event = self._queue[0]
            if t_end is not None and fire_at > t_end:
                return None
            heapq.heappop(self._queue)
            if event.cancelled:
                continue
            return event
        return None

    def _dispatch(self, event: SimEvent) -> None:
        # mark consumed so a late cancel() is a no-op
        event.cancelled = True
        self._now = event.fire_at
        self._recent.append(event)
        self.dispatched += 1
        try:
            event.handler(event)
        except Exception as e:
            # innermost simulator wins; the CLI writes this to fault-trace.txt
            if getattr(e, "sim_trace", None) is None:
                e.sim_trace = self.dump_recent()
            raise

    def run_until(self, t_end: SimTime) -> int:
        """Dispatch every event with fire_at <= t_end, then set the clock to t_end"""
        if t_end < self._now:
            raise SchedulingError(
                f"run_until({t_end}) is behind the clock ({self._now} us)",
                details={"t_end": t_end, "now": self._now}
            )
        count = 0
        while True:
            event = self._pop_ready(t_end)
            if event is None:
                break
            self._dispatch(event)
            count += 1
        self._now = t_end
        return count

    def run(self, limit: Optional[int] = None) -> int:
        """Drain the queue (or stop after `limit` dispatches)"""
        count = 0
        while limit is None or count < limit:
            event = self._pop_ready(None)
            if event is None:
                break
            self._dispatch(event)
            count += 1
        return count

    def dump_recent(self) -> str:
        """Plain-text listing of the last dispatched events"""
        return "\n".join(
            f"{e.fire_at:>12} {e.seq:>8} {e.target:<12} {e.kind}" for e in self._recent
        )
