"""
Bounded concurrency for sweep points

Each sweep point owns its simulator and random streams, so points can run in
worker threads. The semaphore only caps how many run at once; results always
come back in submission order.
"""

import asyncio
import time
from contextlib import asynccontextmanager
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

from core.utils.logger import get_logger

logger = get_logger(__name__)


@dataclass
class DomainUsage:
    """Slot usage of one domain since the last reset"""
    limit: int
    active: int = 0
    peak: int = 0
    completed: int = 0
    busy_seconds: float = 0.0


class SemaphoreManager:
    """One asyncio.Semaphore per work domain, created on the running loop"""

    DEFAULT_LIMITS = {
        'simulation': 4,
        'plotting': 2,
    }

    def __init__(self, custom_limits: Optional[Dict[str, int]] = None):
        self.limits = {**self.DEFAULT_LIMITS, **(custom_limits or {})}
        self._semaphores: Dict[str, asyncio.Semaphore] = {}
        self._usage: Dict[str, DomainUsage] = {}

    def usage(self, domain: str) -> DomainUsage:
        if domain not in self._usage:
            self._usage[domain] = DomainUsage(limit=self.limits.get(domain, 1))
        return self._usage[domain]

    def _semaphore(self, domain: str) -> asyncio.Semaphore:
        if domain not in self._semaphores:
            self._semaphores[domain] = asyncio.Semaphore(self.limits.get(domain, 1))
        return self._semaphores[domain]

    @asynccontextmanager
    async def acquire(self, domain: str, point: Optional[str] = None):
        """Hold one slot of `domain` for the duration of the block"""
        usage = self.usage(domain)
        async with self._semaphore(domain):
            usage.active += 1
            usage.peak = max(usage.peak, usage.active)
            started = time.monotonic()
            try:
                yield
            finally:
                elapsed = time.monotonic() - started
                usage.active -= 1
                usage.completed += 1
                usage.busy_seconds += elapsed
                logger.debug("Point finished", extra={
                    "domain": domain,
                    "point": point,
                    "seconds": round(elapsed, 4),
                    "active": usage.active,
                })

    def set_limit(self, domain: str, limit: int) -> None:
        if limit <= 0:
            raise ValueError(f"{domain} limit must be positive, got {limit}")
        self.limits[domain] = limit
        self._semaphores.pop(domain, None)
        self._usage.pop(domain, None)

    def reset(self) -> None:
        # semaphores are bound to the loop that created them
        self._semaphores.clear()
        self._usage.clear()


semaphore_manager = SemaphoreManager()


async def bounded_gather(
    *tasks: Callable[[], Any],
    domain: str = 'simulation',
    manager: Optional[SemaphoreManager] = None
) -> List[Any]:
    """
    Run blocking callables in worker threads under the domain limit

    The first exception is re-raised once every task has finished.
    """
    manager = manager or semaphore_manager

    async def run_one(index: int, task: Callable[[], Any]):
        async with manager.acquire(domain, point=f"{domain}[{index}]"):
            return await asyncio.to_thread(task)

    results = await asyncio.gather(*(run_one(i, task) for i, task in enumerate(tasks)), return_exceptions=True)
    for result in results:
        if isinstance(result, BaseException):
            raise result
    return list(results)


def run_bounded(tasks: List[Callable[[], Any]], workers: int, domain: str = 'simulation') -> List[Any]:
    """Synchronous entry point: one event loop per batch of sweep points"""
    if not tasks:
        return []
    semaphore_manager.reset()
    semaphore_manager.set_limit(domain, workers)
    results = asyncio.run(bounded_gather(*tasks, domain=domain))
    usage = semaphore_manager.usage(domain)
    logger.debug("Batch finished", extra={
        "domain": domain,
        "points": usage.completed,
        "peak": usage.peak,
        "busy_seconds": round(usage.busy_seconds, 4),
    })
    return results
