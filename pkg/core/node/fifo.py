"""
Sensor FIFO with a threshold interrupt
"""
from collections import deque
from enum import Enum
from typing import Deque, List, Optional

from core.utils.errors import ErrorCode, SimError


class StepOutcome(Enum):
    BUFFERED = "Buffered"
    INTERRUPT_RAISED = "InterruptRaised"
    OVERFLOWED = "Overflowed"


class FifoBuffer:
    """Word FIFO that remembers when each sample was taken"""

    def __init__(self, threshold: int, depth: int = 32, word_bytes: int = 3):
        if depth < 1 or word_bytes < 1:
            raise SimError("FIFO depth and word size must be >= 1", code=ErrorCode.INVALID_CONFIGURATION)
        if not 1 <= threshold <= depth:
            raise SimError(
                f"FIFO threshold {threshold} outside [1, {depth}]",
                code=ErrorCode.INVALID_CONFIGURATION,
                details={"threshold": threshold, "depth": depth}
            )
        self.threshold = threshold
        self.depth = depth
        self.word_bytes = word_bytes
        self._words: Deque[int] = deque()
        self.overflow_events = 0
        self.pushed = 0

    @property
    def count(self) -> int:
        return len(self._words)

    @property
    def interrupt_asserted(self) -> bool:
        """Level of the interrupt line: held while count >= threshold"""
        return len(self._words) >= self.threshold

    def push(self, sampled_at: int) -> StepOutcome:
        if len(self._words) >= self.depth:
            self.overflow_events += 1
            return StepOutcome.OVERFLOWED
        self._words.append(sampled_at)
        self.pushed += 1
        if len(self._words) == self.threshold:
            return StepOutcome.INTERRUPT_RAISED
        return StepOutcome.BUFFERED

    def drain(self, limit: Optional[int] = None) -> List[int]:
        """Read out the words present now (oldest first); returns their sample times"""
        n = len(self._words) if limit is None else min(limit, len(self._words))
        return [self._words.popleft() for _ in range(n)]

    def payload_bytes(self, words: int) -> int:
        return words * self.word_bytes
