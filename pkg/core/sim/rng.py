"""
Seeded random streams: one counter-based Philox generator per (seed, stream id)
"""
import zlib
from typing import Dict, Iterator

import numpy as np

_BLOCK = 1024
_MASK32 = 0xFFFFFFFF


class RngStream:
    """Deterministic stream of draws for one actor.

    Draws are served from fixed-size blocks, so the value of the n-th draw
    depends only on (seed, stream_id, n).
    """

    def __init__(self, seed: int, stream_id: str):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self.stream_id = stream_id
        key = zlib.crc32(stream_id.encode('utf-8'))
        entropy = [seed & _MASK32, (seed >> 32) & _MASK32, key]
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
        self._block: list = []
        self._pos = 0
        self.draws = 0

    def random(self) -> float:
        """Uniform float in [0, 1)"""
        if self._pos >= len(self._block):
            self._block = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        value = self._block[self._pos]
        self._pos += 1
        self.draws += 1
        return value

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.random()

    def integer(self, low: int, high: int) -> int:
        """Uniform integer in [low, high)"""
        if high <= low:
            return low
        return low + min(int(self.random() * (high - low)), high - low - 1)

    def bernoulli(self, p: float) -> bool:
        if p <= 0.0:
            return False
        if p >= 1.0:
            return True
        return self.random() < p


class RngFactory:
    """Hands out one cached stream per stream id, so new actors never shift existing draws"""

    def __init__(self, seed: int):
        self.seed = seed
        self._streams: Dict[str, RngStream] = {}

    def stream(self, stream_id: str) -> RngStream:
        if stream_id not in self._streams:
            self._streams[stream_id] = RngStream(self.seed, stream_id)
        return self._streams[stream_id]


class SamplePeriod:
    """Integer sampling cadence whose periods sum to exactly one second per rate_hz samples.

    At 128 Hz this alternates 7812 and 7813 us.
    """

    def __init__(self, rate_hz: int):
        if rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        self.rate_hz = rate_hz
        self._index = 0

    def sample_time(self, n: int) -> int:
        """Time of the n-th sample (n >= 1), counted from the sampler start"""
        return (n * 1_000_000) // self.rate_hz

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        self._index += 1
        return self.sample_time(self._index) - self.sample_time(self._index - 1)
