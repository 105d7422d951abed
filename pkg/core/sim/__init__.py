"""
Discrete-event simulation core
"""

from .engine import US_PER_MS, US_PER_S, EventHandle, SimEvent, Simulator, SimTime
from .rng import RngFactory, RngStream, SamplePeriod

__all__ = [
    'US_PER_MS',
    'US_PER_S',
    'EventHandle',
    'SimEvent',
    'Simulator',
    'SimTime',
    'RngFactory',
    'RngStream',
    'SamplePeriod',
]
