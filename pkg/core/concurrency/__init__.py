"""
Concurrency control utilities for bounded async operations
"""

from .semaphore_manager import (
    SemaphoreManager,
    bounded_gather,
    run_bounded,
    semaphore_manager,
)

__all__ = [
    'SemaphoreManager',
    'bounded_gather',
    'run_bounded',
    'semaphore_manager',
]
