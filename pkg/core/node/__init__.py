"""
Sensor-node model: FIFO, sampler and communication pipelines
"""

from .fifo import FifoBuffer, StepOutcome
from .node import (
    ESB_ONOFF_MAX_THRESHOLD,
    ESB_ONOFF_MIN_THRESHOLD,
    CommMode,
    NodeScenario,
    ScenarioResult,
    SensorNode,
    run_scenario,
    validate,
)

__all__ = [
    'FifoBuffer',
    'StepOutcome',
    'ESB_ONOFF_MAX_THRESHOLD',
    'ESB_ONOFF_MIN_THRESHOLD',
    'CommMode',
    'NodeScenario',
    'ScenarioResult',
    'SensorNode',
    'run_scenario',
    'validate',
]
