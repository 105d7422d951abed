"""
Energy model: power-state traces and calibration constants
"""

from .calibration import (
    DEFAULT_CALIBRATION,
    BleCalibration,
    CalibrationSet,
    EsbCalibration,
    NodeCalibration,
    PowerCalibration,
    Protocol,
)
from .power import (
    PowerProfile,
    PowerState,
    PowerTrace,
    Segment,
    average_power,
    excess_energy,
    integrate,
)

__all__ = [
    'DEFAULT_CALIBRATION',
    'BleCalibration',
    'CalibrationSet',
    'EsbCalibration',
    'NodeCalibration',
    'PowerCalibration',
    'Protocol',
    'PowerProfile',
    'PowerState',
    'PowerTrace',
    'Segment',
    'average_power',
    'excess_energy',
    'integrate',
]
