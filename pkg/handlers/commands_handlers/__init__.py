# Command handlers module
from .base import BaseCommandHandler
from .calibration import CalibrationCommandHandler
from .experiment import ExperimentCommandHandler
from .report import ReportCommandHandler

__all__ = [
    'BaseCommandHandler',
    'CalibrationCommandHandler',
    'ExperimentCommandHandler',
    'ReportCommandHandler',
]
