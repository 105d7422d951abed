"""
Centralized configuration package
"""

from .settings import (
    DATA_DIR,
    SIM_VERSION,
    ExperimentDefaults,
    LoggingConfig,
    RuntimeConfig,
    ScenarioFile,
    Settings,
    settings,
)

__all__ = [
    'DATA_DIR',
    'SIM_VERSION',
    'ExperimentDefaults',
    'LoggingConfig',
    'RuntimeConfig',
    'ScenarioFile',
    'Settings',
    'settings',
]
