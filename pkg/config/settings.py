"""
Centralized configuration management using Pydantic Settings
Environment variables (SIM_*, SIM_LOG_*, SIM_EXP_*) override the defaults
"""

from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = PROJECT_ROOT / "data"

SIM_VERSION = "1.0.0"

LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')


class RuntimeConfig(BaseSettings):
    """Runtime paths and parallelism"""

    model_config = SettingsConfigDict(
        env_prefix='SIM_',
        case_sensitive=False,
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore'
    )

    calibration: str = Field(
        default=str(DATA_DIR / "calibration.json"),
        description="Path of the fitted calibration set (JSON)"
    )
    targets: str = Field(
        default=str(DATA_DIR / "targets.json"),
        description="Path of the target table (JSON)"
    )
    out_dir: str = Field(default="results", description="Directory for CSV/SVG outputs")
    workers: int = Field(default=4, description="Sweep points simulated concurrently")
    default_seed: int = Field(default=1, description="Base seed when --seed is not given")

    @field_validator('workers')
    def validate_workers(cls, v):
        if not 1 <= v <= 64:
            raise ValueError("SIM_WORKERS must be between 1 and 64")
        return v

    @field_validator('default_seed')
    def validate_seed(cls, v):
        if not 0 <= v < 2 ** 64:
            raise ValueError("SIM_DEFAULT_SEED must be an unsigned 64-bit integer")
        return v


class LoggingConfig(BaseSettings):
    """Logging configuration"""

    model_config = SettingsConfigDict(
        env_prefix='SIM_LOG_',
        case_sensitive=False,
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore'
    )

    level: str = Field(default='WARNING', description="Root log level")
    dir: str = Field(default='logs', description="Directory of the rotating log file")
    file: str = Field(default='sim.log', description="Log file name")
    max_bytes: int = Field(default=5 * 1024 * 1024, description="Rotation size in bytes")
    backup_count: int = Field(default=5, description="Rotated files kept")
    to_file: bool = Field(default=False, description="Also log to the rotating file")

    @field_validator('level')
    def validate_level(cls, v):
        if v.upper() not in LOG_LEVELS:
            raise ValueError(f"SIM_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")
        return v.upper()


class ExperimentDefaults(BaseSettings):
    """Repetition counts and durations used when a scenario does not set them"""

    model_config = SettingsConfigDict(
        env_prefix='SIM_EXP_',
        case_sensitive=False,
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore'
    )

    stochastic_reps: int = Field(default=100, description="Repetitions of stochastic experiments")
    deterministic_reps: int = Field(default=1, description="Repetitions of deterministic experiments")
    node_duration_s: float = Field(default=30.0, description="Simulated loop-recorder run length")
    stream_duration_s: float = Field(default=1.0, description="Simulated length of one throughput point")
    sweep_reps: int = Field(default=3, description="Repetitions per point of the RSSI sweep")
    calibration_reps: int = Field(default=10, description="Seeds averaged per stochastic calibration anchor")
    property_packets: int = Field(default=100_000, description="Packets per slow property test")

    @field_validator('stochastic_reps', 'deterministic_reps', 'sweep_reps', 'calibration_reps', 'property_packets')
    def validate_positive(cls, v, info):
        if v < 1:
            raise ValueError(f"{info.field_name} must be >= 1")
        return v

    @field_validator('node_duration_s', 'stream_duration_s')
    def validate_duration(cls, v, info):
        if v <= 0:
            raise ValueError(f"{info.field_name} must be > 0")
        return v


# Scenario files (--config FILE.json). Unknown keys are rejected, missing keys keep defaults.

class _ScenarioSection(BaseModel):
    model_config = ConfigDict(extra='forbid')


class OverheadSection(_ScenarioSection):
    preamble_bits: Optional[int] = Field(default=None, ge=0)
    address_bits: Optional[int] = Field(default=None, ge=0)
    header_bits: Optional[int] = Field(default=None, ge=0)
    crc_bits: Optional[int] = Field(default=None, ge=0)
    upper_stack_bytes: Optional[int] = Field(default=None, ge=0)
    ifs_or_turnaround_us: Optional[int] = Field(default=None, ge=0)


class PerCurveSection(_ScenarioSection):
    rssi50_dbm: float
    width_db: float = Field(gt=0)


class PhySection(_ScenarioSection):
    ble_overhead: Optional[OverheadSection] = None
    esb_overhead: Optional[OverheadSection] = None
    per_curves: Dict[str, PerCurveSection] = Field(default_factory=dict)


class EsbSection(_ScenarioSection):
    phy: Optional[str] = None
    ard_us: Optional[int] = Field(default=None, gt=0)
    arc: Optional[int] = Field(default=None, ge=0, le=15)
    ack_queue_depth: Optional[int] = Field(default=None, ge=1)
    turnaround_us: Optional[int] = Field(default=None, ge=0)
    ack_payload_max: Optional[int] = Field(default=None, ge=0, le=252)


class BleSection(_ScenarioSection):
    phy: Optional[str] = None
    conn_interval_us: Optional[int] = Field(default=None, ge=7500)
    adv_interval_us: Optional[int] = Field(default=None, ge=20000)
    adv_jitter_max_us: Optional[int] = Field(default=None, ge=0)
    scan_interval_us: Optional[int] = Field(default=None, gt=0)
    scan_window_us: Optional[int] = Field(default=None, gt=0)
    ce_guard_us: Optional[int] = Field(default=None, ge=0)
    supervision_timeout_us: Optional[int] = Field(default=None, gt=0)
    tx_queue_depth: Optional[int] = Field(default=None, ge=1)


class NodeSection(_ScenarioSection):
    mode: Optional[str] = None
    threshold: Optional[int] = Field(default=None, ge=1, le=32)
    duration_s: Optional[float] = Field(default=None, gt=0)
    sample_rate_hz: Optional[int] = Field(default=None, gt=0)
    word_bytes: Optional[int] = Field(default=None, ge=1)


class SweepSection(_ScenarioSection):
    payloads: Optional[List[int]] = None
    rate_fractions: Optional[List[float]] = None
    rssi_dbm: Optional[List[float]] = None
    ack_sizes: Optional[List[int]] = None
    thresholds: Optional[List[int]] = None
    modes: Optional[List[str]] = None
    stream_duration_s: Optional[float] = Field(default=None, gt=0)
    cycle_period_s: Optional[float] = Field(default=None, gt=0)


class ScenarioFile(_ScenarioSection):
    """Validated content of a --config FILE.json scenario"""
    phy: PhySection = Field(default_factory=PhySection)
    esb: EsbSection = Field(default_factory=EsbSection)
    ble: BleSection = Field(default_factory=BleSection)
    node: NodeSection = Field(default_factory=NodeSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    rssi_dbm: Optional[float] = Field(default=None, ge=-120, le=0)


class Settings:
    """Main application settings"""

    def __init__(self):
        self.runtime = RuntimeConfig()
        self.logging = LoggingConfig()
        self.experiments = ExperimentDefaults()

    def validate_all(self) -> List[str]:
        """Validate all configuration sections and return errors"""
        errors = []

        for name, section in (
            ('Runtime', RuntimeConfig),
            ('Logging', LoggingConfig),
            ('Experiment', ExperimentDefaults),
        ):
            try:
                section()
            except Exception as e:
                errors.append(f"{name} config error: {e}")

        if not Path(self.runtime.targets).exists():
            errors.append(f"Target table not found: {self.runtime.targets}")

        return errors


settings = Settings()
