import logging
import logging.handlers
import os
import sys
from pathlib import Path
from typing import Any, Optional

# attributes every LogRecord carries; anything else came in through `extra`
_RECORD_FIELDS = set(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}


class ExtraFieldsFormatter(logging.Formatter):
    """Appends `extra={...}` fields to the line as sorted key=value pairs"""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        fields = {k: v for k, v in vars(record).items() if k not in _RECORD_FIELDS}
        if not fields:
            return line
        return line + " | " + " ".join(f"{k}={fields[k]}" for k in sorted(fields))


class CentralizedLogger:
    """Process-wide logging: stderr always, a rotating file when enabled"""

    _instance: Optional['CentralizedLogger'] = None
    _initialized = False

    def __new__(cls) -> 'CentralizedLogger':
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._initialized = True
        self.configured = False
        self.level = logging.WARNING
        self.to_file = False
        self.log_file = Path("logs") / "sim.log"
        self.max_bytes = 5 * 1024 * 1024
        self.backup_count = 5

    def setup_logging(self, config: Any = None):
        """Install handlers from a LoggingConfig; repeated calls replace the previous setup"""
        if config is not None:
            self.level = self.parse_level(config.level) or logging.WARNING
            self.to_file = config.to_file
            self.log_file = Path(config.dir) / config.file
            self.max_bytes = config.max_bytes
            self.backup_count = config.backup_count

        root = logging.getLogger()
        root.handlers.clear()
        root.setLevel(self.level)

        formatter = ExtraFieldsFormatter(
            fmt='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

        # stdout is reserved for summaries and report tables
        handlers: list = [logging.StreamHandler(sys.stderr)]
        if self.to_file:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.handlers.RotatingFileHandler(
                filename=self.log_file,
                maxBytes=self.max_bytes,
                backupCount=self.backup_count,
                encoding='utf-8'
            ))
        for handler in handlers:
            handler.setFormatter(formatter)
            root.addHandler(handler)

        for noisy in ("matplotlib", "PIL", "asyncio"):
            logging.getLogger(noisy).setLevel(logging.WARNING)

        self.configured = True
        logging.getLogger(__name__).debug("Logging configured", extra={
            "level": logging.getLevelName(self.level),
            "log_file": str(self.log_file) if self.to_file else None,
        })

    @staticmethod
    def parse_level(level: str) -> Optional[int]:
        value = logging.getLevelName(level.upper())
        return value if isinstance(value, int) else None

    def set_level(self, level: str):
        value = self.parse_level(level)
        if value is None:
            logging.getLogger(__name__).warning(f"Ignoring unknown log level {level!r}")
            return
        self.level = value
        logging.getLogger().setLevel(value)

    def log_system_info(self):
        import platform

        import psutil

        logging.getLogger(__name__).debug("Host", extra={
            "platform": platform.platform(),
            "python": platform.python_version(),
            "cpus": psutil.cpu_count(),
            "memory_gb": round(psutil.virtual_memory().total / 1024 ** 3, 1),
            "cwd": os.getcwd(),
        })

    def log_run_info(self, spec: Any, calib_hash: str):
        logging.getLogger(__name__).info(f"Running experiment {spec.name}", extra={
            "experiment": spec.name,
            "protocol": ",".join(p.value for p in spec.protocols),
            "seed": spec.seed,
            "calib_hash": calib_hash,
        })


_logger_instance = CentralizedLogger()


def get_logger(name: Optional[str] = None) -> logging.Logger:
    return logging.getLogger(name or "sim")


def setup_logging(config: Any = None) -> CentralizedLogger:
    """Called once per CLI invocation, before any command runs"""
    _logger_instance.setup_logging(config)
    return _logger_instance


def set_log_level(level: str):
    _logger_instance.set_level(level)


def log_system_info():
    _logger_instance.log_system_info()


def log_run_info(spec: Any, calib_hash: str):
    _logger_instance.log_run_info(spec, calib_hash)
