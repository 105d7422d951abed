"""
Simulator error hierarchy, error schema and CLI exit-code mapping
"""
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional

from core.utils.logger import get_logger

logger = get_logger(__name__)


class ErrorCode(Enum):
    """Standardized error codes across the simulator"""
    # Validation
    INVALID_INPUT = "INVALID_INPUT"
    PAYLOAD_TOO_LARGE = "PAYLOAD_TOO_LARGE"
    QUEUE_FULL = "QUEUE_FULL"
    INVALID_SPEC = "INVALID_SPEC"
    INVALID_CONFIGURATION = "INVALID_CONFIGURATION"
    SCHEMA_MISMATCH = "SCHEMA_MISMATCH"
    NOT_FOUND = "NOT_FOUND"

    # Numerics
    WINDOW_OUT_OF_COVERAGE = "WINDOW_OUT_OF_COVERAGE"
    DEGENERATE_FIT = "DEGENERATE_FIT"
    CALIBRATION_FAILED = "CALIBRATION_FAILED"

    # Engine
    SCHEDULE_IN_PAST = "SCHEDULE_IN_PAST"
    SIMULATION_FAULT = "SIMULATION_FAULT"


# Process exit codes of the CLI
EXIT_OK = 0
EXIT_REPORT_FAILED = 1
EXIT_USAGE = 2
EXIT_FAULT = 3

_EXIT_CODES = {
    ErrorCode.INVALID_INPUT: EXIT_USAGE,
    ErrorCode.PAYLOAD_TOO_LARGE: EXIT_USAGE,
    ErrorCode.QUEUE_FULL: EXIT_USAGE,
    ErrorCode.INVALID_SPEC: EXIT_USAGE,
    ErrorCode.INVALID_CONFIGURATION: EXIT_USAGE,
    ErrorCode.SCHEMA_MISMATCH: EXIT_USAGE,
    ErrorCode.NOT_FOUND: EXIT_USAGE,
    ErrorCode.CALIBRATION_FAILED: EXIT_REPORT_FAILED,
    ErrorCode.WINDOW_OUT_OF_COVERAGE: EXIT_FAULT,
    ErrorCode.DEGENERATE_FIT: EXIT_FAULT,
    ErrorCode.SCHEDULE_IN_PAST: EXIT_FAULT,
    ErrorCode.SIMULATION_FAULT: EXIT_FAULT,
}


class SimError(Exception):
    """Base class of every error raised by the simulator"""

    code: ErrorCode = ErrorCode.SIMULATION_FAULT

    def __init__(
        self,
        message: str,
        code: Optional[ErrorCode] = None,
        details: Optional[Dict[str, Any]] = None,
        correlation_id: Optional[str] = None
    ):
        super().__init__(message)
        self.message = message
        if code is not None:
            self.code = code
        self.details = details or {}
        self.correlation_id = correlation_id or str(uuid.uuid4())[:8]

    @property
    def exit_code(self) -> int:
        return exit_code_for(self.code)


class PayloadTooLarge(SimError):
    code = ErrorCode.PAYLOAD_TOO_LARGE


class QueueFull(SimError):
    code = ErrorCode.QUEUE_FULL


class SchedulingError(SimError):
    code = ErrorCode.SCHEDULE_IN_PAST


class CoverageError(SimError):
    code = ErrorCode.WINDOW_OUT_OF_COVERAGE


class FitError(SimError):
    code = ErrorCode.DEGENERATE_FIT


class SchemaMismatch(SimError):
    code = ErrorCode.SCHEMA_MISMATCH


class SpecError(SimError):
    code = ErrorCode.INVALID_SPEC


class ConfigurationRejected(SimError):
    code = ErrorCode.INVALID_CONFIGURATION


class CalibrationFailed(SimError):
    code = ErrorCode.CALIBRATION_FAILED


def exit_code_for(code: ErrorCode) -> int:
    return _EXIT_CODES.get(code, EXIT_FAULT)


@dataclass
class ErrorResponse:
    """What the CLI reports for a failed command"""
    code: ErrorCode
    message: str
    exit_code: int
    correlation_id: str
    experiment: Optional[str] = None
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def is_fault(self) -> bool:
        return self.exit_code == EXIT_FAULT

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "code": self.code.value,
            "message": self.message,
            "exit_code": self.exit_code,
            "correlation_id": self.correlation_id,
            "experiment": self.experiment,
        }
        if self.details:
            data["details"] = self.details
        return data

    def to_line(self) -> str:
        where = f" in {self.experiment}" if self.experiment else ""
        return f"error [{self.code.value}]{where}: {self.message} (ref {self.correlation_id})"


class ErrorFactory:
    """Turns anything a command raised into an ErrorResponse and logs it once"""

    @staticmethod
    def create_error(
        code: ErrorCode,
        message: str,
        correlation_id: Optional[str] = None,
        details: Optional[Dict[str, Any]] = None,
        experiment: Optional[str] = None
    ) -> ErrorResponse:
        response = ErrorResponse(
            code=code,
            message=message,
            exit_code=exit_code_for(code),
            correlation_id=correlation_id or str(uuid.uuid4())[:8],
            experiment=experiment,
            details=details or {},
        )
        log = logger.error if response.is_fault else logger.warning
        log(message, extra={
            "error_code": code.value,
            "exit_code": response.exit_code,
            "correlation_id": response.correlation_id,
            "experiment": experiment,
        })
        return response

    @staticmethod
    def from_exception(exc: BaseException, experiment: Optional[str] = None) -> ErrorResponse:
        if isinstance(exc, SimError):
            return ErrorFactory.create_error(
                exc.code,
                exc.message,
                correlation_id=exc.correlation_id,
                details=exc.details,
                experiment=experiment,
            )
        # anything outside the hierarchy is a simulator bug
        return ErrorFactory.create_error(
            ErrorCode.SIMULATION_FAULT,
            f"{type(exc).__name__}: {exc}",
            details={"exception": type(exc).__name__},
            experiment=experiment,
        )
