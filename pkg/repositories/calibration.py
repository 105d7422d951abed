from pathlib import Path
from typing import Any, Dict

from core.energy.calibration import DEFAULT_CALIBRATION, CalibrationSet
from core.utils.errors import ErrorCode, SimError
from core.utils.logger import get_logger
from repositories.base import FileRepository, PathLike

logger = get_logger(__name__)


class CalibrationRepository(FileRepository[CalibrationSet]):
    """Versioned calibration sets stored as canonical JSON"""

    def _entity_to_dict(self, calib: CalibrationSet) -> Dict[str, Any]:
        return calib.to_dict()

    def _dict_to_entity(self, data: Dict[str, Any]) -> CalibrationSet:
        if not isinstance(data, dict):
            raise SimError("Calibration file must hold a JSON object", code=ErrorCode.INVALID_CONFIGURATION)
        return CalibrationSet.from_dict(data)

    def load_or_default(self, name: PathLike, uncalibrated: bool = False) -> CalibrationSet:
        """The fitted set at `name`; built-in defaults with --uncalibrated or when no file exists"""
        if uncalibrated:
            logger.info("Running with built-in (uncalibrated) constants")
            return DEFAULT_CALIBRATION
        path = self.path_for(name)
        if not path.exists():
            logger.warning(f"Calibration set {path} not found, using built-in constants")
            return DEFAULT_CALIBRATION
        calib = self._dict_to_entity(self._read_json(path))
        logger.info(f"Loaded calibration set {path}", extra={"calib_hash": calib.content_hash()})
        return calib

    def save(self, calib: CalibrationSet, name: PathLike) -> Path:
        path = super().save(calib, name)
        logger.info(f"Saved calibration set {path}", extra={"calib_hash": calib.content_hash()})
        return path
