# handlers/commands_handlers/base.py
from typing import Iterable, List

from core.energy.calibration import Protocol
from core.utils.logger import get_logger

logger = get_logger(__name__)


class BaseCommandHandler:
    """Base class with shared utilities for command handlers"""

    def __init__(self, app):
        self.app = app

    @staticmethod
    def _emit(lines: Iterable[str]) -> None:
        """Summaries and report tables go to stdout; logs stay on stderr"""
        for line in lines:
            print(line)

    @staticmethod
    def _protocols(args) -> List[Protocol]:
        choice = getattr(args, "protocol", "both") or "both"
        if choice == "both":
            return [Protocol.BLE, Protocol.ESB]
        return [Protocol.parse(choice)]

    def _seed(self, args) -> int:
        return args.seed if getattr(args, "seed", None) is not None else self.app.settings.runtime.default_seed
