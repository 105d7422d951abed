import sys
import traceback
from functools import wraps
from pathlib import Path
from typing import Callable

from core.utils.errors import ErrorFactory, SimError
from core.utils.logger import get_logger

logger = get_logger(__name__)

FAULT_TRACE_FILE = "fault-trace.txt"


def write_fault_trace(out_dir: str, exc: BaseException) -> Path:
    """Last dispatched events plus the Python traceback of a simulation fault"""
    path = Path(out_dir) / FAULT_TRACE_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{type(exc).__name__}: {exc}\n\n")
        fh.write("last dispatched events (fire_at, seq, target, kind):\n")
        fh.write((getattr(exc, "sim_trace", None) or "<no simulator events>") + "\n\n")
        fh.write("".join(traceback.format_exception(type(exc), exc, exc.__traceback__)))
    return path


def exit_on_error(func: Callable[..., int]) -> Callable[..., int]:
    """Map errors raised by a command to the CLI exit codes"""

    @wraps(func)
    def wrapper(self, args, *extra, **kwargs) -> int:
        experiment = getattr(args, "command", None)
        try:
            return func(self, args, *extra, **kwargs)
        except Exception as e:
            if not isinstance(e, SimError):
                logger.debug("Unexpected exception", exc_info=True)
            response = ErrorFactory.from_exception(e, experiment=experiment)
            print(response.to_line(), file=sys.stderr)
            if response.is_fault:
                path = write_fault_trace(getattr(args, "out", "."), e)
                print(f"fault trace written to {path}", file=sys.stderr)
            return response.exit_code

    return wrapper
