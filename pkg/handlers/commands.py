import argparse
import sys
from typing import Callable, Dict, List, Optional

from config.settings import LOG_LEVELS
from core.services.experiments import EXPERIMENT_NAMES
from core.services.plotting import PLOT_KINDS
from core.utils.errors import EXIT_USAGE
from core.utils.logger import get_logger
from handlers.commands_handlers.calibration import CalibrationCommandHandler
from handlers.commands_handlers.experiment import ExperimentCommandHandler
from handlers.commands_handlers.report import ReportCommandHandler

logger = get_logger(__name__)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits on bad usage; we want our own exit code and no SystemExit inside tests"""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class CommandHandler:
    """Centralized command handler that coordinates all sub-handlers"""

    def __init__(self, app):
        self.app = app

        # Initialize sub-handlers
        self.experiment_handler = ExperimentCommandHandler(app)
        self.calibration_handler = CalibrationCommandHandler(app)
        self.report_handler = ReportCommandHandler(app)

        self.commands: Dict[str, Callable[[argparse.Namespace], int]] = {}
        self.parser = self.build_parser()

    def _common(self, parser: argparse.ArgumentParser) -> None:
        runtime = self.app.settings.runtime
        parser.add_argument("--config", metavar="FILE.json", help="scenario file overriding link/node defaults")
        parser.add_argument("--seed", type=int, default=None, help=f"base seed (default {runtime.default_seed})")
        parser.add_argument("--reps", type=int, default=None, help="repetitions per sweep point")
        parser.add_argument("--out", default=runtime.out_dir, help="directory for CSV/SVG outputs")
        parser.add_argument("--uncalibrated", action="store_true", help="use built-in constants")
        parser.add_argument("--protocol", choices=("ble", "esb", "both"), default="both")
        parser.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, default=None)

    def build_parser(self) -> argparse.ArgumentParser:
        parser = _Parser(prog="sim", description="BLE / Enhanced ShockBurst discrete-event simulator")
        sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
        sub.required = True

        # Experiments
        for name in EXPERIMENT_NAMES:
            p = sub.add_parser(name, help=f"run the {name} experiment")
            self._common(p)
            self.commands[name] = self.experiment_handler.run_experiment

        p = sub.add_parser("all", help="run every experiment, then report")
        self._common(p)
        self.commands["all"] = self.experiment_handler.run_all

        # Calibration
        p = sub.add_parser("calibrate", help="fit the calibration constants to the measured anchors")
        self._common(p)
        p.add_argument("--save", metavar="FILE.json", help="where to write the fitted set (default OUT/calibration.json)")
        p.add_argument("--max-iterations", type=int, default=50)
        self.commands["calibrate"] = self.calibration_handler.calibrate

        # Reporting
        p = sub.add_parser("report", help="compare the CSVs in --out against the target table")
        self._common(p)
        self.commands["report"] = self.report_handler.report

        p = sub.add_parser("plot", help="render experiment CSVs as SVG")
        self._common(p)
        p.add_argument("kind", nargs="?", choices=sorted(PLOT_KINDS), help="plot kind (default: every CSV found)")
        p.add_argument("--csv", help="input CSV (default OUT/<kind>.csv)")
        self.commands["plot"] = self.report_handler.plot

        return parser

    def parse(self, argv: Optional[List[str]]) -> argparse.Namespace:
        args = self.parser.parse_args(argv)
        if args.reps is not None and args.reps < 1:
            raise UsageError("--reps must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        return args

    def dispatch(self, argv: Optional[List[str]] = None) -> int:
        try:
            args = self.parse(argv)
        except UsageError as e:
            self.parser.print_usage(sys.stderr)
            print(e, file=sys.stderr)
            return EXIT_USAGE
        self.app.configure(args)
        return self.commands[args.command](args)
