"""
Command-line entry point: `sim <subcommand> [--config FILE.json] [--seed N] [--reps N] [--out DIR] [--uncalibrated]`
"""
import sys
from typing import List, Optional, Tuple

from config import settings as default_settings
from config.settings import Settings
from core.energy.calibration import CalibrationSet
from core.services.experiments import EXPERIMENT_NAMES, ExperimentService
from core.services.scenario import ScenarioContext, build_context, load_scenario_file
from core.utils.logger import get_logger, log_system_info, set_log_level, setup_logging
from handlers import CommandHandler
from repositories.calibration import CalibrationRepository
from repositories.results import ResultRepository
from repositories.targets import TargetRepository, TargetTable

logger = get_logger(__name__)

KNOWN_EXPERIMENTS = EXPERIMENT_NAMES + ("calibrate",)


class SimulatorApp:
    """Wires settings, repositories and services for one CLI invocation"""

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or default_settings
        self.calibrations = CalibrationRepository(".")
        self.handler = CommandHandler(self)

    def configure(self, args) -> None:
        setup_logging(self.settings.logging)
        if args.log_level:
            set_log_level(args.log_level)
        for problem in self.settings.validate_all():
            logger.warning(problem)
        log_system_info()

    def calibration(self, args) -> CalibrationSet:
        return self.calibrations.load_or_default(self.settings.runtime.calibration, args.uncalibrated)

    def context(self, args) -> Tuple[ScenarioContext, CalibrationSet]:
        return build_context(load_scenario_file(args.config), self.calibration(args))

    def experiment_service(self, args) -> ExperimentService:
        ctx, calib = self.context(args)
        return ExperimentService(
            ctx,
            calib,
            ResultRepository(args.out),
            defaults=self.settings.experiments,
            workers=self.settings.runtime.workers,
        )

    def targets(self) -> TargetTable:
        return TargetRepository(".", known_experiments=KNOWN_EXPERIMENTS).load(self.settings.runtime.targets)

    def run(self, argv: Optional[List[str]] = None) -> int:
        return self.handler.dispatch(argv)


def main(argv: Optional[List[str]] = None) -> int:
    return SimulatorApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
