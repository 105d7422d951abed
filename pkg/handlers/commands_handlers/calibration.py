from pathlib import Path

from core.services.calibration import CalibrationService
from core.utils.errors import EXIT_OK
from core.utils.logger import get_logger
from handlers.commands_handlers.base import BaseCommandHandler
from handlers.decorators import exit_on_error
from repositories.calibration import CalibrationRepository
from repositories.results import ResultRepository, ResultRow

logger = get_logger(__name__)


class CalibrationCommandHandler(BaseCommandHandler):
    """Handler for `sim calibrate`"""

    @exit_on_error
    def calibrate(self, args) -> int:
        ctx, start = self.app.context(args)
        reps = args.reps or self.app.settings.experiments.calibration_reps
        seed = self._seed(args)
        service = CalibrationService(ctx, reps=reps, seed=seed)
        outcome = service.calibrate(start, max_iterations=args.max_iterations)
        self._emit(outcome.lines())

        calib_hash = outcome.calib.content_hash()
        rows = []
        for check in outcome.checks:
            for metric, value in (("target", check.anchor.target), ("fitted", check.value),
                                  ("residual", check.residual)):
                rows.append(ResultRow(
                    experiment="calibrate", protocol=check.anchor.protocol.value, x_name="anchor",
                    x_value=check.anchor.name, metric=metric, value=float(value),
                    unit=check.anchor.unit if metric != "residual" else "ratio",
                    seed=seed, calib_hash=calib_hash,
                ))
        ResultRepository(args.out).save(rows, "calibrate")

        # a failed fit is still written so the residuals can be inspected
        save_to = Path(args.save) if args.save else Path(args.out) / "calibration.json"
        path = CalibrationRepository(save_to.parent).save(outcome.calib, save_to.name)
        self._emit([f"wrote {path}"])
        outcome.raise_for_failure()
        return EXIT_OK
