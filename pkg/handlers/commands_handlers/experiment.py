from core.services.experiments import EXPERIMENT_NAMES, ExperimentSpec
from core.services.reporting import summarize
from core.utils.errors import EXIT_OK
from core.utils.logger import get_logger
from handlers.commands_handlers.base import BaseCommandHandler
from handlers.commands_handlers.report import ReportCommandHandler
from handlers.decorators import exit_on_error

logger = get_logger(__name__)


class ExperimentCommandHandler(BaseCommandHandler):
    """Handler for the experiment subcommands"""

    def _spec(self, args, name: str) -> ExperimentSpec:
        return ExperimentSpec(
            name=name,
            protocols=self._protocols(args),
            seed=self._seed(args),
            reps=args.reps,
            out=args.out,
        )

    def _run(self, args, name: str) -> int:
        service = self.app.experiment_service(args)
        run = service.run(self._spec(args, name))
        self._emit(point.line() for point in summarize(run.rows))
        self._emit([f"wrote {run.path}"])
        return EXIT_OK

    @exit_on_error
    def run_experiment(self, args) -> int:
        """sim <experiment>"""
        return self._run(args, args.command)

    @exit_on_error
    def run_all(self, args) -> int:
        """sim all: every experiment in order, then the target report"""
        for name in EXPERIMENT_NAMES:
            logger.info(f"Running {name}")
            self._run(args, name)
        return ReportCommandHandler(self.app).report_rows(args)
