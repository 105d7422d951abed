from pathlib import Path

from core.services.plotting import PLOT_KINDS, plot
from core.services.reporting import report
from core.utils.errors import EXIT_OK
from core.utils.logger import get_logger
from handlers.commands_handlers.base import BaseCommandHandler
from handlers.decorators import exit_on_error
from repositories.results import ResultRepository

logger = get_logger(__name__)


class ReportCommandHandler(BaseCommandHandler):
    """Handler for `sim report` and `sim plot`"""

    def report_rows(self, args) -> int:
        table = self.app.targets()
        rows = ResultRepository(args.out).load_all()
        outcome = report(rows, table)
        self._emit(outcome.lines())
        return outcome.exit_code

    @exit_on_error
    def report(self, args) -> int:
        return self.report_rows(args)

    @exit_on_error
    def plot(self, args) -> int:
        kinds = [args.kind] if args.kind else list(PLOT_KINDS)
        written = 0
        for kind in kinds:
            csv_path = Path(args.csv) if args.csv else Path(args.out) / f"{kind}.csv"
            if not args.csv and not csv_path.exists():
                logger.info(f"No {csv_path.name} in {args.out}, skipping")
                continue
            svg = plot(csv_path, kind)
            self._emit([f"wrote {svg}"])
            written += 1
        if written == 0:
            logger.warning(f"Nothing to plot in {args.out}")
        return EXIT_OK
