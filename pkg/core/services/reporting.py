"""
Slope fits, per-point summaries and the target comparison behind `sim report`
"""
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from core.utils.errors import EXIT_OK, EXIT_REPORT_FAILED, FitError
from core.utils.logger import get_logger
from repositories.results import ResultRow, format_number
from repositories.targets import TargetEntry, TargetTable

logger = get_logger(__name__)

NOT_RUN = "not run"


@dataclass(frozen=True)
class SlopeFit:
    k: float
    intercept: float
    r2: float
    points: int


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> SlopeFit:
    """Ordinary least squares y = k*x + intercept"""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise FitError("x and y must have the same length", details={"x": len(x), "y": len(y)})
    if len(x) < 3:
        raise FitError(f"A slope fit needs at least 3 points, got {len(x)}", details={"points": len(x)})
    if np.ptp(x) == 0:
        raise FitError("x has no variance; the slope is undefined", details={"x": float(x[0])})
    design = np.column_stack([x, np.ones_like(x)])
    (k, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - (k * x + intercept)
    ss_res = float(np.sum(residuals ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return SlopeFit(k=float(k), intercept=float(intercept), r2=r2, points=len(x))


def fit_rows(rows: Iterable[ResultRow], x_metric: str, y_metric: str) -> SlopeFit:
    """Fit y_metric against x_metric, pairing rows measured at the same point and seed"""
    xs: Dict[Tuple, float] = {}
    ys: Dict[Tuple, float] = {}
    for row in rows:
        key = (row.protocol, str(row.x_value), row.seed)
        if row.metric == x_metric:
            xs[key] = row.value
        elif row.metric == y_metric:
            ys[key] = row.value
    keys = [key for key in xs if key in ys]
    return fit_slope([xs[key] for key in keys], [ys[key] for key in keys])


@dataclass
class PointSummary:
    experiment: str
    protocol: str
    x_name: str
    x_value: object
    metric: str
    unit: str
    values: List[float] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def std(self) -> float:
        return float(np.std(self.values))

    def line(self) -> str:
        return (f"{self.experiment} {self.protocol} {self.x_name}={format_number(self.x_value)} "
                f"{self.metric}: {self.mean:.3f} ± {self.std:.3f} {self.unit} (n={len(self.values)})")


def summarize(rows: Iterable[ResultRow]) -> List[PointSummary]:
    """Mean and std per (protocol, point, metric), in first-seen order"""
    points: Dict[Tuple, PointSummary] = {}
    for row in rows:
        key = (row.experiment, row.protocol, row.x_name, str(row.x_value), row.metric)
        if key not in points:
            points[key] = PointSummary(row.experiment, row.protocol, row.x_name, row.x_value, row.metric, row.unit)
        points[key].values.append(row.value)
    return list(points.values())


@dataclass
class TargetCheck:
    entry: TargetEntry
    value: Optional[float]
    passed: bool
    note: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        e = self.entry
        if self.value is None:
            return f"{self.status:<5} {e.id:<36} {self.note}"
        if e.comparison == "at_least":
            expected = f">= {format_number(e.target)}"
        elif e.comparison == "at_most":
            expected = f"<= {format_number(e.target)}"
        else:
            lo, hi = e.bounds()
            expected = f"in [{lo:.4g}, {hi:.4g}]"
        return (f"{self.status:<5} {e.id:<36} {self.value:>12.4f} {expected:<26} "
                f"residual {e.residual(self.value):+.1%}{'  ' + self.note if self.note else ''}")


@dataclass
class ReportOutcome:
    checks: List[TargetCheck]

    @property
    def failed(self) -> List[TargetCheck]:
        return [c for c in self.checks if not c.passed]

    @property
    def exit_code(self) -> int:
        return EXIT_OK if not self.failed else EXIT_REPORT_FAILED

    def lines(self) -> List[str]:
        out = [c.line() for c in self.checks]
        out.append(f"{len(self.checks) - len(self.failed)}/{len(self.checks)} targets passed")
        return out


def _same_x(a: object, b: object) -> bool:
    try:
        return float(a) == float(b)
    except (TypeError, ValueError):
        return str(a) == str(b)


def matching_rows(rows: Iterable[ResultRow], entry: TargetEntry) -> List[ResultRow]:
    selected = []
    for row in rows:
        if row.experiment != entry.experiment or row.metric != entry.metric:
            continue
        if row.protocol.lower() != entry.protocol.lower():
            continue
        if entry.x_name is not None and row.x_name != entry.x_name:
            continue
        if entry.x_value is not None and not _same_x(row.x_value, entry.x_value):
            continue
        selected.append(row)
    return selected


def aggregate(rows: Sequence[ResultRow], how: str) -> float:
    values = np.asarray([r.value for r in rows], dtype=float)
    if how == "mean" or how == "value":
        return float(values.mean())
    if how == "std":
        return float(values.std())
    if how == "max":
        return float(values.max())
    if how == "min":
        return float(values.min())
    if how == "slope":
        return fit_slope([float(r.x_value) for r in rows], values).k
    raise FitError(f"Unknown aggregate '{how}'")


def evaluate(entry: TargetEntry, rows: Iterable[ResultRow]) -> TargetCheck:
    selected = matching_rows(rows, entry)
    if not selected:
        return TargetCheck(entry, None, False, NOT_RUN)
    try:
        value = aggregate(selected, entry.aggregate)
    except (FitError, ValueError, TypeError) as e:
        return TargetCheck(entry, None, False, f"cannot aggregate: {e}")
    return TargetCheck(entry, value, entry.passes(value))


def report(rows: Iterable[ResultRow], table: TargetTable) -> ReportOutcome:
    """Compare every target against the result rows; a target without rows fails as not run"""
    rows = list(rows)
    checks = [evaluate(entry, rows) for entry in table.entries]
    outcome = ReportOutcome(checks)
    for check in outcome.failed:
        logger.warning(
            f"Target {check.entry.id} failed",
            extra={"event": "target_failed", "experiment": check.entry.experiment,
                   "outcome": check.note or "out_of_tolerance"}
        )
    return outcome
