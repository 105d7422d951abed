from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Union

from core.utils.errors import SchemaMismatch, SpecError
from core.utils.logger import get_logger
from repositories.base import FileRepository, PathLike

logger = get_logger(__name__)

AGGREGATES = ("mean", "std", "max", "min", "slope", "value")
COMPARISONS = ("within", "at_least", "at_most")


@dataclass(frozen=True)
class TargetEntry:
    """One measured number the simulator must reproduce"""
    id: str
    experiment: str
    protocol: str
    metric: str
    target: float
    tolerance: float = 0.0
    aggregate: str = "mean"
    x_name: Optional[str] = None
    x_value: Optional[Union[int, float, str]] = None
    comparison: str = "within"
    relative: bool = True
    source: str = ""

    def bounds(self) -> tuple:
        span = abs(self.target) * self.tolerance if self.relative else self.tolerance
        return self.target - span, self.target + span

    def passes(self, value: float) -> bool:
        if self.comparison == "at_least":
            return value >= self.target
        if self.comparison == "at_most":
            return value <= self.target
        lo, hi = self.bounds()
        return lo <= value <= hi

    def residual(self, value: float) -> float:
        """Signed relative deviation from the target"""
        if self.target == 0:
            return value
        return (value - self.target) / abs(self.target)


@dataclass
class TargetTable:
    version: str = "1"
    entries: List[TargetEntry] = field(default_factory=list)

    def experiments(self) -> List[str]:
        return sorted({e.experiment for e in self.entries})

    def for_experiment(self, name: str) -> List[TargetEntry]:
        return [e for e in self.entries if e.experiment == name]


class TargetRepository(FileRepository[TargetTable]):
    """TargetTable JSON, validated before anything runs"""

    def __init__(self, root: PathLike = ".", known_experiments: Optional[Iterable[str]] = None):
        super().__init__(root)
        self.known_experiments = set(known_experiments or ())

    def _entity_to_dict(self, table: TargetTable) -> Dict[str, Any]:
        return {"version": table.version, "targets": [asdict(e) for e in table.entries]}

    def _dict_to_entity(self, data: Dict[str, Any]) -> TargetTable:
        if not isinstance(data, dict) or not isinstance(data.get("targets"), list):
            raise SchemaMismatch("Target table must be an object with a 'targets' list")
        entries = []
        seen = set()
        for i, raw in enumerate(data["targets"]):
            try:
                entry = TargetEntry(**raw)
            except TypeError as e:
                raise SchemaMismatch(f"Target #{i}: {e}", details={"index": i}) from e
            self._check(entry, i)
            if entry.id in seen:
                raise SpecError(f"Duplicate target id '{entry.id}'", details={"id": entry.id})
            seen.add(entry.id)
            entries.append(entry)
        return TargetTable(version=str(data.get("version", "1")), entries=entries)

    def _check(self, entry: TargetEntry, index: int) -> None:
        if self.known_experiments and entry.experiment not in self.known_experiments:
            raise SpecError(
                f"Target '{entry.id}' names unknown experiment '{entry.experiment}'",
                details={"index": index, "known": sorted(self.known_experiments)}
            )
        if entry.aggregate not in AGGREGATES:
            raise SpecError(f"Target '{entry.id}' has unknown aggregate '{entry.aggregate}'")
        if entry.comparison not in COMPARISONS:
            raise SpecError(f"Target '{entry.id}' has unknown comparison '{entry.comparison}'")
        if entry.tolerance < 0:
            raise SpecError(f"Target '{entry.id}' has a negative tolerance")
