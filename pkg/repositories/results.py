import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from config.settings import SIM_VERSION
from core.utils.errors import SchemaMismatch
from core.utils.logger import get_logger
from repositories.base import FileRepository, PathLike

logger = get_logger(__name__)

XValue = Union[int, float, str]


@dataclass(frozen=True)
class ResultRow:
    """One measured value of one experiment point"""
    experiment: str
    protocol: str
    x_name: str
    x_value: XValue
    metric: str
    value: float
    unit: str
    seed: int
    calib_hash: str = ""
    sim_version: str = SIM_VERSION


COLUMNS = [f.name for f in fields(ResultRow)]


def format_number(value: Any) -> str:
    """Fixed-precision text so the same run always produces the same bytes"""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if value != value:
            return "nan"
        text = f"{value:.6f}".rstrip("0").rstrip(".")
        return "0" if text in ("", "-0") else text
    return str(value)


def parse_number(text: str) -> XValue:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


class ResultRepository(FileRepository[List[ResultRow]]):
    """Experiment CSVs with one fixed column order for every experiment"""

    suffix = ".csv"

    def _entity_to_dict(self, rows: List[ResultRow]) -> Dict[str, Any]:
        return {"rows": [asdict(row) for row in rows]}

    def _dict_to_entity(self, data: Dict[str, Any]) -> List[ResultRow]:
        return [ResultRow(**row) for row in data["rows"]]

    def save(self, rows: List[ResultRow], name: PathLike) -> Path:
        path = self.path_for(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(COLUMNS)
            for row in rows:
                writer.writerow([format_number(getattr(row, name)) for name in COLUMNS])
        logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def load(self, name: PathLike, required: Optional[Iterable[str]] = None) -> List[ResultRow]:
        path = self.path_for(name)
        with path.open("r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in (required or COLUMNS) if c not in header]
            if missing:
                raise SchemaMismatch(
                    f"{path.name} is missing columns: {', '.join(missing)}",
                    details={"path": str(path), "missing": missing}
                )
            rows = []
            for record in reader:
                rows.append(ResultRow(
                    experiment=record["experiment"],
                    protocol=record["protocol"],
                    x_name=record["x_name"],
                    x_value=parse_number(record["x_value"]),
                    metric=record["metric"],
                    value=float(record["value"]),
                    unit=record["unit"],
                    seed=int(record.get("seed") or 0),
                    calib_hash=record.get("calib_hash", ""),
                    sim_version=record.get("sim_version", ""),
                ))
        return rows

    def load_all(self) -> List[ResultRow]:
        """Every CSV under the root, in file-name order"""
        rows: List[ResultRow] = []
        for path in self.list():
            try:
                rows.extend(self.load(path.name))
            except SchemaMismatch as e:
                logger.warning(f"Skipping {path.name}: {e.message}")
        return rows
