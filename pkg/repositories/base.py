"""
File-backed repositories for the persistent artifacts of a run
"""
import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, Generic, List, TypeVar, Union

from core.utils.errors import ErrorCode, SchemaMismatch, SimError
from core.utils.logger import get_logger

logger = get_logger(__name__)

T = TypeVar('T')

PathLike = Union[str, Path]


class FileRepository(ABC, Generic[T]):
    """Base repository: entities live in one file each"""

    suffix = ".json"

    def __init__(self, root: PathLike = "."):
        self.root = Path(root)

    @abstractmethod
    def _entity_to_dict(self, entity: T) -> Dict[str, Any]:
        """Convert entity to dictionary for storage"""

    @abstractmethod
    def _dict_to_entity(self, data: Dict[str, Any]) -> T:
        """Convert dictionary to entity"""

    def path_for(self, name: PathLike) -> Path:
        path = Path(name)
        if not path.suffix:
            path = path.with_suffix(self.suffix)
        return path if path.is_absolute() else self.root / path

    def exists(self, name: PathLike) -> bool:
        return self.path_for(name).exists()

    def _read_json(self, path: Path) -> Any:
        if not path.exists():
            raise SimError(f"File not found: {path}", code=ErrorCode.NOT_FOUND, details={"path": str(path)})
        try:
            with path.open("r", encoding="utf-8") as fh:
                return json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaMismatch(f"{path} is not valid JSON: {e}", details={"path": str(path)}) from e

    def _write_json(self, path: Path, data: Any) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")
        logger.debug(f"Wrote {path}")
        return path

    def load(self, name: PathLike) -> T:
        return self._dict_to_entity(self._read_json(self.path_for(name)))

    def save(self, entity: T, name: PathLike) -> Path:
        return self._write_json(self.path_for(name), self._entity_to_dict(entity))

    def list(self) -> List[Path]:
        if not self.root.exists():
            return []
        return sorted(self.root.glob(f"*{self.suffix}"))
