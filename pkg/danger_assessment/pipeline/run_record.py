import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from hashlib import sha1
from pathlib import Path
from platform import node
from typing import Any, Optional, Union

from .. import __version__

logger = logging.getLogger(__name__)


def blob_hash(path: Union[str, Path]) -> str:
    """Hashes a file the way git hashes a blob."""
    content = Path(path).read_bytes()
    return sha1(b"blob %d\0" % len(content) + content).hexdigest()


@dataclass
class RunRecord:
    """Everything needed to re-execute a run on the same inputs.

    Timestamps and host details live here only, so reports stay byte-stable.
    """

    command: str
    config_hash: str
    seed: int
    config: dict[str, Any]
    inputs: dict[str, str] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    report: Optional[str] = None
    overrides: dict[str, Any] = field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    host: str = field(default_factory=node)
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )
    tool_version: str = __version__

    def add_input(self, path: Union[str, Path]) -> None:
        """Records the content hash of an input file."""
        self.inputs[str(path)] = blob_hash(path)

    def to_record(self) -> dict[str, Any]:
        """Returns the record as a JSON-ready dict."""
        return asdict(self)

    def write(self, path: Union[str, Path]) -> Path:
        """Writes the record as indented JSON.

        Args:
            path: The output file.

        Returns:
            The path written.
        """
        path = Path(path)
        path.write_text(json.dumps(self.to_record(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        logger.info("Wrote run record to %s", path)
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "RunRecord":
        """Reads a record written by `write`."""
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))
