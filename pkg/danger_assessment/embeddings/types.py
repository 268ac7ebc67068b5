from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np

from ..errors import EmbeddingError


class EmbeddingKind(Enum):
    FRAME = 0
    VIDEO_POOLED = 1
    TEXT = 2
    FUSED = 3


class Modality(Enum):
    VISUAL = "visual"
    TEXT = "text"


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """Fixed-length float32 embedding of a frame, a video or a text."""

    values: np.ndarray
    kind: EmbeddingKind

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 1 or values.size == 0:
            raise EmbeddingError(f"Embedding must be a nonempty 1-D vector, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise EmbeddingError("Embedding holds non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        """Number of components."""
        return int(self.values.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class EmbeddingStack:
    """Per-frame embeddings of one video, in frame-plan order."""

    vectors: tuple[EmbeddingVector, ...]
    video_id: str = ""

    def __post_init__(self) -> None:
        if not self.vectors:
            raise EmbeddingError(f"Empty embedding stack for video '{self.video_id}'")
        dims = {vector.dim for vector in self.vectors}
        if len(dims) != 1:
            raise EmbeddingError(f"Mixed dimensions {sorted(dims)} in stack '{self.video_id}'")
        if any(vector.kind is not EmbeddingKind.FRAME for vector in self.vectors):
            raise EmbeddingError("An embedding stack holds FRAME vectors only")
        object.__setattr__(self, "vectors", tuple(self.vectors))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, video_id: str = "") -> "EmbeddingStack":
        """Wraps the rows of a matrix as frame vectors."""
        return cls(
            tuple(EmbeddingVector(row, EmbeddingKind.FRAME) for row in np.asarray(matrix)),
            video_id,
        )

    @property
    def dim(self) -> int:
        """Dimension shared by the stacked vectors."""
        return self.vectors[0].dim

    def __len__(self) -> int:
        return len(self.vectors)

    def as_matrix(self) -> np.ndarray:
        """Stacks the vectors into an (n, dim) matrix."""
        return np.stack([vector.values for vector in self.vectors])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EmbeddingStack):
            return NotImplemented
        return len(self) == len(other) and np.array_equal(
            self.as_matrix(), other.as_matrix()
        )


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity and output contract of an embedding backend.

    A backend declared `serial` is never called from more than one worker at
    a time.
    """

    backend_id: str
    modality: Modality
    dim: int
    version: str = "1"
    serial: bool = False
    options: dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise EmbeddingError(f"Backend '{self.backend_id}' needs a positive dim")

    def to_record(self) -> dict[str, Any]:
        """Returns the descriptor as a JSON-ready dict."""
        return {
            "backend_id": self.backend_id,
            "modality": self.modality.value,
            "dim": self.dim,
            "version": self.version,
            "serial": self.serial,
        }

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "BackendDescriptor":
        """Rebuilds a descriptor written by `to_record`."""
        return cls(
            backend_id=record["backend_id"],
            modality=Modality(record["modality"]),
            dim=int(record["dim"]),
            version=str(record.get("version", "1")),
            serial=bool(record.get("serial", False)),
        )


def vectors_to_matrix(vectors: Sequence[EmbeddingVector]) -> np.ndarray:
    """Stacks homogeneous vectors into an (n, dim) float32 matrix."""
    if not vectors:
        raise EmbeddingError("No embeddings to stack")
    dims = {vector.dim for vector in vectors}
    if len(dims) != 1:
        raise EmbeddingError(f"Mixed embedding dimensions {sorted(dims)}")
    return np.stack([vector.values for vector in vectors])
