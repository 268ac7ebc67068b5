"""Trained model artifacts and their on-disk format (.vart).

Layout, little-endian:

    magic "VART" | header length u32 | UTF-8 JSON header
    | arrays, each: ndim u8 | ndim x u32 dims | float32 data, row-major
    | CRC32 of the array section u32

The header carries the model kind, format version, config snapshot, backend
descriptors, pooling, threshold, feature modality, solver constants and the
names of the arrays in payload order.
"""

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from hashlib import sha256
from pathlib import Path
from typing import Any, Union
from zlib import crc32

import numpy as np

from ..errors import ArtifactVersionError, CorruptArtifactError

MAGIC = b"VART"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")
_FLOAT = np.dtype("<f4")


class ModelKind(Enum):
    MLP_BINARY = "mlp_binary"
    MLP_REGRESSOR = "mlp_regressor"
    SVM = "svm"


@dataclass(frozen=True, eq=False)
class TrainedModelArtifact:
    """Immutable trained model: learned arrays plus everything needed to rebuild it."""

    model_kind: ModelKind
    config: dict[str, Any]
    parameters: dict[str, np.ndarray]
    input_dim: int
    backends: tuple[dict[str, Any], ...] = ()
    pooling: str = "mean"
    threshold: float = 7.0
    feature_modality: str = "fused"
    solver: dict[str, Any] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        frozen = {}
        for name, array in self.parameters.items():
            array = np.ascontiguousarray(array, dtype=np.float32)
            array.setflags(write=False)
            frozen[name] = array
        object.__setattr__(self, "parameters", frozen)
        object.__setattr__(self, "backends", tuple(self.backends))

    def header(self) -> dict[str, Any]:
        """The JSON header written ahead of the parameter arrays."""
        return {
            "model_kind": self.model_kind.value,
            "format_version": self.format_version,
            "config": self.config,
            "input_dim": self.input_dim,
            "backends": list(self.backends),
            "pooling": self.pooling,
            "threshold": self.threshold,
            "feature_modality": self.feature_modality,
            "solver": self.solver,
            "arrays": list(self.parameters),
        }

    def digest(self) -> str:
        """Returns the SHA-256 of the serialized artifact."""
        return sha256(encode_artifact(self)).hexdigest()


def encode_artifact(artifact: TrainedModelArtifact) -> bytes:
    """Serializes an artifact to bytes."""
    header = json.dumps(artifact.header(), sort_keys=True).encode("utf-8")
    chunks = []
    for array in artifact.parameters.values():
        chunks.append(struct.pack("<B", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(array.astype(_FLOAT).tobytes())
    payload = b"".join(chunks)
    return MAGIC + _LENGTH.pack(len(header)) + header + payload + _LENGTH.pack(crc32(payload))


def decode_artifact(data: bytes) -> TrainedModelArtifact:
    """Parses serialized artifact bytes.

    Raises:
        CorruptArtifactError: If the bytes are truncated, malformed or fail the CRC.
        ArtifactVersionError: If the format version is not supported.
    """
    if data[:4] != MAGIC:
        raise CorruptArtifactError(f"Bad artifact magic {data[:4]!r}")
    if len(data) < 8:
        raise CorruptArtifactError("Artifact header is truncated")
    (header_length,) = _LENGTH.unpack_from(data, 4)
    header_end = 8 + header_length
    if len(data) < header_end + _LENGTH.size:
        raise CorruptArtifactError("Artifact is truncated")
    try:
        header = json.loads(data[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptArtifactError(f"Artifact header is not valid JSON: {e}") from e

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ArtifactVersionError(
            f"Artifact format version {version} is not supported (expected {FORMAT_VERSION})"
        )

    payload = data[header_end:-_LENGTH.size]
    (stored_crc,) = _LENGTH.unpack_from(data, len(data) - _LENGTH.size)
    if crc32(payload) != stored_crc:
        raise CorruptArtifactError("Artifact payload is truncated or corrupt (CRC32 mismatch)")

    parameters: dict[str, np.ndarray] = {}
    offset = 0
    try:
        for name in header["arrays"]:
            (ndim,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", payload, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * _FLOAT.itemsize
            if offset + size > len(payload):
                raise CorruptArtifactError(f"Array '{name}' is truncated")
            parameters[name] = np.frombuffer(payload, dtype=_FLOAT, count=size // 4, offset=offset).reshape(shape)
            offset += size
        if offset != len(payload):
            raise CorruptArtifactError("Unexpected bytes after the last array")
        return TrainedModelArtifact(
            model_kind=ModelKind(header["model_kind"]),
            config=header["config"],
            parameters=parameters,
            input_dim=int(header["input_dim"]),
            backends=tuple(header.get("backends", ())),
            pooling=header.get("pooling", "mean"),
            threshold=float(header.get("threshold", 7.0)),
            feature_modality=header.get("feature_modality", "fused"),
            solver=header.get("solver", {}),
            format_version=version,
        )
    except (KeyError, ValueError, struct.error) as e:
        if isinstance(e, CorruptArtifactError):
            raise
        raise CorruptArtifactError(f"Malformed artifact: {e}") from e


def serialize_artifact(artifact: TrainedModelArtifact, path: Union[str, Path]) -> None:
    """Writes an artifact file."""
    Path(path).write_bytes(encode_artifact(artifact))


def deserialize_artifact(path: Union[str, Path]) -> TrainedModelArtifact:
    """Reads an artifact file written by `serialize_artifact`."""
    return decode_artifact(Path(path).read_bytes())
