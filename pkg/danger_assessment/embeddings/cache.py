"""Embedding cache files (.vemb).

Layout, little-endian regardless of host:

    magic "VEMB" | version u16 | kind u8 | dim u32 | count u32
    | count x dim float32, row-major | CRC32 of the payload u32

A FRAME cache holds a whole stack; the other kinds hold exactly one vector.
Each cache may carry a one-record line-delimited sidecar (`<file>.meta.jsonl`)
naming the video, the backend and the hash of the inputs it was computed from.
"""

import logging
import struct
from os import replace
from pathlib import Path
from typing import Any, Optional, Union
from zlib import crc32

import numpy as np

from ..errors import (
    BadMagicError,
    CacheFormatError,
    ChecksumMismatchError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from ..extractors.manifest_extractor import ManifestExtractor
from .types import EmbeddingKind, EmbeddingStack, EmbeddingVector

logger = logging.getLogger(__name__)

MAGIC = b"VEMB"
VERSION = 1
_HEADER = struct.Struct("<4sHBII")
_CRC = struct.Struct("<I")
_FLOAT = np.dtype("<f4")
SIDECAR_SUFFIX = ".meta.jsonl"

CacheContent = Union[EmbeddingStack, EmbeddingVector]


class EmbeddingCache:
    """Reads and writes embedding cache files and their sidecars."""

    @staticmethod
    def encode(content: CacheContent) -> bytes:
        """Serializes a stack or a vector to cache bytes."""
        if isinstance(content, EmbeddingStack):
            kind = EmbeddingKind.FRAME
            matrix = content.as_matrix()
        else:
            if content.kind is EmbeddingKind.FRAME:
                raise CacheFormatError("Single FRAME vectors are cached as a stack")
            kind = content.kind
            matrix = content.values.reshape(1, -1)
        count, dim = matrix.shape
        payload = np.ascontiguousarray(matrix, dtype=_FLOAT).tobytes()
        header = _HEADER.pack(MAGIC, VERSION, kind.value, dim, count)
        return header + payload + _CRC.pack(crc32(payload))

    @staticmethod
    def decode(data: bytes, video_id: str = "") -> CacheContent:
        """Parses cache bytes.

        Args:
            data: The file contents.
            video_id: The id attached to decoded stacks.

        Returns:
            An EmbeddingStack for FRAME caches, an EmbeddingVector otherwise.

        Raises:
            BadMagicError: If the magic bytes are wrong.
            UnsupportedVersionError: If the version is not 1.
            TruncatedPayloadError: If the file is shorter than its header declares.
            ChecksumMismatchError: If the payload CRC32 does not match.
            CacheFormatError: On any other structural problem.
        """
        if data[:4] != MAGIC:
            raise BadMagicError(f"Bad magic {data[:4]!r}, expected {MAGIC!r}")
        if len(data) < _HEADER.size:
            raise TruncatedPayloadError(f"Header needs {_HEADER.size} bytes, file has {len(data)}")
        _, version, kind_code, dim, count = _HEADER.unpack_from(data)
        if version != VERSION:
            raise UnsupportedVersionError(f"Unsupported cache version {version}")
        try:
            kind = EmbeddingKind(kind_code)
        except ValueError as e:
            raise CacheFormatError(f"Unknown embedding kind code {kind_code}") from e
        if dim == 0 or count == 0:
            raise CacheFormatError(f"Empty cache shape ({count}, {dim})")
        if kind is not EmbeddingKind.FRAME and count != 1:
            raise CacheFormatError(f"{kind.name} caches hold one vector, header says {count}")

        payload_size = count * dim * _FLOAT.itemsize
        expected = _HEADER.size + payload_size + _CRC.size
        if len(data) < expected:
            raise TruncatedPayloadError(
                f"Cache declares {count}x{dim} floats ({expected} bytes), file has {len(data)}"
            )
        if len(data) > expected:
            raise CacheFormatError(f"{len(data) - expected} unexpected trailing bytes")

        payload = data[_HEADER.size : _HEADER.size + payload_size]
        (stored_crc,) = _CRC.unpack_from(data, _HEADER.size + payload_size)
        if crc32(payload) != stored_crc:
            raise ChecksumMismatchError("Cache payload CRC32 mismatch")

        matrix = np.frombuffer(payload, dtype=_FLOAT).reshape(count, dim).astype(np.float32)
        if kind is EmbeddingKind.FRAME:
            return EmbeddingStack.from_matrix(matrix, video_id)
        return EmbeddingVector(matrix[0], kind)

    @staticmethod
    def cache_write(path: Union[str, Path], content: CacheContent) -> None:
        """Writes a cache file, replacing any previous one atomically.

        Args:
            path: The target path; its parent directory must exist.
            content: The stack or vector to store.
        """
        path = Path(path)
        if not path.parent.is_dir():
            raise FileNotFoundError(f"Cache directory does not exist: {path.parent}")
        staging = path.with_name(path.name + ".tmp")
        staging.write_bytes(EmbeddingCache.encode(content))
        replace(staging, path)

    @staticmethod
    def cache_read(path: Union[str, Path]) -> CacheContent:
        """Reads a cache file, taking the video id of stacks from the sidecar."""
        path = Path(path)
        metadata = EmbeddingCache.read_sidecar(path)
        video_id = metadata.get("video_id", "") if metadata else ""
        return EmbeddingCache.decode(path.read_bytes(), video_id)

    @staticmethod
    def sidecar_path(path: Union[str, Path]) -> Path:
        """Path of the metadata sidecar of a cache file."""
        path = Path(path)
        return path.with_name(path.name + SIDECAR_SUFFIX)

    @staticmethod
    def write_sidecar(path: Union[str, Path], metadata: dict[str, Any]) -> None:
        """Writes the metadata sidecar of a cache file."""
        ManifestExtractor.write_records(EmbeddingCache.sidecar_path(path), [metadata])

    @staticmethod
    def read_sidecar(path: Union[str, Path]) -> Optional[dict[str, Any]]:
        """Reads the metadata sidecar of a cache file, or None if absent."""
        sidecar = EmbeddingCache.sidecar_path(path)
        if not sidecar.exists():
            return None
        records = ManifestExtractor.read_records(sidecar)
        return records[0] if records else None
