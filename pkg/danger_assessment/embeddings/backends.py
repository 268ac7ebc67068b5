import logging
from abc import ABC, abstractmethod
from hashlib import sha256
from importlib import import_module
from typing import Any, Callable, Optional, Sequence, Union

import numpy as np

from ..errors import BackendError, EmbeddingError
from .types import BackendDescriptor, Modality

logger = logging.getLogger(__name__)

BackendInput = Union[np.ndarray, str]


class EmbeddingBackend(ABC):
    """Adapter turning frames or texts into fixed-dimension vectors."""

    descriptor: BackendDescriptor

    @property
    def backend_id(self) -> str:
        """The backend's stable id."""
        return self.descriptor.backend_id

    @property
    def modality(self) -> Modality:
        """The modality the backend embeds."""
        return self.descriptor.modality

    @property
    def dim(self) -> int:
        """The output dimension."""
        return self.descriptor.dim

    @abstractmethod
    def embed_batch(
        self,
        items: Sequence[BackendInput],
        signals: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Embeds a batch of images or texts.

        Args:
            items: RGB uint8 images for visual backends, strings for text ones.
            signals: Per-item class-signal values; only synthetic backends use them.

        Returns:
            An (len(items), dim) float32 matrix.
        """

    def _checked(self, matrix: Any, n_items: int) -> np.ndarray:
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.shape != (n_items, self.dim):
            raise BackendError(
                self.backend_id,
                f"returned shape {matrix.shape}, expected {(n_items, self.dim)}",
            )
        if not np.all(np.isfinite(matrix)):
            raise BackendError(self.backend_id, "returned non-finite values")
        return matrix


def _input_bytes(item: BackendInput) -> bytes:
    if isinstance(item, str):
        return b"text:" + item.encode("utf-8")
    array = np.ascontiguousarray(item)
    return b"image:" + repr(array.shape).encode("ascii") + array.tobytes()


class MockBackend(EmbeddingBackend):
    """Deterministic hash-seeded backend for tests and offline dry runs.

    Each input maps to a unit vector drawn from a generator seeded by a stable
    hash of the input bytes and the salt. With a positive `signal_strength`,
    `signal * signal_strength` times a fixed unit direction is added before
    normalization, so labels become linearly recoverable.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        salt: int = 0,
        signal_strength: float = 0.0,
    ) -> None:
        self.descriptor = descriptor
        self.salt = salt
        self.signal_strength = signal_strength
        direction = np.random.default_rng([salt, 0x5EED]).standard_normal(descriptor.dim)
        self.signal_direction = direction / np.linalg.norm(direction)

    def _noise(self, item: BackendInput) -> np.ndarray:
        digest = sha256(self.salt.to_bytes(8, "little", signed=True) + _input_bytes(item))
        seed = np.frombuffer(digest.digest(), dtype="<u4").tolist()
        vector = np.random.default_rng(seed).standard_normal(self.dim)
        return vector / np.linalg.norm(vector)

    def embed_batch(
        self,
        items: Sequence[BackendInput],
        signals: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Embeds a batch of frames or texts.

        Args:
            items: The frames or texts.
            signals: Optional per-item class signals mixed into the output.

        Returns:
            An (n, dim) matrix of unit vectors.

        Raises:
            EmbeddingError: If the signals do not align with the items.
        """
        if signals is not None and len(signals) != len(items):
            raise EmbeddingError(f"{len(signals)} signals for {len(items)} items")
        rows = []
        for position, item in enumerate(items):
            vector = self._noise(item)
            if signals is not None and self.signal_strength:
                vector = vector + self.signal_strength * float(signals[position]) * self.signal_direction
            rows.append(vector / np.linalg.norm(vector))
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack(rows).astype(np.float32)


class PluginBackend(EmbeddingBackend):
    """Backend delegating to a user-supplied `module:callable` encoder.

    The callable receives the list of items plus the configured options, and
    `credentials=` when the backend reference names a credentials variable. It
    must return an array-like of shape (len(items), dim).
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        target: str,
        options: Optional[dict[str, Any]] = None,
        credentials: Optional[str] = None,
    ) -> None:
        """Imports the encoder callable.

        Raises:
            BackendError: If the target cannot be imported.
        """
        self.descriptor = descriptor
        self.target = target
        self.options = dict(options or {})
        if credentials is not None:
            self.options["credentials"] = credentials
        self._encoder = self._resolve(target)

    def _resolve(self, target: str) -> Callable[..., Any]:
        module_name, _, attribute = target.partition(":")
        if not module_name or not attribute:
            raise BackendError(self.backend_id, f"target must be 'module:callable', got '{target}'")
        try:
            encoder = getattr(import_module(module_name), attribute)
        except (ImportError, AttributeError) as e:
            raise BackendError(self.backend_id, f"cannot import '{target}': {e}") from e
        if not callable(encoder):
            raise BackendError(self.backend_id, f"'{target}' is not callable")
        return encoder

    def embed_batch(
        self,
        items: Sequence[BackendInput],
        signals: Optional[Sequence[float]] = None,
    ) -> np.ndarray:
        """Embeds a batch through the plugin encoder."""
        try:
            matrix = self._encoder(list(items), **self.options)
        except BackendError:
            raise
        except Exception as e:
            raise BackendError(self.backend_id, f"encoder call failed: {e}") from e
        return self._checked(matrix, len(items))


def mock_backend(
    modality: Modality,
    dim: int,
    salt: int,
    signal_strength: float = 0.0,
    backend_id: Optional[str] = None,
) -> MockBackend:
    """Creates a deterministic mock backend.

    Args:
        modality: The backend modality.
        dim: The output dimension.
        salt: Salt mixed into every input hash.
        signal_strength: Weight of the additive class signal, 0 to disable.
        backend_id: The backend id, derived from the modality by default.

    Returns:
        The mock backend.
    """
    descriptor = BackendDescriptor(
        backend_id=backend_id or f"mock-{modality.value}-{dim}",
        modality=modality,
        dim=dim,
        version="mock-1",
    )
    return MockBackend(descriptor, salt=salt, signal_strength=signal_strength)
