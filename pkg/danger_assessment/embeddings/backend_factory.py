from dataclasses import dataclass, field
from os import environ
from typing import Any, Optional

from ..errors import BackendError
from .backends import EmbeddingBackend, MockBackend, PluginBackend
from .types import BackendDescriptor, Modality


@dataclass(frozen=True)
class BackendRef:
    """Declarative reference to an embedding backend, as written in configs."""

    kind: str
    backend_id: str
    dim: int
    version: str = "1"
    serial: bool = False
    salt: int = 0
    signal_strength: float = 0.0
    signal_from: Optional[str] = None
    target: Optional[str] = None
    options: dict[str, Any] = field(default_factory=dict, hash=False)
    credentials_env: Optional[str] = None

    @property
    def is_mock(self) -> bool:
        """Whether the ref names a mock backend."""
        return self.kind == "mock"

    def descriptor(self, modality: Modality) -> BackendDescriptor:
        """Describes the backend this ref builds for one modality."""
        return BackendDescriptor(
            backend_id=self.backend_id,
            modality=modality,
            dim=self.dim,
            version=self.version,
            serial=self.serial,
        )

    def to_record(self) -> dict[str, Any]:
        """Returns the ref as a JSON-ready dict."""
        return {
            "kind": self.kind,
            "backend_id": self.backend_id,
            "dim": self.dim,
            "version": self.version,
            "serial": self.serial,
            "salt": self.salt,
            "signal_strength": self.signal_strength,
            "signal_from": self.signal_from,
            "target": self.target,
            "options": dict(self.options),
            "credentials_env": self.credentials_env,
        }


class BackendFactory:
    """Factory class to create embedding backends from config references."""

    _backends: dict[str, type[EmbeddingBackend]] = {
        "mock": MockBackend,
        "plugin": PluginBackend,
    }

    @classmethod
    def create_backend(cls, ref: BackendRef, modality: Modality) -> EmbeddingBackend:
        """Creates a backend instance for a config reference.

        Args:
            ref: The backend reference.
            modality: The modality the backend serves.

        Returns:
            An instance of the appropriate backend class.

        Raises:
            BackendError: If the kind is unknown, a plugin target is missing, or
                the credentials variable is unset.
        """
        backend_class = cls._backends.get(ref.kind)
        if backend_class is None:
            raise BackendError(ref.backend_id, f"unknown backend kind '{ref.kind}'")
        descriptor = ref.descriptor(modality)
        if backend_class is MockBackend:
            return MockBackend(descriptor, salt=ref.salt, signal_strength=ref.signal_strength)

        if not ref.target:
            raise BackendError(ref.backend_id, "plugin backends need a 'target'")
        credentials = None
        if ref.credentials_env:
            try:
                credentials = environ[ref.credentials_env]
            except KeyError as e:
                raise BackendError(
                    ref.backend_id,
                    f"credentials variable '{ref.credentials_env}' is not set",
                ) from e
        return PluginBackend(descriptor, ref.target, ref.options, credentials)
