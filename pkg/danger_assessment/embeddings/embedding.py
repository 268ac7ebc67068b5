from typing import Optional, Sequence

import numpy as np

from ..errors import BackendError, EmbeddingError
from .backends import EmbeddingBackend
from .types import EmbeddingKind, EmbeddingStack, EmbeddingVector, Modality

POOLING_METHODS = ("mean",)
FEATURE_MODALITIES = ("fused", "visual", "text")


class Embedder:
    """Embeds frames and summaries, pools frame stacks and fuses modalities."""

    @staticmethod
    def embed_frames(
        backend: EmbeddingBackend,
        frames: Sequence[np.ndarray],
        video_id: str = "",
        signal: Optional[float] = None,
    ) -> EmbeddingStack:
        """Embeds every frame of a video.

        Args:
            backend: A visual backend.
            frames: The decoded frames, in plan order.
            video_id: The id of the video, for error context.
            signal: Class-signal value forwarded to synthetic backends.

        Returns:
            One FRAME vector per frame, in input order.

        Raises:
            EmbeddingError: If the frame list is empty or the backend is not visual.
            BackendError: If the backend fails.
        """
        if backend.modality is not Modality.VISUAL:
            raise EmbeddingError(f"Backend '{backend.backend_id}' is not a visual backend")
        if not frames:
            raise EmbeddingError(f"No frames to embed for video '{video_id}'")
        signals = None if signal is None else [signal] * len(frames)
        try:
            matrix = backend.embed_batch(list(frames), signals)
        except BackendError as e:
            raise BackendError(backend.backend_id, f"video '{video_id}': {e}") from e
        if matrix.shape != (len(frames), backend.dim):
            raise BackendError(
                backend.backend_id,
                f"video '{video_id}': returned shape {matrix.shape}",
            )
        return EmbeddingStack.from_matrix(matrix, video_id)

    @staticmethod
    def pool_frames(stack: EmbeddingStack, method: str = "mean") -> EmbeddingVector:
        """Reduces a frame stack to one video embedding.

        The mean accumulates in float64 and rounds once to float32.

        Args:
            stack: The frame embeddings.
            method: The pooling method.

        Returns:
            The VIDEO_POOLED vector.
        """
        if method not in POOLING_METHODS:
            raise EmbeddingError(f"Unknown pooling method: {method}")
        pooled = stack.as_matrix().astype(np.float64).mean(axis=0)
        return EmbeddingVector(pooled.astype(np.float32), EmbeddingKind.VIDEO_POOLED)

    @staticmethod
    def embed_text(
        backend: EmbeddingBackend,
        summary: str,
        signal: Optional[float] = None,
    ) -> EmbeddingVector:
        """Embeds a video summary.

        Args:
            backend: A text backend.
            summary: The natural-language scene summary.
            signal: Class-signal value forwarded to synthetic backends.

        Returns:
            The TEXT vector.

        Raises:
            EmbeddingError: If the summary is blank or the backend is not textual.
        """
        if backend.modality is not Modality.TEXT:
            raise EmbeddingError(f"Backend '{backend.backend_id}' is not a text backend")
        if not summary.strip():
            raise EmbeddingError("Cannot embed an empty summary")
        matrix = backend.embed_batch([summary], None if signal is None else [signal])
        return EmbeddingVector(matrix[0], EmbeddingKind.TEXT)

    @staticmethod
    def fuse_concat(video: EmbeddingVector, text: EmbeddingVector) -> EmbeddingVector:
        """Concatenates a pooled video vector and a text vector, video first.

        Raises:
            EmbeddingError: If either input has the wrong kind.
        """
        if video.kind is not EmbeddingKind.VIDEO_POOLED:
            raise EmbeddingError(f"Expected a VIDEO_POOLED vector, got {video.kind.name}")
        if text.kind is not EmbeddingKind.TEXT:
            raise EmbeddingError(f"Expected a TEXT vector, got {text.kind.name}")
        return EmbeddingVector(np.concatenate([video.values, text.values]), EmbeddingKind.FUSED)

    @staticmethod
    def select_features(
        video: Optional[EmbeddingVector],
        text: Optional[EmbeddingVector],
        modality: str = "fused",
    ) -> EmbeddingVector:
        """Picks the model input for a feature modality.

        Args:
            video: The pooled video vector.
            text: The text vector.
            modality: 'fused', 'visual' or 'text'.

        Returns:
            The fused vector, or one of the inputs for single-modality runs.
        """
        if modality == "fused":
            if video is None or text is None:
                raise EmbeddingError("Fused features need both video and text embeddings")
            return Embedder.fuse_concat(video, text)
        if modality == "visual" and video is not None:
            return video
        if modality == "text" and text is not None:
            return text
        raise EmbeddingError(f"No embeddings available for feature modality '{modality}'")
