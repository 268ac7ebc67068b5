"""Synthetic embedding datasets built from mock backends."""

from dataclasses import dataclass

import numpy as np

from ..extractors.synthetic_extractor import SyntheticExtractor
from ..transformations.frame_sampler import FrameSampler, TemporalSegment
from ..transformations.transform import AlertLabel
from .backends import mock_backend
from .embedding import Embedder
from .types import EmbeddingVector, Modality


@dataclass(frozen=True)
class SyntheticDataset:
    video_ids: tuple[str, ...]
    video: tuple[EmbeddingVector, ...]
    text: tuple[EmbeddingVector, ...]
    fused: tuple[EmbeddingVector, ...]
    labels: tuple[AlertLabel, ...]
    targets: tuple[float, ...]


def _embed_videos(
    video_ids: list[str],
    signals: list[float],
    visual_dim: int,
    text_dim: int,
    frames_per_video: int,
    signal_strength: float,
    seed: int,
) -> tuple[list[EmbeddingVector], list[EmbeddingVector], list[EmbeddingVector]]:
    visual = mock_backend(Modality.VISUAL, visual_dim, salt=seed, signal_strength=signal_strength)
    text = mock_backend(Modality.TEXT, text_dim, salt=seed + 1, signal_strength=signal_strength)
    pooled, texts, fused = [], [], []
    for video_id, signal in zip(video_ids, signals):
        source = SyntheticExtractor(video_id, frame_count=frames_per_video, height=4, width=4, seed=seed)
        plan = FrameSampler.sample_indices(
            TemporalSegment(0, frames_per_video - 1), frames_per_video, video_id
        )
        stack = Embedder.embed_frames(
            visual, FrameSampler.extract_frames(source, plan), video_id, signal
        )
        video_vector = Embedder.pool_frames(stack)
        text_vector = Embedder.embed_text(text, f"synthetic scene summary of {video_id}", signal)
        pooled.append(video_vector)
        texts.append(text_vector)
        fused.append(Embedder.fuse_concat(video_vector, text_vector))
    return pooled, texts, fused


def class_signal_dataset(
    n: int = 200,
    visual_dim: int = 32,
    text_dim: int = 32,
    seed: int = 0,
    signal_strength: float = 2.0,
    frames_per_video: int = 3,
) -> SyntheticDataset:
    """Builds a balanced two-class dataset whose classes a linear probe separates.

    High-alert videos get signal +1, the others -1, in both modalities.

    Args:
        n: The number of videos.
        visual_dim: The visual embedding dimension.
        text_dim: The text embedding dimension.
        seed: The dataset seed.
        signal_strength: Weight of the class signal against unit noise.
        frames_per_video: Frames embedded and pooled per video.

    Returns:
        The synthetic dataset; targets are 8.5 for high alerts and 2.5 otherwise.
    """
    rng = np.random.default_rng(seed)
    classes = rng.permutation(np.arange(n) % 2)
    video_ids = [f"synthetic-{i:04d}" for i in range(n)]
    signals = [1.0 if c else -1.0 for c in classes]
    pooled, texts, fused = _embed_videos(
        video_ids, signals, visual_dim, text_dim, frames_per_video, signal_strength, seed
    )
    return SyntheticDataset(
        video_ids=tuple(video_ids),
        video=tuple(pooled),
        text=tuple(texts),
        fused=tuple(fused),
        labels=tuple(AlertLabel.from_int(int(c)) for c in classes),
        targets=tuple(8.5 if c else 2.5 for c in classes),
    )


def linear_target_dataset(
    n: int = 200,
    visual_dim: int = 4,
    text_dim: int = 4,
    seed: int = 0,
    bias: float = 5.0,
    scale: float = 3.0,
) -> tuple[SyntheticDataset, np.ndarray]:
    """Builds fused mock embeddings with targets y = w . x + b.

    w is a random direction scaled by `scale`; fused vectors have norm at most
    sqrt(2), so targets stay within bias +/- scale * sqrt(2).

    Returns:
        The dataset and the weight vector w.
    """
    rng = np.random.default_rng(seed)
    video_ids = [f"linear-{i:04d}" for i in range(n)]
    pooled, texts, fused = _embed_videos(
        video_ids, [0.0] * n, visual_dim, text_dim, 1, 0.0, seed
    )
    direction = rng.standard_normal(visual_dim + text_dim)
    weights = scale * direction / np.linalg.norm(direction)
    targets = [float(weights @ vector.values.astype(np.float64) + bias) for vector in fused]
    labels = [AlertLabel.HIGH_ALERT if t >= 7.0 else AlertLabel.NO_ALERT for t in targets]
    dataset = SyntheticDataset(
        video_ids=tuple(video_ids),
        video=tuple(pooled),
        text=tuple(texts),
        fused=tuple(fused),
        labels=tuple(labels),
        targets=tuple(targets),
    )
    return dataset, weights
