import logging
import warnings
from typing import Any, Sequence

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.svm import SVC

from ..embeddings.types import EmbeddingVector, vectors_to_matrix
from ..errors import ConvergenceError, DimensionMismatchError, ModelKindError, SingleClassError
from ..transformations.transform import AlertLabel
from .artifact import ModelKind, TrainedModelArtifact
from .config import SVMConfig, SVMKernel

logger = logging.getLogger(__name__)


def kernel_gamma(config: SVMConfig, features: np.ndarray) -> float:
    """Resolves the RBF gamma of a config for a training matrix."""
    if config.kernel_width == "auto":
        variance = float(features.var())
        return 1.0 / (features.shape[1] * variance) if variance > 0 else 1.0
    return 1.0 / (2.0 * float(config.kernel_width) ** 2)


def train_svm(
    features: Sequence[EmbeddingVector],
    labels: Sequence[AlertLabel],
    config: SVMConfig,
    **metadata: Any,
) -> TrainedModelArtifact:
    """Fits a kernel SVM alert classifier.

    The artifact keeps support vectors, dual coefficients and the intercept,
    so predictions never need the solver again.

    Args:
        features: The text (or other) embeddings.
        labels: The alert labels aligned with features.
        config: The SVM config.
        **metadata: Artifact metadata (backends, pooling, threshold, feature_modality).

    Returns:
        The SVM artifact.

    Raises:
        SingleClassError: If only one alert class is present.
        ConvergenceError: If the solver stops at its iteration cap.
    """
    if len(features) != len(labels):
        raise DimensionMismatchError(f"{len(features)} features but {len(labels)} labels")
    matrix = vectors_to_matrix(features).astype(np.float64)
    targets = np.array([label.value for label in labels], dtype=np.int64)
    if len(np.unique(targets)) < 2:
        raise SingleClassError("SVM training data must contain both alert classes")

    gamma = kernel_gamma(config, matrix)
    classifier = SVC(
        kernel=config.kernel.value,
        C=config.regularization_c,
        gamma=gamma,
        tol=config.tolerance,
        max_iter=config.max_iter,
        random_state=config.seed,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("error", ConvergenceWarning)
        try:
            classifier.fit(matrix, targets)
        except ConvergenceWarning as e:
            raise ConvergenceError(
                f"SVM did not converge within {config.max_iter} iterations"
            ) from e
    logger.info(
        "Trained %s SVM on %d samples with %d support vectors",
        config.kernel.value,
        len(targets),
        len(classifier.support_),
    )

    return TrainedModelArtifact(
        model_kind=ModelKind.SVM,
        config=config.to_record(),
        parameters={
            "support_vectors": classifier.support_vectors_,
            "dual_coef": classifier.dual_coef_[0],
            "intercept": classifier.intercept_,
        },
        input_dim=matrix.shape[1],
        solver={"kernel": config.kernel.value, "gamma": gamma},
        **metadata,
    )


def svm_decision_values(artifact: TrainedModelArtifact, features: np.ndarray) -> np.ndarray:
    """Evaluates the decision function for an (n, dim) matrix."""
    if artifact.model_kind is not ModelKind.SVM:
        raise ModelKindError(f"Expected an svm artifact, got {artifact.model_kind.value}")
    inputs = np.atleast_2d(features).astype(np.float64)
    if inputs.shape[1] != artifact.input_dim:
        raise DimensionMismatchError(
            f"Feature dim {inputs.shape[1]} does not match model input dim {artifact.input_dim}"
        )
    support = artifact.parameters["support_vectors"].astype(np.float64)
    dual = artifact.parameters["dual_coef"].astype(np.float64)
    intercept = float(artifact.parameters["intercept"][0])
    if artifact.solver["kernel"] == SVMKernel.LINEAR.value:
        kernel = inputs @ support.T
    else:
        distances = (
            (inputs**2).sum(axis=1)[:, None]
            + (support**2).sum(axis=1)[None, :]
            - 2.0 * inputs @ support.T
        )
        kernel = np.exp(-artifact.solver["gamma"] * np.maximum(distances, 0.0))
    return kernel @ dual + intercept


def svm_predict(
    artifact: TrainedModelArtifact, feature: EmbeddingVector
) -> tuple[AlertLabel, float]:
    """Classifies one vector; HIGH_ALERT iff the decision value is nonnegative."""
    decision = float(svm_decision_values(artifact, feature.values)[0])
    return AlertLabel.from_int(decision >= 0), decision
