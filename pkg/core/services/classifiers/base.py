import abc

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import Field

from core.errors import ModelCorruptionError
from core.models import N_SUPERLAYERS

N_CLASSES = 2


class TrainingMetadata(PydanticBase):
    n_rows: int = 0
    train_accuracy: float | None = None
    epochs_run: int | None = None
    final_loss: float | None = None
    loss_history: list[float] = Field(default_factory=list)
    lr_history: list[float] = Field(default_factory=list)
    n_nodes: int | None = None


class Classifier(abc.ABC):
    """A trained binary candidate classifier: class 0 invalid, class 1 valid."""

    KIND = NotImplemented

    def __init__(self, hyperparams: PydanticBase, metadata: TrainingMetadata | None = None):
        self.hyperparams = hyperparams
        self.metadata = metadata or TrainingMetadata()

    @abc.abstractmethod
    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        pass

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """(n, 2) array of (p_invalid, p_valid) per row."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.ndim != 2 or X.shape[1] != N_SUPERLAYERS:
            raise ModelCorruptionError(
                f"{self.KIND} model expects rows of {N_SUPERLAYERS} features, got shape {X.shape}"
            )
        return self._predict_proba(X)

    def score(self, features: np.ndarray) -> np.ndarray:
        """p_valid per row of a float64 (n, 6) array as built by `candidate_arrays`; shape is not rechecked."""
        return self._predict_proba(features)[:, 1]

    def predict_one(self, features) -> tuple[float, float]:
        p_invalid, p_valid = self.predict_proba(np.asarray(features, dtype=np.float64))[0]
        return float(p_invalid), float(p_valid)

    def accuracy(self, X: np.ndarray, y: np.ndarray) -> float:
        if len(y) == 0:
            return 0.0
        predicted = self.predict_proba(X)[:, 1] >= 0.5
        return float(np.mean(predicted == (np.asarray(y) == 1)))
