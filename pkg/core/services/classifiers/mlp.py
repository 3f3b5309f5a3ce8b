"""
Multi-layer perceptron with rectified-linear hidden layers and a two-way
softmax output, trained on mean cross-entropy with mini-batch Adam and a
reduce-on-plateau learning rate.
"""

import logging
import time
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ConfigDict, Field, model_validator

from core.errors import ModelCorruptionError, NonFiniteLossError
from core.models import N_SUPERLAYERS
from core.services.classifiers.base import N_CLASSES, Classifier, TrainingMetadata

logger = logging.getLogger(__name__)

RELU = "relu"
SOFTMAX = "softmax"


class MlpHyperparams(PydanticBase):
    hidden_layers: list[int] = Field(default_factory=lambda: [64, 64, 64], min_length=1)
    batch_size: int = Field(default=32, ge=1)
    initial_lr: float = Field(default=1e-3, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    max_epochs: int = Field(default=200, ge=1)
    lr_patience: int = Field(default=2, ge=1)
    lr_factor: float = Field(default=0.2, gt=0.0, lt=1.0)
    min_lr: float = Field(default=1e-6, gt=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_widths(self):
        if any(width < 1 for width in self.hidden_layers):
            raise ValueError(f"hidden layer widths must be >= 1, got {self.hidden_layers}")
        return self


class Gradients(PydanticBase):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


class MlpModel(Classifier):
    KIND = "mlp"

    def __init__(
        self,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        hyperparams: MlpHyperparams | None = None,
        metadata: TrainingMetadata | None = None,
        activations: Sequence[str] | None = None,
    ):
        super().__init__(hyperparams or MlpHyperparams(), metadata)
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.activations = list(activations or [RELU] * (len(self.weights) - 1) + [SOFTMAX])
        self._check_shapes()

    def _check_shapes(self) -> None:
        if not self.weights or len(self.weights) != len(self.biases):
            raise ModelCorruptionError("MLP needs one bias vector per weight matrix")
        if len(self.activations) != len(self.weights):
            raise ModelCorruptionError("MLP needs one activation tag per layer")
        if self.activations[:-1] != [RELU] * (len(self.weights) - 1) or self.activations[-1] != SOFTMAX:
            raise ModelCorruptionError(f"unsupported activation layout {self.activations}")

        width = N_SUPERLAYERS
        for index, (w, b) in enumerate(zip(self.weights, self.biases, strict=True)):
            if w.ndim != 2 or w.shape[0] != width or b.shape != (w.shape[1],):
                raise ModelCorruptionError(
                    f"layer {index}: weight {w.shape} / bias {b.shape} do not chain from width {width}"
                )
            width = w.shape[1]
        if width != N_CLASSES:
            raise ModelCorruptionError(f"output width must be {N_CLASSES}, got {width}")

    @property
    def layer_widths(self) -> list[int]:
        return [N_SUPERLAYERS, *(w.shape[1] for w in self.weights)]

    def logits(self, X: np.ndarray) -> np.ndarray:
        h = X
        for w, b in zip(self.weights[:-1], self.biases[:-1], strict=True):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def _predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.logits(X))

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        log_probs = _log_softmax(self.logits(X))
        return float(-log_probs[np.arange(len(y)), y].mean())


def init_mlp(hp: MlpHyperparams, rng: np.random.Generator) -> MlpModel:
    widths = [N_SUPERLAYERS, *hp.hidden_layers, N_CLASSES]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:], strict=True):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(weights, biases, hp)


def mlp_forward(model: MlpModel, features) -> tuple[float, float]:
    return model.predict_one(features)


def mlp_gradient(model: MlpModel, X: np.ndarray, y: np.ndarray) -> Gradients:
    """Backpropagated gradient of the mean cross-entropy over the batch."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise ValueError("gradient of an empty batch")
    if X.shape != (n, N_SUPERLAYERS):
        raise ModelCorruptionError(f"batch shape {X.shape} does not match {n} labels")

    activations = [X]
    for w, b in zip(model.weights[:-1], model.biases[:-1], strict=True):
        activations.append(np.maximum(activations[-1] @ w + b, 0.0))
    logits = activations[-1] @ model.weights[-1] + model.biases[-1]

    log_probs = _log_softmax(logits)
    loss = float(-log_probs[np.arange(n), y].mean())

    delta = np.exp(log_probs)
    delta[np.arange(n), y] -= 1.0
    delta /= n

    grad_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grad_b: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (activations[layer] > 0.0)

    return Gradients(weights=grad_w, biases=grad_b, loss=loss)


class _Adam:
    def __init__(self, model: MlpModel, hp: MlpHyperparams):
        self.hp = hp
        self.t = 0
        self.m = [np.zeros_like(p) for p in (*model.weights, *model.biases)]
        self.v = [np.zeros_like(p) for p in (*model.weights, *model.biases)]

    def step(self, model: MlpModel, grads: Gradients, lr: float) -> None:
        self.t += 1
        b1, b2 = self.hp.adam_beta1, self.hp.adam_beta2
        correction1 = 1.0 - b1**self.t
        correction2 = 1.0 - b2**self.t
        params = (*model.weights, *model.biases)
        for p, g, m, v in zip(params, (*grads.weights, *grads.biases), self.m, self.v, strict=True):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / correction1) / (np.sqrt(v / correction2) + self.hp.adam_eps)


def mlp_train(X: np.ndarray, y: np.ndarray, hp: MlpHyperparams) -> MlpModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = len(y)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")

    rng = np.random.default_rng(hp.seed)
    model = init_mlp(hp, rng)
    optimizer = _Adam(model, hp)

    lr = hp.initial_lr
    best_loss = np.inf
    stale_epochs = 0
    loss_history: list[float] = []
    lr_history: list[float] = []
    started = time.perf_counter()

    logger.info(
        f"Training MLP {model.layer_widths} on {n} rows (batch {hp.batch_size}, lr {hp.initial_lr})"
    )

    for epoch in range(1, hp.max_epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for batch, start in enumerate(range(0, n, hp.batch_size)):
            idx = order[start : start + hp.batch_size]
            grads = mlp_gradient(model, X[idx], y[idx])
            if not np.isfinite(grads.loss):
                raise NonFiniteLossError(epoch, batch, lr)
            optimizer.step(model, grads, lr)
            epoch_loss += grads.loss * len(idx)

        epoch_loss /= n
        loss_history.append(epoch_loss)
        lr_history.append(lr)
        logger.debug(f"Epoch {epoch}: loss {epoch_loss:.6f}, lr {lr:.2e}")

        if epoch_loss < best_loss:
            best_loss = epoch_loss
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= hp.lr_patience:
                lr *= hp.lr_factor
                stale_epochs = 0
                logger.info(f"Epoch {epoch}: loss stalled at {epoch_loss:.6f}, lr -> {lr:.2e}")
                if lr < hp.min_lr:
                    break

    model.metadata = TrainingMetadata(
        n_rows=n,
        train_accuracy=model.accuracy(X, y),
        epochs_run=len(loss_history),
        final_loss=loss_history[-1],
        loss_history=loss_history,
        lr_history=lr_history,
    )
    logger.info(
        f"MLP trained: {model.metadata.epochs_run} epochs, loss {model.metadata.final_loss:.6f}, "
        f"training accuracy {model.metadata.train_accuracy:.4f} in {time.perf_counter() - started:.1f}s"
    )
    return model
