from core.services.classifiers.base import Classifier, TrainingMetadata
from core.services.classifiers.ert import ErtHyperparams, ErtModel, ert_predict, ert_train
from core.services.classifiers.mlp import MlpHyperparams, MlpModel, mlp_forward, mlp_train
from core.services.classifiers.persistence import load_model, save_model
from core.services.dataset import Dataset

__all__ = [
    "Classifier",
    "ErtHyperparams",
    "ErtModel",
    "MlpHyperparams",
    "MlpModel",
    "TrainingMetadata",
    "ert_predict",
    "ert_train",
    "load_model",
    "mlp_forward",
    "mlp_train",
    "save_model",
    "train_classifier",
]


def train_classifier(
    dataset: Dataset, hyperparams: MlpHyperparams | ErtHyperparams, threads: int = 1
) -> Classifier:
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if isinstance(hyperparams, MlpHyperparams):
        return mlp_train(dataset.features, dataset.labels, hyperparams)
    return ert_train(dataset.features, dataset.labels, hyperparams, threads)
