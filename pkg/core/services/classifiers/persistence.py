import json
import logging
from pathlib import Path

import numpy as np
from pydantic import BaseModel as PydanticBase
from pydantic import ValidationError

from core.errors import (
    DataError,
    ModelCorruptionError,
    ModelFormatError,
    ModelKindError,
    ModelVersionError,
)
from core.services.classifiers.base import Classifier, TrainingMetadata
from core.services.classifiers.ert import DecisionTree, ErtHyperparams, ErtModel
from core.services.classifiers.mlp import MlpHyperparams, MlpModel

logger = logging.getLogger(__name__)

MODEL_FORMAT = "trackcull-model-v1"


class ModelDocument(PydanticBase):
    format: str
    kind: str
    hyperparams: dict
    metadata: TrainingMetadata
    parameters: dict


def _mlp_parameters(model: MlpModel) -> dict:
    return {
        "layers": [
            {"weights": w.tolist(), "bias": b.tolist(), "activation": activation}
            for w, b, activation in zip(model.weights, model.biases, model.activations, strict=True)
        ]
    }


def _ert_parameters(model: ErtModel) -> dict:
    return {
        "trees": [
            [
                [int(f), float(t), int(lo), int(hi), int(c[0]), int(c[1])]
                for f, t, lo, hi, c in zip(
                    tree.feature, tree.threshold, tree.left, tree.right, tree.counts, strict=True
                )
            ]
            for tree in model.trees
        ]
    }


def model_to_document(model: Classifier) -> ModelDocument:
    if isinstance(model, MlpModel):
        parameters = _mlp_parameters(model)
    elif isinstance(model, ErtModel):
        parameters = _ert_parameters(model)
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return ModelDocument(
        format=MODEL_FORMAT,
        kind=model.KIND,
        hyperparams=model.hyperparams.model_dump(),
        metadata=model.metadata,
        parameters=parameters,
    )


def _mlp_from_document(doc: ModelDocument) -> MlpModel:
    layers = doc.parameters["layers"]
    return MlpModel(
        [np.array(layer["weights"], dtype=np.float64) for layer in layers],
        [np.array(layer["bias"], dtype=np.float64) for layer in layers],
        MlpHyperparams.model_validate(doc.hyperparams),
        doc.metadata,
        [layer["activation"] for layer in layers],
    )


def _tree_from_nodes(nodes: list) -> DecisionTree:
    table = np.array(nodes, dtype=np.float64).reshape(-1, 6)
    return DecisionTree(
        feature=table[:, 0].astype(np.int64),
        threshold=table[:, 1],
        left=table[:, 2].astype(np.int64),
        right=table[:, 3].astype(np.int64),
        counts=table[:, 4:6].astype(np.int64),
    )


def _ert_from_document(doc: ModelDocument) -> ErtModel:
    return ErtModel(
        [_tree_from_nodes(nodes) for nodes in doc.parameters["trees"]],
        ErtHyperparams.model_validate(doc.hyperparams),
        doc.metadata,
    )


def model_from_document(doc: ModelDocument, expected_kind: str | None = None) -> Classifier:
    if doc.format != MODEL_FORMAT:
        raise ModelVersionError(f"unsupported model format {doc.format!r}, expected {MODEL_FORMAT!r}")
    if expected_kind is not None and doc.kind != expected_kind:
        raise ModelKindError(f"expected a {expected_kind!r} model, file holds {doc.kind!r}")

    builders = {MlpModel.KIND: _mlp_from_document, ErtModel.KIND: _ert_from_document}
    if doc.kind not in builders:
        raise ModelKindError(f"unknown model kind {doc.kind!r}")
    try:
        return builders[doc.kind](doc)
    except (KeyError, TypeError, ValueError, ValidationError) as e:
        raise ModelCorruptionError(f"{doc.kind} parameters are malformed: {e}") from e


def dump_model(model: Classifier) -> str:
    return json.dumps(model_to_document(model).model_dump(), indent=1) + "\n"


def save_model(model: Classifier, path: Path) -> None:
    try:
        Path(path).write_text(dump_model(model), encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot write model to {path}: {e}") from e
    logger.info(f"Saved {model.KIND} model to {path}")


def load_model(path: Path, expected_kind: str | None = None) -> Classifier:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read model from {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise ModelFormatError(f"{path} is not UTF-8 text: {e.reason} at byte {e.start}") from e

    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not valid JSON: {e}") from e
    try:
        doc = ModelDocument.model_validate(raw)
    except ValidationError as e:
        raise ModelFormatError(f"{path} is not a model document: {e.errors()[0]['msg']}") from e

    model = model_from_document(doc, expected_kind)
    logger.info(f"Loaded {model.KIND} model from {path}")
    return model
