import json

import numpy as np
import pytest

from core.errors import (
    DataError,
    ModelCorruptionError,
    ModelFormatError,
    ModelKindError,
    ModelVersionError,
)
from core.services.classifiers import (
    ErtHyperparams,
    ErtModel,
    MlpHyperparams,
    MlpModel,
    ert_train,
    load_model,
    mlp_train,
    save_model,
)
from core.services.classifiers.persistence import MODEL_FORMAT, dump_model
from core.tests.conftest import separable_rows


@pytest.fixture(scope="module")
def toy_rows():
    return separable_rows(120, feature=2, seed=3)


@pytest.fixture(scope="module")
def mlp(toy_rows):
    return mlp_train(*toy_rows, MlpHyperparams(hidden_layers=[8, 8], max_epochs=5, seed=2))


@pytest.fixture(scope="module")
def ert(toy_rows):
    return ert_train(*toy_rows, ErtHyperparams(n_estimators=7, seed=2))


class TestRoundTrip:
    @pytest.mark.parametrize("kind", ["mlp", "ert"])
    def test_loaded_model_predicts_identically(self, kind, request, tmp_path):
        model = request.getfixturevalue(kind)
        path = tmp_path / "model.json"
        rows = np.random.default_rng(0).random((1000, 6))

        save_model(model, path)
        loaded = load_model(path, expected_kind=kind)

        assert type(loaded) is type(model)
        assert np.array_equal(loaded.predict_proba(rows), model.predict_proba(rows))

    def test_hyperparams_and_metadata_survive(self, ert, tmp_path):
        path = tmp_path / "model.json"

        save_model(ert, path)
        loaded = load_model(path)

        assert isinstance(loaded, ErtModel)
        assert loaded.hyperparams == ert.hyperparams
        assert loaded.metadata == ert.metadata

    def test_mlp_keeps_layer_activations(self, mlp, tmp_path):
        path = tmp_path / "model.json"

        save_model(mlp, path)
        layers = json.loads(path.read_text())["parameters"]["layers"]

        assert [layer["activation"] for layer in layers] == ["relu", "relu", "softmax"]
        assert isinstance(load_model(path), MlpModel)

    def test_same_seed_same_bytes(self, toy_rows):
        hp = ErtHyperparams(n_estimators=4, seed=11)

        assert dump_model(ert_train(*toy_rows, hp)) == dump_model(ert_train(*toy_rows, hp))


class TestLoadModelErrors:
    def test_wrong_kind(self, ert, tmp_path):
        path = tmp_path / "model.json"
        save_model(ert, path)

        with pytest.raises(ModelKindError):
            load_model(path, expected_kind="mlp")

    def test_truncated_file(self, mlp, tmp_path):
        path = tmp_path / "model.json"
        save_model(mlp, path)
        path.write_text(path.read_text()[:200])

        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_not_a_model_document(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"weights": []}')

        with pytest.raises(ModelFormatError):
            load_model(path)

    def test_bytes_outside_utf8(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_bytes(b'{"kind": "mlp\xff"}')

        with pytest.raises(ModelFormatError, match="UTF-8"):
            load_model(path)

    def test_unknown_format_version(self, mlp, tmp_path):
        path = tmp_path / "model.json"
        doc = json.loads(dump_model(mlp))
        doc["format"] = "trackcull-model-v0"
        path.write_text(json.dumps(doc))

        with pytest.raises(ModelVersionError, match=MODEL_FORMAT):
            load_model(path)

    def test_broken_layer_shapes(self, mlp, tmp_path):
        path = tmp_path / "model.json"
        doc = json.loads(dump_model(mlp))
        doc["parameters"]["layers"][1]["weights"] = [[0.0, 0.0]]
        path.write_text(json.dumps(doc))

        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_tree_pointing_past_its_nodes(self, ert, tmp_path):
        path = tmp_path / "model.json"
        doc = json.loads(dump_model(ert))
        doc["parameters"]["trees"][0] = [[0, 0.5, 1, 7, 1, 1], [-1, 0.0, -1, -1, 1, 0]]
        path.write_text(json.dumps(doc))

        with pytest.raises(ModelCorruptionError):
            load_model(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_model(tmp_path / "absent.json")
