import math

import numpy as np
import pytest
from pydantic import ValidationError

from core.errors import ModelCorruptionError, NonFiniteLossError
from core.services.classifiers.mlp import (
    MlpHyperparams,
    MlpModel,
    init_mlp,
    mlp_forward,
    mlp_gradient,
    mlp_train,
)
from core.tests.conftest import separable_rows


def zero_model(hidden: list[int]) -> MlpModel:
    widths = [6, *hidden, 2]
    return MlpModel(
        [np.zeros((a, b)) for a, b in zip(widths[:-1], widths[1:], strict=True)],
        [np.zeros(b) for b in widths[1:]],
    )


def numeric_gradient(model: MlpModel, X, y, param: np.ndarray, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param)
    for index in np.ndindex(param.shape):
        original = param[index]
        param[index] = original + h
        up = model.loss(X, y)
        param[index] = original - h
        down = model.loss(X, y)
        param[index] = original
        grad[index] = (up - down) / (2 * h)
    return grad


class TestMlpHyperparams:
    def test_defaults(self):
        hp = MlpHyperparams()

        assert hp.hidden_layers == [64, 64, 64]
        assert hp.batch_size == 32
        assert hp.initial_lr == 1e-3
        assert (hp.adam_beta1, hp.adam_beta2, hp.adam_eps) == (0.9, 0.999, 1e-8)
        assert (hp.lr_patience, hp.lr_factor, hp.min_lr) == (2, 0.2, 1e-6)

    @pytest.mark.parametrize(
        "kwargs", [{"hidden_layers": [64, 0]}, {"lr_factor": 1.0}, {"batch_size": 0}]
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            MlpHyperparams(**kwargs)


class TestMlpForward:
    def test_zero_model_is_undecided(self):
        assert mlp_forward(zero_model([64, 64, 64]), [0.3] * 6) == (0.5, 0.5)

    def test_hand_computed_softmax(self):
        w1 = np.zeros((6, 1))
        w1[0, 0] = 2.0
        model = MlpModel([w1, np.array([[1.0, -1.0]])], [np.zeros(1), np.zeros(2)])

        p_invalid, p_valid = mlp_forward(model, [1, 0, 0, 0, 0, 0])

        expected = math.exp(-2) / (math.exp(2) + math.exp(-2))
        assert p_valid == pytest.approx(expected, abs=1e-12)
        assert p_valid == pytest.approx(0.0180, abs=1e-4)
        assert p_invalid == pytest.approx(1 - expected, abs=1e-12)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(1)
        model = init_mlp(MlpHyperparams(), rng)

        proba = model.predict_proba(rng.random((500, 6)))

        assert np.all(np.abs(proba.sum(axis=1) - 1.0) < 1e-9)

    def test_score_is_valid_column(self):
        rng = np.random.default_rng(2)
        model = init_mlp(MlpHyperparams(hidden_layers=[8]), rng)
        X = rng.random((40, 6))

        np.testing.assert_array_equal(model.score(X), model.predict_proba(X)[:, 1])

    def test_wrong_width_is_corruption(self):
        with pytest.raises(ModelCorruptionError):
            zero_model([4]).predict_proba(np.zeros((2, 5)))

    def test_broken_shape_chain_is_corruption(self):
        with pytest.raises(ModelCorruptionError):
            MlpModel([np.zeros((6, 4)), np.zeros((3, 2))], [np.zeros(4), np.zeros(2)])


class TestMlpGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        for trial in range(10):
            model = init_mlp(MlpHyperparams(hidden_layers=[5, 4], seed=trial), rng)
            X = rng.random((8, 6))
            y = rng.integers(0, 2, 8)

            grads = mlp_gradient(model, X, y)

            for analytic, param in zip(
                [*grads.weights, *grads.biases], [*model.weights, *model.biases], strict=True
            ):
                numeric = numeric_gradient(model, X, y, param)
                error = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
                assert error.max() < 1e-4

    def test_zero_model_output_bias_gradient_is_symmetric(self):
        grads = mlp_gradient(zero_model([3]), np.full((4, 6), 0.5), np.ones(4, dtype=int))

        assert grads.biases[-1][0] == pytest.approx(0.5)
        assert grads.biases[-1][1] == pytest.approx(-0.5)

    def test_duplicated_batch_gives_same_gradient(self):
        rng = np.random.default_rng(3)
        model = init_mlp(MlpHyperparams(hidden_layers=[8, 8]), rng)
        X = rng.random((10, 6))
        y = rng.integers(0, 2, 10)

        single = mlp_gradient(model, X, y)
        doubled = mlp_gradient(model, np.vstack([X, X]), np.concatenate([y, y]))

        for a, b in zip(single.weights + single.biases, doubled.weights + doubled.biases, strict=True):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)

    def test_empty_batch_rejected(self):
        with pytest.raises(ValueError):
            mlp_gradient(zero_model([3]), np.zeros((0, 6)), np.zeros(0, dtype=int))


class TestMlpTrain:
    def test_learns_separable_toy_set(self):
        X, y = separable_rows(200, feature=0, seed=0)

        model = mlp_train(X, y, MlpHyperparams(max_epochs=50, seed=1))

        assert model.accuracy(X, y) == 1.0
        assert model.metadata.train_accuracy == 1.0

    def test_loss_history(self):
        X, y = separable_rows(200, feature=2, seed=4)

        model = mlp_train(X, y, MlpHyperparams(max_epochs=20))

        history = model.metadata.loss_history
        assert len(history) == model.metadata.epochs_run == 20
        assert all(np.isfinite(history))
        assert history[-1] <= history[0]
        assert model.metadata.lr_history[0] == 1e-3
        assert model.metadata.lr_history == sorted(model.metadata.lr_history, reverse=True)

    def test_plateau_reduces_lr_and_stops(self):
        # identical rows with opposite labels: the loss cannot keep improving
        X = np.full((64, 6), 0.5)
        y = np.tile([0, 1], 32)

        model = mlp_train(X, y, MlpHyperparams(hidden_layers=[4], max_epochs=500))

        lrs = model.metadata.lr_history
        assert model.metadata.epochs_run < 500
        assert min(lrs) < 1e-3
        steps = [after / before for before, after in zip(lrs, lrs[1:], strict=False)]
        assert all(step == pytest.approx(1.0) or step == pytest.approx(0.2) for step in steps)

    def test_deterministic(self):
        X, y = separable_rows(100, feature=1, seed=2)
        hp = MlpHyperparams(hidden_layers=[16, 16], max_epochs=5, seed=9)

        first = mlp_train(X, y, hp)
        second = mlp_train(X, y, hp)

        for a, b in zip(first.weights + first.biases, second.weights + second.biases, strict=True):
            assert np.array_equal(a, b)

    def test_non_finite_loss_aborts(self):
        X, y = separable_rows(40, feature=0, seed=0)
        X[3, 2] = np.nan

        with pytest.raises(NonFiniteLossError) as exc_info:
            mlp_train(X, y, MlpHyperparams(hidden_layers=[4], max_epochs=3))

        assert exc_info.value.epoch == 1
