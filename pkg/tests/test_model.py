import math

import numpy as np
import pytest

from connclf.connectivity import FeatureMask
from connclf.model import (
    ModelParams,
    TrainConfig,
    decode,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    loss,
    predict,
    save_checkpoint,
    sigmoid,
    train,
)


def zero_params(d_in=2, d_h=1):
    return ModelParams(
        np.zeros((d_h, d_in)), np.zeros(d_h), np.zeros(d_in),
        np.zeros((1, d_h)), 0.0,
    )


def random_params(rng, d_in, d_h):
    params = init_params(d_in, d_h, rng)
    params.b_enc = rng.normal(size=d_h) * 0.1
    params.b_dec = rng.normal(size=d_in) * 0.1
    params.b_slp = float(rng.normal() * 0.1)
    return params


def direct_loss(params, x, y, weights=(1.0, 1.0)):
    """Scalar re-evaluation of the objective, independent of the library path."""
    h = np.tanh(params.W_enc @ x + params.b_enc)
    x_recon = params.W_enc.T @ h + params.b_dec
    z = float(params.W_slp[0] @ h + params.b_slp)
    mse = float(np.mean((x_recon - x) ** 2))
    p = 1.0 / (1.0 + math.exp(-z))
    bce = -(y * math.log(p) + (1 - y) * math.log(1 - p))
    return weights[0] * mse + weights[1] * bce, mse, bce


class TestSigmoid:
    def test_midpoint(self):
        assert sigmoid(0.0) == 0.5

    def test_extreme_inputs_stay_finite(self):
        assert sigmoid(1000.0) == 1.0  # saturates cleanly, no overflow
        assert sigmoid(-1000.0) == 0.0
        assert 0.0 < sigmoid(30.0) <= 1.0
        assert 0.0 <= sigmoid(-30.0) < 1.0

    def test_array_input(self):
        out = sigmoid(np.array([-1.0, 0.0, 1.0]))
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)

    def test_complement_symmetry(self, rng):
        z = rng.normal(size=20) * 5
        np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-12)


class TestForward:
    def test_zero_parameters(self):
        h, x_recon, prob = forward(zero_params(3, 2), np.array([0.4, -1.0, 2.0]))
        np.testing.assert_array_equal(h, [0.0, 0.0])
        np.testing.assert_array_equal(x_recon, [0.0, 0.0, 0.0])
        assert prob == 0.5

    def test_hand_computed_case(self):
        params = ModelParams(
            np.array([[1.0, 0.0]]), np.array([0.5]), np.zeros(2),
            np.array([[0.0]]), 0.0,
        )
        h, x_recon, prob = forward(params, np.array([0.0, 0.0]))
        expected_h = math.tanh(0.5)
        assert h[0] == pytest.approx(expected_h, abs=1e-15)
        np.testing.assert_allclose(x_recon, [expected_h, 0.0], atol=1e-15)
        assert prob == 0.5

    def test_decoder_is_encoder_transpose(self, rng):
        params = random_params(rng, 6, 3)
        x = rng.normal(size=6)
        h, x_recon, _ = forward(params, x)
        np.testing.assert_allclose(
            x_recon, params.W_enc.T @ h + params.b_dec, atol=1e-12
        )

    def test_shape_mismatch_rejected(self, rng):
        params = random_params(rng, 4, 2)
        with pytest.raises(ValueError, match="expected"):
            forward(params, np.ones(5))


class TestDecode:
    def test_materialized_decoder_matches_tied_view_bitwise(self, rng):
        for _ in range(20):
            d_h = int(rng.integers(1, 40))
            d_in = int(rng.integers(1, 40))
            n = int(rng.integers(1, 16))
            W_enc = rng.normal(size=(d_h, d_in))
            b_dec = rng.normal(size=d_in)
            H = rng.normal(size=(n, d_h))
            W_dec = W_enc.T.copy()  # materialized (d_in, d_h) decoder
            via_tie = decode(W_enc.T, H, b_dec)
            via_materialized = decode(W_dec, H, b_dec)
            np.testing.assert_array_equal(via_tie, via_materialized)


class TestLoss:
    def test_zero_logit_gives_log_two(self):
        params = zero_params(2, 1)
        total, mse, bce = loss(params, np.array([0.0, 0.0]), 1)
        assert bce == pytest.approx(math.log(2.0), abs=1e-15)
        assert mse == 0.0
        assert total == pytest.approx(math.log(2.0), abs=1e-15)

    def test_zero_params_mse_is_mean_square(self):
        params = zero_params(2, 1)
        x = np.array([3.0, -1.0])
        total, mse, bce = loss(params, x, 0)
        assert mse == pytest.approx(np.mean(x**2), abs=1e-15)

    def test_matches_direct_evaluation(self, rng):
        for _ in range(30):
            d_in, d_h = int(rng.integers(2, 7)), int(rng.integers(1, 5))
            params = random_params(rng, d_in, d_h)
            x = rng.normal(size=d_in)
            y = int(rng.integers(0, 2))
            w = (float(rng.uniform(0.1, 2.0)), float(rng.uniform(0.1, 2.0)))
            got = loss(params, x, y, w)
            want = direct_loss(params, x, y, w)
            np.testing.assert_allclose(got, want, atol=1e-12)

    def test_loss_weights_scale_components(self, rng):
        params = random_params(rng, 3, 2)
        x = rng.normal(size=3)
        total, mse, bce = loss(params, x, 1, (2.0, 0.5))
        assert total == pytest.approx(2.0 * mse + 0.5 * bce, abs=1e-15)

    def test_bad_label_rejected(self, rng):
        params = random_params(rng, 3, 2)
        with pytest.raises(ValueError, match="label"):
            loss(params, np.zeros(3), 2)


def finite_difference(params, X, y, weights, mode, name, shape, step=1e-5):
    grad = np.zeros(shape)
    flat = grad.reshape(-1)
    for idx in range(flat.size):
        samples = []
        for sign in (+1.0, -1.0):
            probe = params.copy()
            if name == "b_slp":
                probe.b_slp += sign * step
            else:
                buf = getattr(probe, name).reshape(-1)
                buf[idx] += sign * step
            totals = []
            for x_row, y_row in zip(X, y):
                total, mse, bce = loss(probe, x_row, int(y_row), weights)
                totals.append(total if mode == "joint" else bce)
            samples.append(float(np.mean(totals)))
        flat[idx] = (samples[0] - samples[1]) / (2 * step)
    return grad


class TestGradients:
    def test_matches_finite_differences(self, rng):
        worst = 0.0
        for _ in range(3):
            d_in, d_h = int(rng.integers(2, 7)), int(rng.integers(1, 5))
            n = int(rng.integers(1, 4))
            params = random_params(rng, d_in, d_h)
            X = rng.normal(size=(n, d_in))
            y = rng.integers(0, 2, size=n).astype(float)
            weights = (1.0, 1.0)
            for mode in ("joint", "finetune"):
                grads = gradients(params, X, y, mode, weights)
                for name, shape in (
                    ("W_enc", (d_h, d_in)), ("b_enc", (d_h,)),
                    ("b_dec", (d_in,)), ("W_slp", (1, d_h)), ("b_slp", (1,)),
                ):
                    if mode == "finetune" and name in ("W_enc", "b_enc", "b_dec"):
                        continue
                    numeric = finite_difference(
                        params, X, y, weights, mode, name, shape
                    )
                    analytic = np.asarray(getattr(grads, name), dtype=np.float64)
                    analytic = analytic.reshape(shape)
                    rel = np.abs(analytic - numeric) / np.maximum(
                        1.0, np.maximum(np.abs(analytic), np.abs(numeric))
                    )
                    worst = max(worst, float(rel.max()))
        assert worst < 1e-6

    def test_finetune_autoencoder_gradients_identically_zero(self, rng):
        params = random_params(rng, 5, 3)
        X = rng.normal(size=(4, 5))
        y = np.array([0.0, 1.0, 1.0, 0.0])
        grads = gradients(params, X, y, "finetune")
        assert np.all(grads.W_enc == 0.0)
        assert np.all(grads.b_enc == 0.0)
        assert np.all(grads.b_dec == 0.0)
        assert np.any(grads.W_slp != 0.0)

    def test_duplicated_sample_equals_single(self, rng):
        # batch-mean invariance; BLAS reduction order differs between
        # batch sizes, so equality holds only to rounding error
        params = random_params(rng, 4, 2)
        x = rng.normal(size=4)
        single = gradients(params, x[None, :], [1], "joint")
        doubled = gradients(params, np.stack([x, x]), [1, 1], "joint")
        for name in ("W_enc", "b_enc", "b_dec", "W_slp"):
            np.testing.assert_allclose(
                getattr(single, name), getattr(doubled, name),
                rtol=1e-13, atol=1e-15,
            )
        assert abs(single.b_slp - doubled.b_slp) <= 1e-15

    def test_empty_batch_rejected(self, rng):
        params = random_params(rng, 3, 2)
        with pytest.raises(ValueError, match="empty"):
            gradients(params, np.empty((0, 3)), [], "joint")

    def test_unknown_mode_rejected(self, rng):
        params = random_params(rng, 3, 2)
        with pytest.raises(ValueError, match="mode"):
            gradients(params, np.ones((1, 3)), [1], "warmup")


def toy_task(rng, n=24):
    labels = np.array([0, 1] * (n // 2))
    offsets = np.where(labels == 1, 1.0, -1.0)
    features = np.column_stack(
        [offsets + 0.1 * rng.normal(size=n), 0.1 * rng.normal(size=n)]
    )
    return features, labels


class TestTrain:
    def test_bit_identical_reruns(self, rng):
        features, labels = toy_task(rng)
        config = TrainConfig(joint_epochs=5, finetune_epochs=2, seed=11)
        a = train(features, labels, config)
        b = train(features, labels, config)
        np.testing.assert_array_equal(a.params.W_enc, b.params.W_enc)
        np.testing.assert_array_equal(a.params.W_slp, b.params.W_slp)
        np.testing.assert_array_equal(a.params.b_dec, b.params.b_dec)
        assert a.params.b_slp == b.params.b_slp
        np.testing.assert_array_equal(
            a.joint_loss_per_epoch, b.joint_loss_per_epoch
        )

    def test_seed_changes_parameters(self, rng):
        features, labels = toy_task(rng)
        a = train(features, labels, TrainConfig(joint_epochs=2, seed=1))
        b = train(features, labels, TrainConfig(joint_epochs=2, seed=2))
        assert not np.array_equal(a.params.W_enc, b.params.W_enc)

    def test_linearly_separable_task_fits(self, rng):
        features, labels = toy_task(rng)
        config = TrainConfig(
            joint_epochs=200, finetune_epochs=0, batch_size=4,
            learning_rate=0.1, seed=0,
        )
        result = train(features, labels, config)
        predicted, _ = predict(result.params, features)
        assert np.array_equal(predicted, labels)

    def test_joint_loss_decreases(self, rng):
        features = rng.standard_normal((40, 12)) * 0.5
        labels = np.array([0, 1] * 20)
        config = TrainConfig(
            joint_epochs=30, finetune_epochs=0, learning_rate=0.01, seed=3
        )
        result = train(features, labels, config)
        trajectory = result.joint_loss_per_epoch
        head = trajectory[:3].mean()
        tail = trajectory[-3:].mean()
        assert tail < head

    def test_finetune_freezes_autoencoder_bitwise(self, rng):
        features, labels = toy_task(rng)
        snapshots = {}

        def watch(phase, epoch, step, params):
            if phase == "joint":
                snapshots["W_enc"] = params.W_enc.copy()
                snapshots["b_enc"] = params.b_enc.copy()
                snapshots["b_dec"] = params.b_dec.copy()
            else:
                np.testing.assert_array_equal(params.W_enc, snapshots["W_enc"])
                np.testing.assert_array_equal(params.b_enc, snapshots["b_enc"])
                np.testing.assert_array_equal(params.b_dec, snapshots["b_dec"])

        config = TrainConfig(joint_epochs=4, finetune_epochs=3, seed=5,
                             learning_rate=0.05)
        result = train(features, labels, config, step_callback=watch)
        np.testing.assert_array_equal(result.params.W_enc, snapshots["W_enc"])

    def test_finetune_still_moves_head(self, rng):
        features, labels = toy_task(rng)
        captured = {}

        def watch(phase, epoch, step, params):
            if phase == "joint":
                captured["W_slp"] = params.W_slp.copy()

        config = TrainConfig(joint_epochs=2, finetune_epochs=2, seed=5,
                             learning_rate=0.05)
        result = train(features, labels, config, step_callback=watch)
        assert not np.array_equal(result.params.W_slp, captured["W_slp"])

    def test_default_bottleneck_is_half_input(self, rng):
        features, labels = toy_task(rng)
        features = np.hstack([features] * 5)  # d_in = 10
        result = train(features, labels, TrainConfig(joint_epochs=1, seed=0))
        assert result.params.d_h == 5

    def test_explicit_bottleneck(self, rng):
        features, labels = toy_task(rng)
        config = TrainConfig(joint_epochs=1, bottleneck_dim=7, seed=0)
        result = train(features, labels, config)
        assert result.params.d_h == 7

    def test_single_class_rejected(self, rng):
        features = rng.standard_normal((6, 4))
        with pytest.raises(ValueError, match="both classes"):
            train(features, np.ones(6, dtype=int), TrainConfig(joint_epochs=1))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")  # overflow en route
    def test_divergence_aborts_with_context(self, rng):
        features, labels = toy_task(rng)
        config = TrainConfig(
            joint_epochs=50, finetune_epochs=0, learning_rate=1e12, seed=0
        )
        with pytest.raises(FloatingPointError, match="learning_rate"):
            train(features, labels, config)

    def test_epoch_loss_lengths(self, rng):
        features, labels = toy_task(rng)
        config = TrainConfig(joint_epochs=4, finetune_epochs=2, seed=0)
        result = train(features, labels, config)
        assert result.joint_loss_per_epoch.shape == (4,)
        assert result.finetune_loss_per_epoch.shape == (2,)


class TestPredict:
    def test_threshold_is_label_one_at_half(self):
        label, prob = predict(zero_params(3, 2), np.zeros(3))
        assert prob == 0.5
        assert label == 1

    def test_batch_matches_single(self, rng):
        params = random_params(rng, 5, 3)
        X = rng.normal(size=(8, 5))
        batch_labels, batch_probs = predict(params, X)
        for i in range(8):
            label, prob = predict(params, X[i])
            assert label == batch_labels[i]
            assert prob == pytest.approx(batch_probs[i], abs=1e-12)

    def test_shape_mismatch_rejected(self, rng):
        params = random_params(rng, 5, 3)
        with pytest.raises(ValueError, match="expects"):
            predict(params, np.ones((2, 4)))


class TestTrainConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"joint_epochs": -1},
            {"batch_size": 0},
            {"learning_rate": 0.0},
            {"bottleneck_dim": 0},
            {"momentum": 1.0},
            {"loss_weights": (1.0, -1.0)},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path, rng):
        params = random_params(rng, 6, 3)
        mask = FeatureMask(np.arange(6), 15)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, mask, {"seed": 9})
        loaded, loaded_mask, config = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.W_enc, params.W_enc)
        np.testing.assert_array_equal(loaded.b_enc, params.b_enc)
        np.testing.assert_array_equal(loaded.b_dec, params.b_dec)
        np.testing.assert_array_equal(loaded.W_slp, params.W_slp)
        assert loaded.b_slp == params.b_slp
        np.testing.assert_array_equal(loaded_mask.indices, mask.indices)
        assert config == {"seed": 9}

    def test_reloaded_predictions_bitwise_match(self, tmp_path, rng):
        params = random_params(rng, 6, 3)
        mask = FeatureMask(np.arange(6), 15)
        X = rng.normal(size=(10, 6))
        before_labels, before_probs = predict(params, X)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, mask)
        loaded, _, _ = load_checkpoint(path)
        after_labels, after_probs = predict(loaded, X)
        np.testing.assert_array_equal(before_probs, after_probs)
        np.testing.assert_array_equal(before_labels, after_labels)

    def test_missing_format_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"d_in": 2}')
        with pytest.raises(ValueError, match="format_version"):
            load_checkpoint(path)

    def test_unsupported_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 99}')
        with pytest.raises(ValueError, match="unsupported"):
            load_checkpoint(path)

    def test_dimension_mismatch_rejected(self, tmp_path, rng):
        params = random_params(rng, 4, 2)
        mask = FeatureMask(np.arange(4), 10)
        path = tmp_path / "model.json"
        save_checkpoint(path, params, mask)
        import json

        doc = json.loads(path.read_text())
        doc["W_enc"] = doc["W_enc"][:-1]
        path.write_text(json.dumps(doc))
        with pytest.raises(ValueError, match="W_enc"):
            load_checkpoint(path)

    def test_mask_size_mismatch_rejected(self, tmp_path, rng):
        params = random_params(rng, 4, 2)
        mask = FeatureMask(np.arange(5), 10)  # 5 features, model expects 4
        path = tmp_path / "model.json"
        save_checkpoint(path, params, mask)
        with pytest.raises(ValueError, match="mask"):
            load_checkpoint(path)
