"""Network forward/backward math, training loop, normalization, prediction."""

import numpy as np
import pytest

from skyplan.errors import (InsufficientHistoryError, TrainingDivergenceError,
                            ValidationError)
from skyplan.predictor import (Mlp, Normalizer, TrainConfig, backprop_step,
                               fit_normalizer, mean_error, predict_next_day,
                               train)


def small_net(rng, sizes=(2, 3, 1)):
    return Mlp.random(sizes, rng)


def numeric_gradient(net, x, y, layer, idx, kind, step=1e-5):
    store = net.weights[layer] if kind == "w" else net.thresholds[layer]
    orig = store[idx]

    def err():
        out = net.forward(x)
        return 0.5 * float(((out - y) ** 2).sum())

    store[idx] = orig + step
    plus = err()
    store[idx] = orig - step
    minus = err()
    store[idx] = orig
    return (plus - minus) / (2 * step)


class TestForward:
    def test_all_zero_parameters_give_half(self):
        net = Mlp((3, 4, 2),
                  [np.zeros((4, 3)), np.zeros((2, 4))],
                  [np.zeros(4), np.zeros(2)])
        out = net.forward(np.array([1.0, -2.0, 0.5]))
        assert np.allclose(out, 0.5)

    def test_hand_evaluated_1_1_1(self):
        net = Mlp((1, 1, 1), [np.array([[1.0]]), np.array([[1.0]])],
                  [np.zeros(1), np.zeros(1)])
        out = net.forward(np.array([0.0]))
        hidden = 1 / (1 + np.exp(0.0))
        assert out[0] == pytest.approx(1 / (1 + np.exp(-hidden)))

    def test_hidden_permutation_invariance(self, rng):
        net = small_net(rng, (3, 5, 2))
        x = rng.uniform(-1, 1, 3)
        base = net.forward(x)
        perm = rng.permutation(5)
        permuted = Mlp(
            net.layer_sizes,
            [net.weights[0][perm], net.weights[1][:, perm]],
            [net.thresholds[0][perm], net.thresholds[1]],
        )
        assert np.allclose(permuted.forward(x), base)

    def test_outputs_in_unit_interval(self, rng):
        net = small_net(rng, (4, 8, 3))
        for _ in range(20):
            out = net.forward(rng.uniform(-5, 5, 4))
            assert np.all(out > 0) and np.all(out < 1)

    def test_shape_mismatch_rejected(self, rng):
        net = small_net(rng)
        with pytest.raises(ValidationError):
            net.forward(np.zeros(5))


class TestBackpropStep:
    def test_zero_learning_rate_keeps_parameters(self, rng):
        net = small_net(rng)
        before = [w.copy() for w in net.weights]
        x, y = rng.uniform(0, 1, 2), rng.uniform(0, 1, 1)
        err = backprop_step(net, x, y, learning_rate=0.0)
        assert err > 0
        assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))

    def test_exact_fit_is_stationary(self, rng):
        net = small_net(rng)
        x = rng.uniform(0, 1, 2)
        y = net.forward(x).copy()
        before = [w.copy() for w in net.weights]
        err = backprop_step(net, x, y, learning_rate=0.9)
        assert err == 0.0
        assert all(np.array_equal(a, b) for a, b in zip(before, net.weights))

    def test_gradients_match_finite_differences(self, rng):
        net = small_net(rng, (2, 3, 1))
        x, y = rng.uniform(0, 1, 2), rng.uniform(0.1, 0.9, 1)
        gw, gt, _ = net.gradients(x, y)
        for layer in range(2):
            for idx in np.ndindex(net.weights[layer].shape):
                fd = numeric_gradient(net, x, y, layer, idx, "w")
                an = gw[layer][idx]
                assert abs(fd - an) <= 1e-4 * max(abs(fd), abs(an), 1e-8)
            for i in range(net.thresholds[layer].size):
                fd = numeric_gradient(net, x, y, layer, (i,), "t")
                an = gt[layer][i]
                assert abs(fd - an) <= 1e-4 * max(abs(fd), abs(an), 1e-8)

    def test_small_step_never_increases_sample_error(self, rng):
        for _ in range(20):
            net = small_net(rng, (3, 6, 2))
            x, y = rng.uniform(0, 1, 3), rng.uniform(0.05, 0.95, 2)
            before = backprop_step(net, x, y, learning_rate=1e-4)
            after = 0.5 * float(((net.forward(x) - y) ** 2).sum())
            assert after <= before + 1e-12


class TestTrain:
    def xor_data(self):
        xs = [np.array(v, dtype=float) for v in ([0, 0], [0, 1], [1, 0], [1, 1])]
        ys = [np.array([t], dtype=float) for t in (0.0, 1.0, 1.0, 0.0)]
        return list(zip(xs, ys))

    def test_infinite_threshold_stops_after_one_epoch(self, rng):
        net = small_net(rng)
        cfg = TrainConfig(learning_rate=0.1, max_epochs=50,
                          error_threshold=np.inf, rng_seed=0)
        _, trace = train(net, self.xor_data(), cfg)
        assert len(trace) == 1

    def test_xor_converges(self):
        rng = np.random.default_rng(42)
        net = Mlp.random((2, 4, 1), rng)
        cfg = TrainConfig(learning_rate=0.5, max_epochs=20000,
                          error_threshold=0.05, rng_seed=42)
        _, trace = train(net, self.xor_data(), cfg)
        assert trace[-1] < 0.05
        assert len(trace) < 20000

    def test_identical_seeds_give_identical_weights(self):
        results = []
        for _ in range(2):
            rng = np.random.default_rng(9)
            net = Mlp.random((2, 4, 1), rng)
            cfg = TrainConfig(learning_rate=0.4, max_epochs=30, rng_seed=9,
                              shuffle=True)
            train(net, self.xor_data(), cfg)
            results.append([w.copy() for w in net.weights])
        assert all(np.array_equal(a, b) for a, b in zip(*results))

    def test_final_error_not_above_initial(self, rng):
        for _ in range(5):
            net = small_net(rng, (2, 5, 1))
            cfg = TrainConfig(learning_rate=0.2, max_epochs=40, rng_seed=1)
            _, trace = train(net, self.xor_data(), cfg)
            assert trace[-1] <= trace[0]

    @pytest.mark.filterwarnings("ignore:invalid value encountered")
    def test_divergence_detection(self, rng):
        net = small_net(rng)
        net.weights[0][0, 0] = np.inf
        cfg = TrainConfig(learning_rate=0.1, max_epochs=5, rng_seed=0)
        with pytest.raises(TrainingDivergenceError) as excinfo:
            train(net, self.xor_data(), cfg)
        assert "epoch 1" in str(excinfo.value)

    def test_rprop_descends(self):
        rng = np.random.default_rng(4)
        net = Mlp.random((2, 4, 1), rng)
        cfg = TrainConfig(learning_rate=0.5, max_epochs=300,
                          error_threshold=0.05, rng_seed=4, algorithm="rprop")
        _, trace = train(net, self.xor_data(), cfg)
        assert trace[-1] < 0.05

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            TrainConfig(learning_rate=1.5)
        with pytest.raises(ValidationError):
            TrainConfig(max_epochs=0)
        with pytest.raises(ValidationError):
            TrainConfig(algorithm="adam")


class TestNormalizer:
    def test_basic_scaling(self):
        norm = fit_normalizer(np.array([[2.0], [4.0], [6.0]]))
        assert np.allclose(norm.apply(np.array([[2.0], [4.0], [6.0]])),
                           [[0.0], [0.5], [1.0]])

    def test_constant_feature_maps_to_half(self):
        norm = fit_normalizer(np.array([[7.0], [7.0], [7.0]]))
        scaled = norm.apply(np.array([[7.0], [7.0]]))
        assert np.allclose(scaled, 0.5)
        assert np.allclose(norm.invert(scaled), 7.0)

    def test_round_trip(self, rng):
        data = rng.uniform(-100, 100, (50, 4))
        norm = fit_normalizer(data)
        assert np.allclose(norm.invert(norm.apply(data)), data, atol=1e-12)

    def test_mixed_columns(self):
        data = np.array([[1.0, 5.0], [3.0, 5.0]])
        norm = fit_normalizer(data)
        scaled = norm.apply(data)
        assert np.allclose(scaled[:, 0], [0.0, 1.0])
        assert np.allclose(scaled[:, 1], 0.5)


class TestPredictNextDay:
    def test_constant_history_predicts_constant(self):
        history = np.full((3, 8, 24), 2222.0)
        cfg = TrainConfig(learning_rate=0.3, max_epochs=5, rng_seed=0)
        res = predict_next_day(history, cfg)
        assert np.allclose(res.values, 2222.0, rtol=0.05)

    def test_hour_models_are_independent(self, rng):
        history = rng.uniform(100, 1000, (4, 7, 24))
        cfg = TrainConfig(learning_rate=0.3, max_epochs=6, rng_seed=2)
        base = predict_next_day(history, cfg).values
        perm = rng.permutation(24)
        permuted = predict_next_day(history[:, :, perm], cfg).values
        assert np.array_equal(base[:, perm], permuted)

    def test_deterministic_for_fixed_seed(self, rng):
        history = rng.uniform(100, 1000, (3, 7, 24))
        cfg = TrainConfig(learning_rate=0.3, max_epochs=6, rng_seed=5)
        a = predict_next_day(history, cfg).values
        b = predict_next_day(history, cfg).values
        assert np.array_equal(a, b)

    def test_insufficient_history_rejected(self, rng):
        history = rng.uniform(100, 1000, (3, 5, 24))
        with pytest.raises(InsufficientHistoryError):
            predict_next_day(history, TrainConfig())

    def test_outputs_nonnegative(self, rng):
        history = rng.uniform(0, 10, (3, 7, 24))
        cfg = TrainConfig(learning_rate=0.3, max_epochs=4, rng_seed=1)
        assert np.all(predict_next_day(history, cfg).values >= 0)

    def test_per_station_mode(self, rng):
        history = rng.uniform(100, 1000, (2, 8, 24))
        cfg = TrainConfig(learning_rate=0.3, max_epochs=4, rng_seed=1)
        res = predict_next_day(history, cfg, pooled=False)
        assert res.values.shape == (2, 24)


class TestSerialization:
    def test_round_trip_with_normalizer(self, rng, tmp_path):
        net = small_net(rng, (5, 20, 10, 1))
        norm = Normalizer(np.array([1.0]), np.array([9.0]))
        path = tmp_path / "model.txt"
        net.save(path, norm)
        loaded, norm2 = Mlp.load(path)
        assert loaded.layer_sizes == net.layer_sizes
        assert all(np.array_equal(a, b) for a, b in zip(loaded.weights, net.weights))
        assert all(np.array_equal(a, b)
                   for a, b in zip(loaded.thresholds, net.thresholds))
        assert np.array_equal(norm2.min_vals, norm.min_vals)

    def test_round_trip_preserves_predictions(self, rng, tmp_path):
        net = small_net(rng, (3, 7, 2))
        path = tmp_path / "model.txt"
        net.save(path)
        loaded, norm = Mlp.load(path)
        assert norm is None
        x = rng.uniform(0, 1, 3)
        assert np.array_equal(loaded.forward(x), net.forward(x))
