import numpy as np
import pytest

from hapsv2x.approximator import (Adam, GradientSet, Mlp, Sgd, TrainingDivergenceError, dumps_mlp,
                                  load_mlp, loads_mlp, make_optimizer, save_mlp, soft_update)


def forward_oracle(net, x):
    a = np.array(x, dtype=float)
    n = len(net.weights)
    for i in range(n):
        w, b = net.weights[i], net.biases[i]
        z = np.zeros((a.shape[0], w.shape[1]))
        for r in range(a.shape[0]):
            for c in range(w.shape[1]):
                z[r, c] = sum(a[r, q] * w[q, c] for q in range(w.shape[0])) + b[c]
        if i < n - 1:
            a = np.where(z > 0, z, 0.0)
        elif net.output_activation == "tanh":
            a = np.tanh(z)
        else:
            a = z
    return a


def finite_difference_check(net, x, upstream, n_coords, rng, eps=1e-5):
    grads, _ = net.backward(x, upstream)
    idx = rng.choice(net.num_parameters(), size=n_coords, replace=False)
    worst = 0.0
    for i in idx:
        orig = net.flat[i]
        net.flat[i] = orig + eps
        fp = float(np.sum(net.forward(x) * upstream))
        net.flat[i] = orig - eps
        fm = float(np.sum(net.forward(x) * upstream))
        net.flat[i] = orig
        num = (fp - fm) / (2 * eps)
        ana = grads.flat[i]
        denom = max(abs(num), abs(ana), 1e-8)
        worst = max(worst, abs(num - ana) / denom)
    return worst


class TestForward:
    def test_identity_layer(self):
        net = Mlp.from_arrays([np.eye(3)], [np.zeros(3)])
        x = np.array([0.2, -1.0, 3.0])
        np.testing.assert_array_equal(net.forward(x), x)

    def test_zero_weights_bias_passthrough(self):
        b = np.array([0.5, -2.0])
        net = Mlp.from_arrays([np.zeros((4, 2))], [b], output_activation="tanh")
        np.testing.assert_allclose(net.forward(np.ones(4)), np.tanh(b))

    @pytest.mark.parametrize("out_act", ["linear", "tanh"])
    def test_matches_oracle(self, out_act):
        net = Mlp([5, 7, 6, 3], out_act, rng=0)
        x = np.random.default_rng(1).normal(size=(4, 5))
        np.testing.assert_allclose(net.forward(x), forward_oracle(net, x), rtol=1e-12, atol=1e-15)

    def test_forward_is_pure(self):
        net = Mlp([3, 8, 2], rng=2)
        before = net.flat.copy()
        net.forward(np.ones((5, 3)))
        net.backward(np.ones((5, 3)), np.ones((5, 2)))
        np.testing.assert_array_equal(net.flat, before)

    def test_parameter_count(self):
        net = Mlp([4, 10, 3], rng=0)
        assert net.num_parameters() == 4 * 10 + 10 + 10 * 3 + 3

    def test_bad_input_width(self):
        with pytest.raises(ValueError):
            Mlp([3, 2], rng=0).forward(np.ones(4))

    def test_init_bounds_and_final_scale(self):
        net = Mlp([16, 32, 4], "tanh", rng=0, final_layer_scale=1e-3)
        assert np.all(np.abs(net.weights[0]) <= 1 / 4)
        assert np.all(np.abs(net.weights[1]) <= 1e-3 / np.sqrt(32))
        assert np.all(np.abs(net.forward(np.ones(16))) < 0.05)


class TestBackward:
    @pytest.mark.parametrize("dims,act", [([7, 32, 16, 6], "tanh"), ([13, 32, 16, 8, 1], "linear"),
                                          ([4, 5, 3], "linear")])
    def test_finite_differences(self, dims, act):
        rng = np.random.default_rng(5)
        net = Mlp(dims, act, rng=rng)
        x = rng.normal(size=(6, dims[0]))
        up = rng.normal(size=(6, dims[-1]))
        n = min(100, net.num_parameters())
        assert finite_difference_check(net, x, up, n, rng) < 1e-4

    def test_input_gradient_finite_differences(self):
        rng = np.random.default_rng(6)
        net = Mlp([5, 9, 2], "tanh", rng=rng)
        x = rng.normal(size=5)
        up = rng.normal(size=2)
        _, gx = net.backward(x, up)
        for i in range(5):
            e = np.zeros(5)
            e[i] = 1e-6
            num = (np.sum(net.forward(x + e) * up) - np.sum(net.forward(x - e) * up)) / 2e-6
            assert gx[i] == pytest.approx(num, rel=1e-5, abs=1e-9)

    def test_zero_upstream(self):
        net = Mlp([3, 4, 2], rng=0)
        g, gx = net.backward(np.ones((2, 3)), np.zeros((2, 2)))
        assert not g.flat.any() and not gx.any()

    def test_linear_layer_input_gradient(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        net = Mlp.from_arrays([w], [np.zeros(2)])
        up = np.array([0.5, -1.0])
        _, gx = net.backward(np.ones(3), up)
        np.testing.assert_allclose(gx, w @ up)

    def test_batch_sums(self):
        net = Mlp([3, 4, 2], rng=0)
        x = np.random.default_rng(0).normal(size=(3, 3))
        up = np.ones((3, 2))
        total, _ = net.backward(x, up)
        parts = sum(net.backward(x[i], up[i])[0].flat for i in range(3))
        np.testing.assert_allclose(total.flat, parts, rtol=1e-12)

    def test_params_false_skips(self):
        net = Mlp([3, 4, 2], rng=0)
        g, gx = net.backward(np.ones(3), np.ones(2), params=False)
        assert g is None
        np.testing.assert_allclose(gx, net.backward(np.ones(3), np.ones(2))[1])

    def test_upstream_shape_checked(self):
        with pytest.raises(ValueError):
            Mlp([3, 2], rng=0).backward(np.ones(3), np.ones(3))


class TestOptimizers:
    def test_zero_gradient_adam(self):
        net = Mlp([3, 4, 2], rng=0)
        before = net.flat.copy()
        Adam(net).step(net, GradientSet.zeros_like(net), 1e-3)
        np.testing.assert_array_equal(net.flat, before)

    def test_adam_first_step_is_sign(self):
        net = Mlp([3, 4, 2], rng=0)
        before = net.flat.copy()
        g = GradientSet(np.random.default_rng(1).normal(size=net.num_parameters()), net.layer_dims)
        Adam(net).step(net, g, 1e-3)
        # m_hat = g, v_hat = g^2 after one step
        np.testing.assert_allclose(before - net.flat, 1e-3 * g.flat / (np.abs(g.flat) + 1e-8),
                                   rtol=1e-9)
        assert np.all(np.abs(before - net.flat) <= 1e-3 + 1e-15)

    def test_adam_determinism(self):
        def run():
            net = Mlp([3, 8, 2], rng=4)
            opt = make_optimizer("adam", net)
            x = np.random.default_rng(7).normal(size=(10, 3))
            for _ in range(20):
                g, _ = net.backward(x, net.forward(x))
                opt.step(net, g, 1e-2)
            return net.flat
        np.testing.assert_array_equal(run(), run())

    def test_adam_non_finite(self):
        net = Mlp([2, 2], rng=0)
        g = GradientSet.zeros_like(net)
        g.flat[0] = np.nan
        with pytest.raises(TrainingDivergenceError):
            Adam(net).step(net, g, 1e-3)

    def test_sgd_step(self):
        net = Mlp([2, 2], rng=0)
        before = net.flat.copy()
        g = GradientSet(np.ones(net.num_parameters()), net.layer_dims)
        Sgd(net).step(net, g, 0.1)
        np.testing.assert_allclose(net.flat, before - 0.1)

    def test_minimizes_regression(self):
        rng = np.random.default_rng(0)
        net = Mlp([2, 16, 1], rng=rng)
        x = rng.uniform(-1, 1, size=(64, 2))
        y = (x[:, :1] - 0.5 * x[:, 1:])
        opt = Adam(net)
        loss0 = np.mean((net.forward(x) - y) ** 2)
        for _ in range(300):
            g, _ = net.backward(x, 2 * (net.forward(x) - y) / len(x))
            opt.step(net, g, 1e-2)
        assert np.mean((net.forward(x) - y) ** 2) < 0.05 * loss0

    def test_unknown_optimizer(self):
        with pytest.raises(ValueError):
            make_optimizer("rmsprop", Mlp([2, 2], rng=0))


class TestSoftUpdate:
    def test_tau_one(self):
        a, b = Mlp([3, 4, 2], rng=0), Mlp([3, 4, 2], rng=1)
        soft_update(a, b, 1.0)
        np.testing.assert_array_equal(a.flat, b.flat)

    def test_tau_zero(self):
        a, b = Mlp([3, 4, 2], rng=0), Mlp([3, 4, 2], rng=1)
        before = a.flat.copy()
        soft_update(a, b, 0.0)
        np.testing.assert_array_equal(a.flat, before)

    def test_scalar_blend(self):
        t = Mlp.from_arrays([np.zeros((1, 1))], [np.zeros(1)])
        o = Mlp.from_arrays([np.ones((1, 1))], [np.ones(1)])
        soft_update(t, o, 0.005)
        assert t.weights[0][0, 0] == pytest.approx(0.005)

    def test_contraction(self):
        a, b = Mlp([3, 4, 2], rng=0), Mlp([3, 4, 2], rng=1)
        gap = a.flat - b.flat
        soft_update(a, b, 0.2)
        np.testing.assert_allclose(np.abs(a.flat - b.flat), 0.8 * np.abs(gap), rtol=1e-12)

    def test_architecture_mismatch(self):
        with pytest.raises(ValueError):
            soft_update(Mlp([3, 4, 2], rng=0), Mlp([3, 5, 2], rng=0), 0.1)


class TestCheckpoint:
    def test_roundtrip_bitwise(self, tmp_path):
        net = Mlp([6, 10, 5, 4], "tanh", rng=3, final_layer_scale=1e-3)
        path = tmp_path / "actor.mlp"
        save_mlp(net, path)
        back = load_mlp(path, "tanh")
        assert back.same_architecture(net)
        np.testing.assert_array_equal(back.flat, net.flat)
        assert dumps_mlp(back) == path.read_text()

    def test_header(self):
        text = dumps_mlp(Mlp([2, 3, 1], rng=0))
        lines = text.splitlines()
        assert lines[0] == "MLPv1 2"
        assert lines[1] == "dims 2 3"
        assert lines[1 + 6 + 3 + 1] == "dims 3 1"

    def test_rejects_bad_header(self):
        with pytest.raises(ValueError):
            loads_mlp("MLPv2 1\ndims 1 1\n0\n0\n")

    def test_rejects_inconsistent_dims(self):
        text = "MLPv1 2\ndims 1 1\n1\n0\ndims 2 1\n1\n1\n0\n"
        with pytest.raises(ValueError):
            loads_mlp(text)
