"""Tensor engine tests: forward contracts, gradients against central finite
differences (64-bit), Adam behavior, and losses."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coatplan import tensor_core as tc
from coatplan.errors import ConfigError, ContractError, ShapeError

from reference import dense_reference, max_relative_error, numeric_gradient


def t64(data, grad=False):
    return tc.Tensor(np.asarray(data, dtype=np.float64), requires_grad=grad)


class TestConv2dSame:
    def test_identity_kernel_preserves_input(self):
        rng = np.random.default_rng(0)
        x = tc.Tensor(rng.normal(size=(5, 5, 1)).astype(np.float32))
        k = np.zeros((3, 3, 1, 1), dtype=np.float32)
        k[1, 1, 0, 0] = 1.0
        out = tc.conv2d_same(x, tc.Tensor(k), tc.Tensor(np.zeros(1, dtype=np.float32)))
        np.testing.assert_allclose(out.data, x.data)

    def test_all_ones_kernel_counts_padded_neighborhood(self):
        """On a 3x3 grid of ones, the padded window sums are 4 at corners,
        6 at edge centers and 9 in the middle."""
        x = tc.Tensor(np.ones((3, 3, 1), dtype=np.float32))
        k = tc.Tensor(np.ones((3, 3, 1, 1), dtype=np.float32))
        out = tc.conv2d_same(x, k, tc.Tensor(np.zeros(1, dtype=np.float32)))
        expected = np.array([[4, 6, 4], [6, 9, 6], [4, 6, 4]], dtype=np.float32)
        np.testing.assert_allclose(out.data[:, :, 0], expected)

    @pytest.mark.parametrize("h,w,cin,cout", [(1, 1, 1, 1), (2, 7, 3, 5), (6, 4, 2, 2)])
    def test_output_shape_matches_input_grid(self, h, w, cin, cout):
        rng = np.random.default_rng(h * 100 + w)
        x = tc.Tensor(rng.normal(size=(h, w, cin)).astype(np.float32))
        k = tc.Tensor(rng.normal(size=(3, 3, cin, cout)).astype(np.float32))
        b = tc.Tensor(np.zeros(cout, dtype=np.float32))
        assert tc.conv2d_same(x, k, b).shape == (h, w, cout)

    def test_channel_mismatch_raises(self):
        x = tc.Tensor(np.zeros((3, 3, 2), dtype=np.float32))
        k = tc.Tensor(np.zeros((3, 3, 3, 1), dtype=np.float32))
        with pytest.raises(ShapeError):
            tc.conv2d_same(x, k, tc.Tensor(np.zeros(1, dtype=np.float32)))


class TestDense:
    def test_identity_map(self):
        x = t64([1.0, -2.0, 3.0])
        w = t64(np.eye(3))
        b = t64(np.zeros(3))
        np.testing.assert_allclose(tc.dense(x, w, b, "identity").data, x.data)

    def test_uniform_softmax(self):
        x = t64([5.0, -1.0])
        w = t64(np.zeros((2, 2)))
        b = t64(np.zeros(2))
        np.testing.assert_allclose(tc.dense(x, w, b, "softmax").data, [0.5, 0.5])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=3)
        w = rng.normal(size=(3, 3))
        b = rng.normal(size=3)
        out = tc.dense(t64(x), t64(w), t64(b), "identity")
        np.testing.assert_allclose(out.data, dense_reference(x, w, b), atol=1e-6)

    def test_dimension_mismatch_raises(self):
        with pytest.raises(ShapeError):
            tc.dense(t64([1.0, 2.0]), t64(np.zeros((3, 2))), t64(np.zeros(2)))

    def test_unknown_activation_raises(self):
        with pytest.raises(ConfigError):
            tc.dense(t64([1.0]), t64(np.zeros((1, 1))), t64(np.zeros(1)), "tanh")


class TestBackward:
    def test_sum_of_parameters_has_unit_gradients(self):
        params = tc.ParamStore()
        params.add("p", t64(np.arange(6.0).reshape(2, 3), grad=True))
        loss = tc.tsum(params["p"])
        grads = tc.backward(loss, params)
        np.testing.assert_allclose(grads["p"], np.ones((2, 3)))

    def test_half_squared_norm_gradient_is_parameter(self):
        params = tc.ParamStore()
        p = t64([1.5, -2.0, 0.25], grad=True)
        params.add("p", p)
        loss = tc.scale(tc.tsum(tc.mul(p, p)), 0.5)
        grads = tc.backward(loss, params)
        np.testing.assert_allclose(grads["p"], p.data)

    def test_non_scalar_loss_rejected(self):
        params = tc.ParamStore()
        p = t64([1.0, 2.0], grad=True)
        params.add("p", p)
        with pytest.raises(ContractError):
            tc.backward(tc.mul(p, p), params)

    def test_disconnected_parameter_gets_zero_gradient(self):
        params = tc.ParamStore()
        used = t64([2.0], grad=True)
        unused = t64([7.0], grad=True)
        params.add("used", used)
        params.add("unused", unused)
        grads = tc.backward(tc.tsum(used), params)
        np.testing.assert_allclose(grads["unused"], [0.0])

    def test_non_trainable_parameters_absent(self):
        params = tc.ParamStore()
        p = t64([2.0], grad=True)
        frozen = t64([3.0])
        params.add("p", p)
        params.add("frozen", frozen, trainable=False)
        grads = tc.backward(tc.tsum(tc.mul(p, frozen)), params)
        assert set(grads) == {"p"}


class TestGradientsAgainstFiniteDifferences:
    """Layer-level 64-bit checks; the full-network sweep lives in the
    acceptance suite."""

    def _check(self, build, n_arrays, seed, rtol=1e-4):
        rng = np.random.default_rng(seed)
        arrays = build(rng)

        def scalar(arrs):
            tensors = [tc.Tensor(a.copy(), requires_grad=True) for a in arrs]
            return self._loss(tensors).item()

        tensors = [tc.Tensor(a.copy(), requires_grad=True) for a in arrays]
        params = tc.ParamStore()
        for i, t in enumerate(tensors):
            params.add(f"a{i}", t)
        grads = tc.backward(self._loss(tensors), params)
        for i in range(n_arrays):
            numeric = numeric_gradient(scalar, [a.copy() for a in arrays], i)
            assert max_relative_error(grads[f"a{i}"], numeric) < rtol

    def test_conv_gradients(self):
        self._loss = lambda ts: tc.tsum(tc.conv2d_same(ts[0], ts[1], ts[2]))
        self._check(lambda rng: [rng.normal(size=(3, 4, 2)),
                                 rng.normal(size=(3, 3, 2, 3)),
                                 rng.normal(size=3)], 3, seed=1)

    def test_dense_softmax_gradients(self):
        self._loss = lambda ts: tc.tsum(tc.mul(tc.dense(ts[0], ts[1], ts[2], "softmax"),
                                               tc.Tensor(np.array([0.3, -1.2, 0.7]))))
        self._check(lambda rng: [rng.normal(size=4),
                                 rng.normal(size=(4, 3)),
                                 rng.normal(size=3)], 3, seed=2)

    def test_elementwise_chain_gradients(self):
        self._loss = lambda ts: tc.tmean(tc.absolute(tc.sub(tc.mul(ts[0], ts[1]), ts[2])))
        self._check(lambda rng: [rng.normal(size=(2, 3)) + 2.0,
                                 rng.normal(size=(2, 3)) + 2.0,
                                 rng.normal(size=(2, 3)) - 3.0], 3, seed=3)


class TestAdam:
    def test_first_step_magnitude_is_learning_rate(self):
        """With bias correction at t=1, a constant gradient g moves every
        entry by lr * |g| / (|g| + eps) which is essentially lr."""
        params = tc.ParamStore()
        params.add("p", t64(np.zeros(4), grad=True))
        state = tc.AdamState(params)
        g = np.full(4, 3.0)
        tc.adam_step(params, {"p": g}, state, lr=0.01)
        np.testing.assert_allclose(params["p"].data, -0.01 * g / (np.abs(g) + state.eps),
                                   rtol=1e-6)
        assert state.t == 1

    def test_zero_gradient_keeps_parameters(self):
        params = tc.ParamStore()
        params.add("p", t64([1.0, -2.0], grad=True))
        state = tc.AdamState(params)
        tc.adam_step(params, {"p": np.zeros(2)}, state, lr=0.5)
        np.testing.assert_allclose(params["p"].data, [1.0, -2.0])
        assert state.t == 1

    def test_missing_gradient_raises(self):
        params = tc.ParamStore()
        params.add("p", t64([1.0], grad=True))
        with pytest.raises(ContractError):
            tc.adam_step(params, {}, tc.AdamState(params), lr=0.1)

    def test_quadratic_convergence_matches_scalar_oracle(self):
        """100 steps on (p - 3)^2 from p=0 at lr 0.1 land within 0.5 of the
        optimum, and the whole trajectory matches an independently coded
        scalar Adam."""
        params = tc.ParamStore()
        params.add("p", t64([0.0], grad=True))
        state = tc.AdamState(params)
        # independent scalar Adam
        p_ref, m_ref, v_ref = 0.0, 0.0, 0.0
        for t in range(1, 101):
            p = params["p"]
            residual = tc.sub(p, tc.Tensor(np.array([3.0])))
            loss = tc.tsum(tc.mul(residual, residual))
            grads = tc.backward(loss, params)
            tc.adam_step(params, grads, state, lr=0.1)

            g = 2.0 * (p_ref - 3.0)
            m_ref = 0.9 * m_ref + 0.1 * g
            v_ref = 0.999 * v_ref + 0.001 * g * g
            mhat = m_ref / (1 - 0.9 ** t)
            vhat = v_ref / (1 - 0.999 ** t)
            p_ref -= 0.1 * mhat / (np.sqrt(vhat) + 1e-8)
            assert abs(params["p"].data[0] - p_ref) < 1e-9
        assert abs(params["p"].data[0] - 3.0) < 0.5


class TestLossEval:
    def test_mae_of_identical_tensors_is_zero(self):
        pred = t64([1.0, 2.0, 3.0])
        assert tc.loss_eval("mae", pred, pred.data).item() == 0.0

    def test_mae_hand_arithmetic(self):
        loss = tc.loss_eval("mae", t64([1.0, 2.0, 3.0]), np.array([2.0, 2.0, 5.0]))
        assert loss.item() == pytest.approx(1.0)

    def test_cross_entropy_of_perfect_prediction_is_tiny(self):
        pred = t64([0.0, 1.0, 0.0])
        target = np.array([0.0, 1.0, 0.0])
        assert tc.loss_eval("categorical_cross_entropy", pred, target).item() <= 1e-6

    def test_unknown_kind_raises(self):
        with pytest.raises(ConfigError):
            tc.loss_eval("mse", t64([1.0]), np.array([1.0]))


class TestDeterminism:
    def test_identical_graphs_produce_bit_identical_results(self):
        def run():
            rng = np.random.default_rng(11)
            params = tc.ParamStore()
            params.add("w", tc.Tensor(rng.normal(size=(4, 3)).astype(np.float32), requires_grad=True))
            params.add("b", tc.Tensor(rng.normal(size=3).astype(np.float32), requires_grad=True))
            x = tc.Tensor(rng.normal(size=4).astype(np.float32))
            out = tc.dense(x, params["w"], params["b"], "softmax")
            loss = tc.loss_eval("categorical_cross_entropy", out, np.array([1, 0, 0], dtype=np.float32))
            grads = tc.backward(loss, params)
            return loss.item(), grads

        loss1, grads1 = run()
        loss2, grads2 = run()
        assert loss1 == loss2
        for name in grads1:
            assert np.array_equal(grads1[name], grads2[name])


class TestSoftmaxProperties:
    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=1, max_size=12))
    @settings(max_examples=100, deadline=None)
    def test_softmax_is_a_distribution(self, values):
        out = tc.softmax(tc.Tensor(np.asarray(values, dtype=np.float64)))
        assert abs(out.data.sum() - 1.0) < 1e-6
        assert np.all(out.data > 0)

    def test_softmax_survives_large_logits(self):
        out = tc.softmax(tc.Tensor(np.array([1e4, 0.0, -1e4])))
        assert np.isfinite(out.data).all()
        assert out.data.sum() == pytest.approx(1.0)
