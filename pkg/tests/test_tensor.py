import numpy as np
import pytest

from scriptsum.errors import ConfigError, NumericsError, ShapeError, StateError
from scriptsum.tensor import (
    Tensor,
    add,
    backward,
    concat,
    cross_entropy,
    dropout,
    embed,
    gather,
    grad_check,
    layernorm,
    matmul,
    mean_all,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax_masked,
    sum_all,
    tensor,
    transpose,
)

NEG_INF = -1e9


def rand(rng, *shape):
    return tensor(rng.standard_normal(shape), requires_grad=True)


class TestForwardValues:
    def test_sigmoid_at_zero(self):
        out = sigmoid(tensor(np.zeros((3,))))
        assert np.allclose(out.data, 0.5)

    def test_sigmoid_saturation_is_finite(self):
        out = sigmoid(tensor(np.array([-1e4, 1e4])))
        assert np.all(np.isfinite(out.data))
        assert np.allclose(out.data, [0.0, 1.0])

    def test_softmax_uniform(self):
        out = softmax_masked(tensor(np.zeros((1, 4))))
        assert np.allclose(out.data, 0.25)

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        out = softmax_masked(tensor(rng.standard_normal((5, 7))))
        assert np.allclose(out.data.sum(axis=1), 1.0)

    def test_softmax_additive_mask_drops_keys(self):
        logits = tensor(np.zeros((2, 3)))
        mask = np.array([[0.0, NEG_INF, NEG_INF], [0.0, 0.0, NEG_INF]])
        out = softmax_masked(logits, additive_mask=mask)
        assert np.allclose(out.data[0], [1.0, 0.0, 0.0])
        assert np.allclose(out.data[1], [0.5, 0.5, 0.0])

    def test_softmax_fully_masked_row(self):
        logits = tensor(np.zeros((2, 3)))
        mask = np.array([[0.0, 0.0, 0.0], [NEG_INF, NEG_INF, NEG_INF]])
        with pytest.raises(NumericsError):
            softmax_masked(logits, additive_mask=mask)

    def test_softmax_scale_matrix_gates_logits(self):
        logits = tensor(np.array([[1.0, 2.0, 3.0]]))
        gate = np.array([[1.0, 0.0, 1.0]])
        out = softmax_masked(logits, scale_matrix=gate)
        manual = np.exp([1.0, 0.0, 3.0])
        assert np.allclose(out.data[0], manual / manual.sum())

    def test_matmul_identity(self):
        rng = np.random.default_rng(1)
        x = tensor(rng.standard_normal((4, 4)))
        out = matmul(x, tensor(np.eye(4)))
        assert np.allclose(out.data, x.data)

    def test_matmul_shape_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(tensor(np.zeros((2, 3))), tensor(np.zeros((2, 3))))

    def test_cross_entropy_uniform_two_way(self):
        loss = cross_entropy(tensor(np.zeros((1, 2))), np.array([0]))
        assert np.isclose(float(loss.data), np.log(2.0))

    def test_cross_entropy_sum_vs_mean(self):
        rng = np.random.default_rng(2)
        logits = rng.standard_normal((4, 5))
        targets = np.array([0, 1, 2, 3])
        mean = cross_entropy(tensor(logits), targets, reduction="mean")
        total = cross_entropy(tensor(logits), targets, reduction="sum")
        assert np.isclose(float(total.data), 4.0 * float(mean.data))

    def test_cross_entropy_validation(self):
        with pytest.raises(ShapeError):
            cross_entropy(tensor(np.zeros((2, 3))), np.array([0, 5]))
        with pytest.raises(ShapeError):
            cross_entropy(tensor(np.zeros((2, 3))), np.array([0.5, 1.5]))
        with pytest.raises(ConfigError):
            cross_entropy(tensor(np.zeros((2, 3))), np.array([0, 1]), reduction="max")

    def test_layernorm_standardizes(self):
        rng = np.random.default_rng(3)
        x = tensor(rng.standard_normal((6, 8)) * 3.0 + 5.0)
        out = layernorm(x, tensor(np.ones(8)), tensor(np.zeros(8)))
        assert np.allclose(out.data.mean(axis=-1), 0.0, atol=1e-9)
        assert np.allclose(out.data.var(axis=-1), 1.0, atol=1e-3)

    def test_embed_lookup(self):
        table = tensor(np.arange(12.0).reshape(4, 3))
        out = embed(table, np.array([2, 0]))
        assert np.allclose(out.data, [[6.0, 7.0, 8.0], [0.0, 1.0, 2.0]])

    def test_embed_rejects_bad_ids(self):
        table = tensor(np.zeros((4, 3)))
        with pytest.raises(ShapeError):
            embed(table, np.array([4]))
        with pytest.raises(ShapeError):
            embed(table, np.array([-1]))
        with pytest.raises(ShapeError):
            embed(table, np.array([0.5]))

    def test_gather_pairwise(self):
        table = tensor(np.arange(6.0).reshape(3, 2))
        idx = np.array([[0, 1], [2, 0]])
        out = gather(table, idx)
        assert out.shape == (2, 2, 2)
        assert np.allclose(out.data[1, 0], [4.0, 5.0])


class TestHandGradients:
    def test_sum_of_matmul_outer_product(self):
        # f(W) = sum(W @ x) has dW = 1 x^T replicated down the rows
        w = tensor(np.zeros((2, 2)), requires_grad=True)
        x = tensor(np.array([[3.0], [5.0]]))
        loss = sum_all(matmul(w, x))
        backward(loss)
        assert np.allclose(w.grad, [[3.0, 5.0], [3.0, 5.0]])

    def test_sigmoid_grad_at_zero(self):
        x = tensor(np.zeros((1,)), requires_grad=True)
        backward(sum_all(sigmoid(x)))
        assert np.allclose(x.grad, 0.25)

    def test_relu_gate(self):
        x = tensor(np.array([-1.0, 2.0]), requires_grad=True)
        backward(sum_all(relu(x)))
        assert np.allclose(x.grad, [0.0, 1.0])

    def test_add_broadcast_bias(self):
        x = tensor(np.zeros((3, 2)), requires_grad=True)
        b = tensor(np.zeros((2,)), requires_grad=True)
        backward(sum_all(add(x, b)))
        assert np.allclose(x.grad, 1.0)
        assert np.allclose(b.grad, [3.0, 3.0])

    def test_scale_constant(self):
        x = tensor(np.ones((2, 2)), requires_grad=True)
        backward(sum_all(scale(x, -2.5)))
        assert np.allclose(x.grad, -2.5)

    def test_embed_accumulates_repeated_ids(self):
        table = tensor(np.zeros((3, 2)), requires_grad=True)
        backward(sum_all(embed(table, np.array([1, 1, 2]))))
        assert np.allclose(table.grad, [[0.0, 0.0], [2.0, 2.0], [1.0, 1.0]])

    def test_grad_accumulates_across_uses(self):
        x = tensor(np.array([2.0]), requires_grad=True)
        backward(sum_all(mul(x, x)))
        assert np.allclose(x.grad, 4.0)


class TestFiniteDifferences:
    def test_primitive_suite(self):
        rng = np.random.default_rng(7)
        cases = [
            lambda a, b: sum_all(matmul(a, b)),
            lambda a, b: sum_all(add(a, b)),
            lambda a, b: sum_all(mul(a, b)),
        ]
        for f in cases:
            a = rand(rng, 3, 3)
            b = rand(rng, 3, 3)
            report = grad_check(f, [a, b])
            assert report.passed, report

    def test_unary_suite(self):
        rng = np.random.default_rng(8)
        for f in (
            lambda a: sum_all(sigmoid(a)),
            lambda a: sum_all(relu(a)),
            lambda a: mean_all(a),
            lambda a: sum_all(softmax_masked(a)),
            lambda a: sum_all(reshape(a, (9,))),
            lambda a: sum_all(transpose(a, (1, 0))),
        ):
            report = grad_check(f, rand(rng, 3, 3))
            assert report.passed, report

    def test_softmax_weighted_readout(self):
        # uniform upstream grad makes softmax grads vanish; weight the output
        rng = np.random.default_rng(12)
        w = rng.standard_normal((3, 4))

        def f(a):
            return sum_all(mul(softmax_masked(a), tensor(w)))

        assert grad_check(f, rand(rng, 3, 4)).passed

    def test_layernorm_grads(self):
        rng = np.random.default_rng(9)
        x = rand(rng, 4, 6)
        gain = tensor(rng.standard_normal(6), requires_grad=True)
        bias = tensor(rng.standard_normal(6), requires_grad=True)
        w = rng.standard_normal((4, 6))

        def f(x_, g_, b_):
            return sum_all(mul(layernorm(x_, g_, b_), tensor(w)))

        assert grad_check(f, [x, gain, bias]).passed

    def test_cross_entropy_grads(self):
        rng = np.random.default_rng(10)
        targets = np.array([1, 0, 2])

        def f(a):
            return cross_entropy(a, targets)

        assert grad_check(f, rand(rng, 3, 4)).passed

    def test_concat_and_embed_grads(self):
        rng = np.random.default_rng(11)
        ids = np.array([0, 2, 1])
        w = rng.standard_normal((3, 3 + 2))

        def f(a, b):
            joined = concat([embed(a, ids), b], axis=1)
            return sum_all(mul(joined, tensor(w)))

        table = rand(rng, 4, 3)
        other = rand(rng, 3, 2)
        assert grad_check(f, [table, other]).passed

    def test_masked_softmax_grads(self):
        rng = np.random.default_rng(13)
        mask = np.zeros((3, 4))
        mask[0, 3] = NEG_INF
        gate = np.abs(rng.standard_normal((3, 4))) + 0.5
        w = rng.standard_normal((3, 4))

        def f(a):
            out = softmax_masked(a, additive_mask=mask, scale_matrix=gate)
            return sum_all(mul(out, tensor(w)))

        assert grad_check(f, rand(rng, 3, 4)).passed


class TestGraphMechanics:
    def test_double_backward_rejected(self):
        x = tensor(np.ones((2,)), requires_grad=True)
        loss = sum_all(x)
        backward(loss)
        with pytest.raises(StateError):
            backward(loss)

    def test_backward_requires_scalar(self):
        x = tensor(np.ones((2,)), requires_grad=True)
        with pytest.raises(ShapeError):
            backward(add(x, x))

    def test_no_grad_suppresses_graph(self):
        x = tensor(np.ones((2,)), requires_grad=True)
        with no_grad():
            out = sum_all(sigmoid(x))
        assert out._parents == ()
        backward(out)
        assert x.grad is None

    def test_no_grad_restores_state(self):
        x = tensor(np.ones((2,)), requires_grad=True)
        with no_grad():
            pass
        backward(sum_all(x))
        assert np.allclose(x.grad, 1.0)

    def test_shared_subexpression_counted_once_per_path(self):
        x = tensor(np.array([3.0]), requires_grad=True)
        y = sigmoid(x)
        loss = sum_all(add(y, y))
        backward(loss)
        s = 1.0 / (1.0 + np.exp(-3.0))
        assert np.allclose(x.grad, 2.0 * s * (1.0 - s))


class TestDropout:
    def test_eval_mode_is_identity(self):
        x = tensor(np.ones((4, 4)))
        out = dropout(x, 0.5, None, training=False)
        assert out is x

    def test_zero_probability_is_identity(self):
        x = tensor(np.ones((4, 4)))
        assert dropout(x, 0.0, np.random.default_rng(0), training=True) is x

    def test_invalid_probability(self):
        x = tensor(np.ones((2,)))
        with pytest.raises(ConfigError):
            dropout(x, 1.0, np.random.default_rng(0), training=True)
        with pytest.raises(ConfigError):
            dropout(x, -0.1, np.random.default_rng(0), training=True)

    def test_training_requires_rng(self):
        x = tensor(np.ones((2,)))
        with pytest.raises(ConfigError):
            dropout(x, 0.5, None, training=True)

    def test_inverted_scaling_preserves_expectation(self):
        rng = np.random.default_rng(42)
        x = tensor(np.ones((200, 200)))
        out = dropout(x, 0.3, rng, training=True)
        kept = out.data[out.data > 0]
        assert np.allclose(kept, 1.0 / 0.7)
        assert abs(out.data.mean() - 1.0) < 0.02

    def test_mask_reused_in_backward(self):
        rng = np.random.default_rng(1)
        x = tensor(np.ones((8, 8)), requires_grad=True)
        out = dropout(x, 0.5, rng, training=True)
        backward(sum_all(out))
        assert np.array_equal((x.grad > 0), (out.data > 0))


class TestGradCheckHarness:
    def test_detects_inconsistent_gradient(self):
        # the graph pass sees sum(a*a) but difference probes see sum(2*a*a),
        # so the autodiff gradient is off by 2x and the check must fail
        calls = {"n": 0}

        def f(a):
            calls["n"] += 1
            factor = 1.0 if calls["n"] == 1 else 2.0
            return sum_all(mul(scale(a, factor), a))

        x = tensor(np.array([[1.0, 2.0]]), requires_grad=True)
        report = grad_check(f, x)
        assert not report.passed
        assert report.max_rel_error > 0.4

    def test_epsilon_and_tolerance_are_configurable(self):
        x = tensor(np.array([0.3]), requires_grad=True)
        report = grad_check(lambda a: sum_all(sigmoid(a)), x, tolerance=1e-6, epsilon=1e-6)
        assert report.tolerance == 1e-6
