import math

import numpy as np
import pytest

from rsmlp import tensor as T
from rsmlp.errors import DegenerateBatch, NoTrace, ShapeError


def gelu_reference(x: float) -> float:
    # evaluate the tanh-approximation formula directly in double precision
    return 0.5 * x * (1.0 + math.tanh(math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)))


class TestLinear:
    def test_identity(self):
        x = T.Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = T.linear(x, T.Tensor(np.eye(2)), T.Tensor(np.zeros(2)))
        assert np.allclose(out.data, x.data)

    def test_hand_multiply(self):
        out = T.linear(T.Tensor([[2.0, 0.0]]), T.Tensor([[3.0], [5.0]]))
        assert np.allclose(out.data, [[6.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            T.linear(T.Tensor([[1.0, 2.0, 3.0]]), T.Tensor([[1.0], [2.0]]))

    def test_bias_mismatch(self):
        with pytest.raises(ShapeError):
            T.linear(T.Tensor([[1.0, 2.0]]), T.Tensor([[1.0], [2.0]]), T.Tensor([1.0, 2.0]))


class TestGelu:
    def test_zero(self):
        assert T.gelu(T.Tensor(0.0)).item() == 0.0

    def test_asymptote(self):
        assert abs(T.gelu(T.Tensor(10.0)).item() - 10.0) < 1e-6

    def test_at_one(self):
        expected = gelu_reference(1.0)
        assert abs(expected - 0.8412) < 5e-4
        T.set_default_dtype(np.float64)
        assert abs(T.gelu(T.Tensor(1.0)).item() - expected) < 1e-12

    def test_gradient_at_zero(self):
        T.set_default_dtype(np.float64)
        x = T.Tensor(np.zeros(1), requires_grad=True)
        T.tsum(T.gelu(x)).backward()
        assert abs(x.grad[0] - 0.5) < 1e-12


class TestBatchNorm:
    def setup_method(self):
        self.gamma = T.Tensor(np.ones(3))
        self.beta = T.Tensor(np.zeros(3))

    def test_train_normalizes(self):
        rng = np.random.default_rng(0)
        x = T.Tensor(rng.normal(5.0, 3.0, size=(64, 3)))
        out = T.batchnorm(x, self.gamma, self.beta, np.zeros(3), np.ones(3), "train")
        assert np.abs(out.data.mean(axis=0)).max() < 1e-5
        assert np.abs(out.data.var(axis=0) - 1.0).max() < 1e-4

    def test_eval_identity_with_unit_stats(self):
        x = T.Tensor(np.array([[1.0, -2.0, 3.0]]))
        out = T.batchnorm(x, self.gamma, self.beta, np.zeros(3), np.ones(3), "eval")
        assert np.allclose(out.data, x.data, atol=1e-5)

    def test_constant_channel_zeroed(self):
        x = T.Tensor(np.full((8, 3), 7.0))
        out = T.batchnorm(x, self.gamma, self.beta, np.zeros(3), np.ones(3), "train")
        assert np.abs(out.data).max() < 1e-6

    def test_single_cell_train_raises(self):
        with pytest.raises(DegenerateBatch):
            T.batchnorm(T.Tensor(np.ones((1, 3))), self.gamma, self.beta, np.zeros(3), np.ones(3), "train")

    def test_running_stats_updated(self):
        mean = np.zeros(3)
        var = np.ones(3)
        x = T.Tensor(np.full((4, 3), 10.0))
        T.batchnorm(x, self.gamma, self.beta, mean, var, "train")
        assert np.allclose(mean, 1.0)  # 0.9 * 0 + 0.1 * 10


class TestWeightedCrossEntropy:
    def test_confident_correct(self):
        logits = T.Tensor(np.eye(3)[[0, 1, 2]] * 10.0)
        loss = T.weighted_cross_entropy(logits, [0, 1, 2], np.ones(3), np.ones(3, dtype=bool))
        assert loss.item() < 1e-3

    def test_uniform_logits(self):
        loss = T.weighted_cross_entropy(
            T.Tensor(np.zeros((4, 3))), [0, 1, 2, 0], np.ones(3), np.ones(4, dtype=bool)
        )
        assert abs(loss.item() - math.log(3.0)) < 1e-6

    def test_linear_in_weights(self):
        logits = T.Tensor(np.random.default_rng(1).normal(size=(5, 3)))
        labels = [0, 2, 1, 1, 0]
        mask = np.ones(5, dtype=bool)
        single = T.weighted_cross_entropy(logits, labels, np.ones(3), mask).item()
        double = T.weighted_cross_entropy(logits, labels, 2 * np.ones(3), mask).item()
        assert abs(double - 2 * single) < 1e-5

    def test_all_masked_raises(self):
        with pytest.raises(DegenerateBatch):
            T.weighted_cross_entropy(T.Tensor(np.zeros((2, 3))), [0, 1], np.ones(3), np.zeros(2, dtype=bool))

    def test_softmax_rows_sum_to_one(self):
        rows = T.softmax_rows(np.random.default_rng(2).normal(size=(10, 3)))
        assert np.abs(rows.sum(axis=1) - 1.0).max() < 1e-6

    def test_nonnegative(self):
        logits = T.Tensor(np.random.default_rng(3).normal(size=(6, 3)))
        loss = T.weighted_cross_entropy(logits, [0, 1, 2, 0, 1, 2], np.ones(3), np.ones(6, dtype=bool))
        assert loss.item() >= 0.0


class TestBackward:
    def test_linear_gradient(self):
        w = T.Tensor(np.ones((2, 3)), requires_grad=True)
        x = np.array([[4.0, 7.0]])
        T.tsum(T.matmul(T.Tensor(x), w)).backward()
        assert np.allclose(w.grad, np.repeat(x.T, 3, axis=1))

    def test_gradients_finite(self):
        w = T.Tensor(np.random.default_rng(0).normal(size=(4, 4)), requires_grad=True)
        out = T.tsum(T.gelu(T.matmul(w, w)))
        out.backward()
        assert np.isfinite(w.grad).all()

    def test_no_trace_raises(self):
        with pytest.raises(NoTrace):
            T.Tensor(1.0).backward()

    def test_second_backward_raises(self):
        w = T.Tensor(np.ones(2), requires_grad=True)
        loss = T.tsum(T.mul(w, w))
        loss.backward()
        with pytest.raises(NoTrace):
            loss.backward()

    def test_no_grad_skips_trace(self):
        w = T.Tensor(np.ones(2), requires_grad=True)
        with T.no_grad():
            loss = T.tsum(T.mul(w, w))
        with pytest.raises(NoTrace):
            loss.backward()


class TestAdam:
    def test_zero_gradient_no_move(self):
        store = T.ParamStore()
        w = store.add("w", np.array([1.0, 2.0]))
        w.grad = np.zeros(2)
        T.adam_step(store, lr=0.1)
        assert np.allclose(w.data, [1.0, 2.0])

    def test_first_step_is_signed_lr(self):
        store = T.ParamStore()
        w = store.add("w", np.array([0.0, 0.0]))
        w.grad = np.array([3.0, -0.5])
        T.adam_step(store, lr=0.01)
        assert np.allclose(w.data, [-0.01, 0.01], atol=1e-7)

    def test_quadratic_monotone_decrease(self):
        store = T.ParamStore()
        w = store.add("w", np.array([5.0]))
        losses = []
        for _ in range(100):
            losses.append(float(w.data[0] ** 2))
            w.grad = 2.0 * w.data
            T.adam_step(store, lr=0.01)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    def test_gradients_zeroed_after_step(self):
        store = T.ParamStore()
        w = store.add("w", np.array([1.0]))
        w.grad = np.array([1.0])
        T.adam_step(store, lr=0.1)
        assert w.grad is None


class TestDeterminism:
    def test_identical_seeds_identical_steps(self):
        def run():
            store = T.ParamStore()
            rng = np.random.default_rng(42)
            w = store.add("w", T.glorot_init(rng, (4, 4)))
            for _ in range(5):
                loss = T.tsum(T.mul(T.matmul(w, w), 0.5))
                loss.backward()
                T.adam_step(store, lr=1e-2)
            return w.data.copy()

        assert (run() == run()).all()
