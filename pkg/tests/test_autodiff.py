"""Numeric core: forward semantics and gradient agreement with the oracle."""

import math

import numpy as np
import pytest

from hyperpersona import autodiff as ad
from hyperpersona.autodiff import Tensor, backward, finite_diff_grad, zero_grads
from hyperpersona.errors import (
    ConfigurationError,
    DimensionError,
    IndexRangeError,
    NumericError,
)
from hyperpersona.rng import RngStream


def check_grad(build_loss, *arrays, atol=1e-8, rtol=1e-4):
    """Compare reverse-mode gradients with central differences per operand."""
    params = [ad.param(a) for a in arrays]
    loss = build_loss(*params)
    zero_grads(params)
    backward(loss)
    for i, p in enumerate(params):
        def f(x, i=i):
            probe = [ad.tensor(a.data) for a in params]
            probe[i] = ad.tensor(x)
            probe[i].requires_grad = True
            return build_loss(*probe).item()

        fd = finite_diff_grad(f, p.data.copy())
        got = p.grad if p.grad is not None else np.zeros_like(p.data)
        np.testing.assert_allclose(got, fd, rtol=rtol, atol=atol)


def rnd(stream, *shape):
    return stream.uniform_signed(int(np.prod(shape))).reshape(shape)


class TestMatmul:
    def test_identity(self):
        a = rnd(RngStream(1), 3, 3)
        out = ad.matmul(ad.tensor(a), ad.tensor(np.eye(3)))
        np.testing.assert_allclose(out.data, a)

    def test_hand_product(self):
        out = ad.matmul(ad.tensor([[1.0, 2.0], [3.0, 4.0]]), ad.tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(out.data, [[17.0], [39.0]])

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.matmul(ad.tensor(np.ones((2, 3))), ad.tensor(np.ones((2, 2))))

    def test_gradients(self):
        stream = RngStream(2)
        check_grad(
            lambda a, b: ad.sum_all(ad.matmul(a, b)),
            rnd(stream, 3, 4), rnd(stream, 4, 2),
        )


class TestElementwise:
    def test_sigmoid_values(self):
        out = ad.sigmoid(ad.tensor([0.0, 2.0]))
        assert out.data[0] == pytest.approx(0.5)
        assert out.data[1] == pytest.approx(0.8807971, abs=1e-6)

    def test_sigmoid_gradient_at_zero(self):
        x = ad.param(np.array([0.0]))
        backward(ad.sum_all(ad.sigmoid(x)))
        assert x.grad[0] == pytest.approx(0.25)

    def test_sigmoid_extreme_values_stable(self):
        out = ad.sigmoid(ad.tensor([1000.0, -1000.0]))
        assert out.data[0] == pytest.approx(1.0)
        assert out.data[1] == pytest.approx(0.0)

    def test_mul_identity(self):
        x = rnd(RngStream(3), 4)
        out = ad.mul(ad.tensor(x), ad.tensor(np.ones(4)))
        np.testing.assert_array_equal(out.data, x)

    def test_dispatcher(self):
        a, b = ad.tensor([1.0]), ad.tensor([2.0])
        assert ad.elementwise("add", a, b).data[0] == 3.0
        assert ad.elementwise("mul", a, b).data[0] == 2.0
        assert ad.elementwise("sigmoid", ad.tensor([0.0])).data[0] == 0.5
        with pytest.raises(ConfigurationError):
            ad.elementwise("sub", a, b)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.add(ad.tensor(np.ones(3)), ad.tensor(np.ones(4)))

    @pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul, ad.div])
    def test_binary_gradients(self, op):
        stream = RngStream(4)
        a = rnd(stream, 3, 3)
        b = rnd(stream, 3, 3) + 2.0  # keep divisors away from zero
        check_grad(lambda x, y: ad.sum_all(op(x, y)), a, b)

    def test_exp_and_scale_gradients(self):
        stream = RngStream(5)
        check_grad(lambda x: ad.sum_all(ad.exp(ad.scale(x, 0.7))), rnd(stream, 2, 3))

    def test_nan_trips_numeric_error(self):
        with pytest.raises(NumericError):
            ad.div(ad.tensor([1.0]), ad.tensor([0.0]))


class TestSoftmaxRows:
    def test_symmetry(self):
        out = ad.softmax_rows(ad.tensor([[0.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[0.5, 0.5]])

    def test_closed_form(self):
        out = ad.softmax_rows(ad.tensor([[math.log(2.0), 0.0]]))
        np.testing.assert_allclose(out.data, [[2.0 / 3.0, 1.0 / 3.0]], atol=1e-9)

    def test_large_values_no_overflow(self):
        out = ad.softmax_rows(ad.tensor([[1000.0, 0.0]]))
        np.testing.assert_allclose(out.data, [[1.0, 0.0]])

    def test_rows_sum_to_one(self):
        x = rnd(RngStream(6), 50, 7) * 30
        out = ad.softmax_rows(ad.tensor(x))
        np.testing.assert_allclose(out.data.sum(axis=1), np.ones(50), atol=1e-9)
        assert np.all(out.data >= 0)

    def test_gradients(self):
        check_grad(
            lambda x: ad.sum_all(ad.mul(ad.softmax_rows(x), x)),
            rnd(RngStream(7), 4, 5),
        )


class TestLayerNorm:
    def test_constant_vector_zeros(self):
        out = ad.layer_norm(ad.tensor(np.full(5, 3.3)), ad.tensor(np.ones(5)), ad.tensor(np.zeros(5)))
        np.testing.assert_allclose(out.data, np.zeros(5), atol=1e-9)

    def test_two_point_vector(self):
        out = ad.layer_norm(
            ad.tensor([1.0, 3.0]), ad.tensor(np.ones(2)), ad.tensor(np.zeros(2)), eps=1e-12
        )
        np.testing.assert_allclose(out.data, [-1.0, 1.0], atol=1e-5)

    def test_beta_shift(self):
        x = rnd(RngStream(8), 6)
        gamma = np.ones(6)
        base = ad.layer_norm(ad.tensor(x), ad.tensor(gamma), ad.tensor(np.zeros(6))).data
        shifted = ad.layer_norm(ad.tensor(x), ad.tensor(gamma), ad.tensor(np.full(6, 2.5))).data
        np.testing.assert_allclose(shifted, base + 2.5, atol=1e-12)

    def test_standardizes(self):
        x = rnd(RngStream(9), 4, 16) * 5
        out = ad.layer_norm_rows(ad.tensor(x), ad.tensor(np.ones(16)), ad.tensor(np.zeros(16)))
        np.testing.assert_allclose(out.data.mean(axis=1), np.zeros(4), atol=1e-9)
        np.testing.assert_allclose(out.data.var(axis=1), np.ones(4), atol=1e-3)

    def test_gradients(self):
        stream = RngStream(10)
        check_grad(
            lambda x, g, b: ad.sum_all(ad.mul(ad.layer_norm_rows(x, g, b), x)),
            rnd(stream, 3, 6), rnd(stream, 1, 6) + 1.5, rnd(stream, 1, 6),
        )


class TestSegmentOps:
    def test_all_one_segment(self):
        x = rnd(RngStream(11), 5, 3)
        out = ad.segment_sum(ad.tensor(x), np.zeros(5, dtype=int), 1)
        np.testing.assert_allclose(out.data, x.sum(axis=0, keepdims=True))

    def test_hand_sum(self):
        x = ad.tensor([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        out = ad.segment_sum(x, np.array([0, 1, 0]), 2)
        np.testing.assert_array_equal(out.data, [[6.0, 8.0], [3.0, 4.0]])

    def test_missing_segment_is_zero_row(self):
        out = ad.segment_sum(ad.tensor([[1.0]]), np.array([2]), 4)
        np.testing.assert_array_equal(out.data, [[0.0], [0.0], [1.0], [0.0]])

    def test_permutation_within_segment(self):
        stream = RngStream(12)
        x = rnd(stream, 6, 4)
        ids = np.array([0, 1, 0, 1, 0, 1])
        base = ad.segment_sum(ad.tensor(x), ids, 2).data
        perm = np.array([4, 1, 2, 3, 0, 5])  # swaps rows within segment 0
        out = ad.segment_sum(ad.tensor(x[perm]), ids[perm], 2).data
        np.testing.assert_allclose(out, base, atol=1e-6)

    def test_out_of_range(self):
        with pytest.raises(IndexRangeError):
            ad.segment_sum(ad.tensor([[1.0]]), np.array([5]), 2)
        with pytest.raises(IndexRangeError):
            ad.gather_rows(ad.tensor([[1.0]]), np.array([3]))

    def test_gradients(self):
        stream = RngStream(13)
        ids = np.array([0, 2, 0, 1, 2])

        def loss(x):
            s = ad.segment_sum(x, ids, 3)
            return ad.sum_all(ad.mul(s, s))

        check_grad(loss, rnd(stream, 5, 3))

    def test_gather_gradients(self):
        idx = np.array([0, 2, 2, 1])

        def loss(x):
            g = ad.gather_rows(x, idx)
            return ad.sum_all(ad.mul(g, g))

        check_grad(loss, rnd(RngStream(14), 3, 2))


class TestStructuralOps:
    def test_scale_rows_and_cols_gradients(self):
        stream = RngStream(15)
        check_grad(
            lambda x, s: ad.sum_all(ad.mul(ad.scale_rows(x, s), x)),
            rnd(stream, 4, 3), rnd(stream, 4, 1),
        )
        check_grad(
            lambda x, m: ad.sum_all(ad.mul(ad.scale_cols(x, m), x)),
            rnd(stream, 4, 3), rnd(stream, 1, 3),
        )

    def test_add_rowvec_and_row_sum_gradients(self):
        stream = RngStream(16)
        check_grad(
            lambda x, b: ad.sum_all(ad.mul(ad.add_rowvec(x, b), x)),
            rnd(stream, 4, 3), rnd(stream, 1, 3),
        )
        check_grad(
            lambda x: ad.sum_all(ad.mul(ad.row_sum(x), ad.row_sum(x))),
            rnd(stream, 5, 2),
        )

    def test_mean_all_gradient(self):
        check_grad(lambda x: ad.mean_all(ad.mul(x, x)), rnd(RngStream(17), 3, 3))


class TestDropout:
    def test_eval_mode_is_identity_object(self):
        x = ad.tensor(rnd(RngStream(18), 4, 4))
        out = ad.dropout(x, 0.5, RngStream(0), "eval")
        assert out is x

    def test_rate_zero_identity(self):
        x = ad.tensor(rnd(RngStream(19), 4, 4))
        assert ad.dropout(x, 0.0, RngStream(0), "train") is x

    def test_rate_one_rejected(self):
        with pytest.raises(ConfigurationError):
            ad.dropout(ad.tensor([1.0]), 1.0, RngStream(0), "train")

    def test_expectation_preserved(self):
        x = np.full((100_000,), 2.0)
        out = ad.dropout(ad.tensor(x), 0.5, RngStream(20), "train")
        assert abs(out.data.mean() - 2.0) / 2.0 < 0.02

    def test_gradient_uses_same_mask(self):
        x = ad.param(rnd(RngStream(21), 3, 3))
        out = ad.dropout(x, 0.4, RngStream(22), "train")
        factor = out.data / x.data  # 0 or 1/(1-rate)
        backward(ad.sum_all(out))
        np.testing.assert_allclose(x.grad, factor)


class TestBackward:
    def test_sum_of_squares(self):
        x = ad.param(np.array([3.0]))
        backward(ad.sum_all(ad.mul(x, x)))
        assert x.grad[0] == pytest.approx(6.0)

    def test_sigmoid_chain(self):
        w = ad.param(np.array([[0.0]]))
        x = ad.tensor(np.array([[1.0]]))
        backward(ad.sum_all(ad.sigmoid(ad.matmul(x, w))))
        assert w.grad[0, 0] == pytest.approx(0.25)

    def test_accumulation_on_second_call(self):
        x = ad.param(np.array([2.0]))
        loss = ad.sum_all(ad.mul(x, x))
        backward(loss)
        first = x.grad.copy()
        backward(loss)
        np.testing.assert_allclose(x.grad, 2 * first)

    def test_shared_subexpression(self):
        x = ad.param(np.array([2.0]))
        y = ad.mul(x, x)  # x^2
        z = ad.mul(y, y)  # x^4
        backward(ad.sum_all(z))
        assert x.grad[0] == pytest.approx(4 * 2.0**3)

    def test_non_scalar_loss_rejected(self):
        x = ad.param(np.ones((2, 2)))
        with pytest.raises(NumericError):
            backward(ad.mul(x, x))


class TestFiniteDiff:
    def test_square(self):
        grad = finite_diff_grad(lambda x: float((x**2).sum()), np.array([3.0]))
        assert grad[0] == pytest.approx(6.0, abs=1e-6)

    def test_sin_matches_cos(self):
        x = RngStream(23).uniform_signed(10)
        grad = finite_diff_grad(lambda v: float(np.sin(v).sum()), x)
        np.testing.assert_allclose(grad, np.cos(x), atol=1e-8)

    def test_does_not_mutate_input(self):
        x = np.array([1.0, 2.0])
        copy = x.copy()
        finite_diff_grad(lambda v: float((v**3).sum()), x)
        np.testing.assert_array_equal(x, copy)
