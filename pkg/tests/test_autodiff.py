import numpy as np
import pytest

from molgen import autodiff as ad
from molgen.autodiff import Tensor, numeric_gradient


def check_op(fn, shapes, rng, h=1e-4, tol=1e-4, positive=False):
    """Analytic vs central-finite-difference gradients on random inputs.

    The scalar probe is sum(op(...) * W) for a fixed random W so every
    output entry contributes to the gradient.
    """
    arrays = [rng.standard_normal(s) for s in shapes]
    if positive:
        arrays = [np.abs(a) + 0.5 for a in arrays]
    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    out = fn(*tensors)
    w = rng.standard_normal(out.data.shape)
    loss = ad.sum_reduce(ad.mul(out, Tensor(w)))
    loss.backward()

    def scalar(*arrs):
        res = fn(*[Tensor(a) for a in arrs])
        return float((res.data * w).sum())

    nums = numeric_gradient(scalar, arrays, h=h)
    worst = 0.0
    for t, num in zip(tensors, nums):
        ana = t.grad if t.grad is not None else np.zeros_like(num)
        denom = max(1.0, np.abs(num).max())
        worst = max(worst, float(np.abs(ana - num).max()) / denom)
    assert worst < tol, f"gradient mismatch {worst:.2e}"
    return worst


def shapes_for(rng, base, count=10):
    """Random small shape variations around a base signature."""
    out = []
    for _ in range(count):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        k = int(rng.integers(1, 5))
        out.append(tuple(s.format(n=n, m=m, k=k) for s in base))
    return out


class TestPrimitiveGradients:
    def test_simple_square(self):
        x = Tensor(np.array(3.0), requires_grad=True)
        y = ad.mul(x, x)
        y.backward()
        assert x.grad == pytest.approx(6.0)

    @pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul, ad.div])
    def test_binary_elementwise(self, op, rng):
        for _ in range(10):
            n, m = int(rng.integers(1, 5)), int(rng.integers(1, 6))
            check_op(op, [(n, m), (n, m)], rng, positive=op is ad.div)

    def test_broadcast_add_mul(self, rng):
        check_op(ad.add, [(3, 4), (1, 4)], rng)
        check_op(ad.mul, [(2, 3, 4), (4,)], rng)
        check_op(ad.mul, [(5, 1), (1, 6)], rng)

    def test_matmul(self, rng):
        for _ in range(10):
            n, k, m = (int(rng.integers(1, 5)) for _ in range(3))
            check_op(ad.matmul, [(n, k), (k, m)], rng)
        # batched with broadcast right operand
        check_op(ad.matmul, [(2, 3, 4), (4, 5)], rng)
        check_op(ad.matmul, [(2, 3, 4), (2, 4, 5)], rng)

    def test_shape_ops(self, rng):
        check_op(lambda a: ad.reshape(a, (6, 2)), [(3, 4)], rng)
        check_op(lambda a: ad.transpose(a, (1, 0, 2)), [(2, 3, 4)], rng)
        check_op(lambda a: ad.broadcast_to(a, (5, 3, 4)), [(3, 4)], rng)
        check_op(lambda a, b: ad.concat([a, b], axis=-1), [(3, 2), (3, 5)], rng)

    def test_reductions(self, rng):
        check_op(lambda a: ad.sum_reduce(a), [(3, 4)], rng)
        check_op(lambda a: ad.sum_reduce(a, axis=1), [(3, 4, 2)], rng)
        check_op(lambda a: ad.sum_reduce(a, axis=0, keepdims=True), [(3, 4)], rng)
        check_op(lambda a: ad.mean_reduce(a), [(4, 2)], rng)
        check_op(lambda a: ad.mean_reduce(a, axis=1), [(2, 5, 3)], rng)

    def test_pointwise(self, rng):
        check_op(ad.sqrt, [(3, 4)], rng, positive=True)
        check_op(ad.exp, [(3, 4)], rng)
        check_op(ad.log, [(3, 4)], rng, positive=True)
        check_op(ad.sigmoid, [(3, 4)], rng)
        check_op(ad.silu, [(3, 4)], rng)
        check_op(lambda a: ad.clamp_min(a, 0.1), [(4, 4)], rng)

    def test_softmax_family(self, rng):
        for _ in range(10):
            n, k = int(rng.integers(1, 6)), int(rng.integers(2, 6))
            check_op(ad.softmax, [(n, k)], rng)
            check_op(ad.log_softmax, [(n, k)], rng)

    def test_layer_norm(self, rng):
        for _ in range(10):
            n, d = int(rng.integers(1, 6)), int(rng.integers(2, 8))
            check_op(ad.layer_norm, [(n, d)], rng)

    def test_vector_norm(self, rng):
        check_op(ad.vector_norm, [(5, 3)], rng)
        check_op(lambda a: ad.vector_norm(a, keepdims=False), [(4, 2, 3)], rng)

    def test_cross_product(self, rng):
        for _ in range(10):
            n = int(rng.integers(1, 6))
            check_op(ad.cross_product, [(n, 3), (n, 3)], rng)

    def test_swiglu(self, rng):
        check_op(ad.swiglu, [(3, 4), (4, 8), (4, 8), (8, 4)], rng)

    def test_linear_with_bias(self, rng):
        check_op(ad.linear, [(3, 4), (4, 5), (5,)], rng)


class TestSoftmaxIdentities:
    def test_rows_sum_to_one(self, rng):
        x = Tensor(rng.standard_normal((7, 5)))
        assert np.abs(ad.softmax(x).data.sum(axis=-1) - 1.0).max() < 1e-12

    def test_grad_of_row_sums_is_zero(self, rng):
        # sum of softmax rows is constant 1, so its gradient vanishes
        x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
        loss = ad.sum_reduce(ad.softmax(x))
        loss.backward()
        assert np.abs(x.grad).max() < 1e-8


class TestEngine:
    def test_backward_requires_scalar(self, rng):
        x = Tensor(rng.standard_normal((2, 2)), requires_grad=True)
        with pytest.raises(ValueError):
            ad.mul(x, x).backward()

    def test_grad_accumulates_across_uses(self):
        x = Tensor(np.array(2.0), requires_grad=True)
        y = ad.add(ad.mul(x, x), ad.mul(x, 3.0))  # x^2 + 3x
        y.backward()
        assert x.grad == pytest.approx(7.0)

    def test_no_grad_without_flag(self, rng):
        x = Tensor(rng.standard_normal(3))
        y = ad.sum_reduce(ad.mul(x, x))
        assert not y.requires_grad

    def test_diamond_graph(self):
        x = Tensor(np.array(1.5), requires_grad=True)
        a = ad.mul(x, x)
        b = ad.add(a, a)  # 2 x^2
        b.backward()
        assert x.grad == pytest.approx(6.0)

    def test_values_finite_after_forward_backward(self, rng):
        x = Tensor(rng.standard_normal((4, 4)), requires_grad=True)
        y = ad.sum_reduce(ad.layer_norm(ad.silu(ad.matmul(x, x))))
        y.backward()
        assert np.isfinite(y.data).all()
        assert np.isfinite(x.grad).all()
        assert x.grad.shape == x.data.shape
