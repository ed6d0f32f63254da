"""Tensor-core operations: forward semantics and exact adjoints."""

import numpy as np
import pytest

from manifold_loss import ops
from manifold_loss.ops import CIRCULAR, ZERO, ConvKernel, ShapeError


def conv2d_loop_oracle(x, k, padding=ZERO):
    """Nested-loop convolution, independent of the im2col production path."""
    N, C, H, W = x.shape
    O, _, kh, kw = k.weights.shape
    r_h, r_w = kh // 2, kw // 2
    out = np.zeros((N, O, H, W))
    for n in range(N):
        for o in range(O):
            for h in range(H):
                for w in range(W):
                    acc = 0.0
                    for c in range(C):
                        for dy in range(-r_h, r_h + 1):
                            for dx in range(-r_w, r_w + 1):
                                hh, ww = h + dy, w + dx
                                if padding == CIRCULAR:
                                    v = x[n, c, hh % H, ww % W]
                                elif 0 <= hh < H and 0 <= ww < W:
                                    v = x[n, c, hh, ww]
                                else:
                                    v = 0.0
                                acc += k.weights[o, c, dy + r_h, dx + r_w] * v
                    out[n, o, h, w] = acc + (k.bias[o] if k.bias is not None else 0.0)
    return out


class TestConv2d:
    def test_zero_input_gives_zero(self):
        k = ConvKernel(np.random.default_rng(0).normal(size=(2, 1, 3, 3)))
        y = ops.conv2d(np.zeros((1, 1, 4, 4)), k)
        assert np.all(y == 0.0)

    def test_all_ones_kernel_hand_case(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        k = ConvKernel(np.ones((1, 1, 3, 3)))
        np.testing.assert_array_equal(ops.conv2d(x, k), np.full((1, 1, 2, 2), 10.0))

    def test_identity_kernel(self):
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        x = np.random.default_rng(1).normal(size=(2, 1, 5, 5))
        np.testing.assert_array_equal(ops.conv2d(x, ConvKernel(w)), x)

    @pytest.mark.parametrize("padding", [ZERO, CIRCULAR])
    def test_matches_loop_oracle(self, padding):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 3, 5, 6))
        k = ConvKernel(rng.normal(size=(2, 3, 3, 3)), rng.normal(size=2))
        np.testing.assert_allclose(
            ops.conv2d(x, k, padding), conv2d_loop_oracle(x, k, padding), atol=1e-12
        )

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x, z = rng.normal(size=(2, 1, 2, 4, 4))
        k = ConvKernel(rng.normal(size=(3, 2, 3, 3)))
        lhs = ops.conv2d(2.5 * x - 1.5 * z, k)
        rhs = 2.5 * ops.conv2d(x, k) - 1.5 * ops.conv2d(z, k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_channel_mismatch_rejected(self):
        k = ConvKernel(np.zeros((1, 2, 3, 3)))
        with pytest.raises(ShapeError, match="channels"):
            ops.conv2d(np.zeros((1, 1, 4, 4)), k)

    def test_even_kernel_rejected(self):
        with pytest.raises(ShapeError, match="odd"):
            ConvKernel(np.zeros((1, 1, 2, 2)))


class TestConv2dVjp:
    def test_zero_upstream(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(1, 1, 4, 4))
        k = ConvKernel(rng.normal(size=(1, 1, 3, 3)), np.zeros(1))
        gx, gw, gb = ops.conv2d_vjp(x, k, np.zeros((1, 1, 4, 4)))
        assert np.all(gx == 0) and np.all(gw == 0) and np.all(gb == 0)

    def test_identity_kernel_adjoint(self):
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 1] = 1.0
        up = np.random.default_rng(5).normal(size=(1, 1, 4, 4))
        gx, _, _ = ops.conv2d_vjp(np.zeros((1, 1, 4, 4)), ConvKernel(w), up)
        np.testing.assert_array_equal(gx, up)

    @pytest.mark.parametrize("padding", [ZERO, CIRCULAR])
    def test_grad_x_matches_finite_differences(self, padding):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(1, 1, 4, 4))
        k = ConvKernel(rng.normal(size=(1, 1, 3, 3)), rng.normal(size=1))
        up = rng.normal(size=(1, 1, 4, 4))
        gx, _, _ = ops.conv2d_vjp(x, k, up, padding)
        fd = ops.finite_diff_grad(
            lambda t: float(np.sum(ops.conv2d(t, k, padding) * up)), x.copy(), 1e-5
        )
        np.testing.assert_allclose(gx, fd, rtol=1e-6, atol=1e-8)

    @pytest.mark.parametrize("padding", [ZERO, CIRCULAR])
    def test_grad_k_matches_finite_differences(self, padding):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(1, 2, 4, 4))
        w = rng.normal(size=(2, 2, 3, 3))
        up = rng.normal(size=(1, 2, 4, 4))
        _, gw, _ = ops.conv2d_vjp(x, ConvKernel(w), up, padding)
        fd = np.zeros_like(w)
        step = 1e-5
        for idx in np.ndindex(w.shape):
            wp, wm = w.copy(), w.copy()
            wp[idx] += step
            wm[idx] -= step
            fp = float(np.sum(ops.conv2d(x, ConvKernel(wp), padding) * up))
            fm = float(np.sum(ops.conv2d(x, ConvKernel(wm), padding) * up))
            fd[idx] = (fp - fm) / (2 * step)
        np.testing.assert_allclose(gw, fd, rtol=1e-6, atol=1e-8)

    def test_upstream_shape_rejected(self):
        k = ConvKernel(np.zeros((1, 1, 3, 3)))
        with pytest.raises(ShapeError, match="upstream"):
            ops.conv2d_vjp(np.zeros((1, 1, 4, 4)), k, np.zeros((1, 1, 3, 3)))


class TestChannelSplitConcat:
    def test_round_trip_bit_exact(self):
        x = np.random.default_rng(8).normal(size=(2, 4, 3, 3))
        a, b = ops.channel_split(x)
        assert a.shape == (2, 2, 3, 3)
        np.testing.assert_array_equal(ops.channel_concat(a, b), x)

    def test_direct_indexing(self):
        x = np.concatenate([np.ones((1, 1, 2, 2)), 2 * np.ones((1, 1, 2, 2))], axis=1)
        a, b = ops.channel_split(x)
        assert np.all(a == 1.0) and np.all(b == 2.0)

    def test_odd_channels_rejected(self):
        with pytest.raises(ShapeError, match="even"):
            ops.channel_split(np.zeros((1, 3, 2, 2)))


class TestSpaceToDepth:
    def test_documented_subpixel_order(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]]).reshape(1, 1, 2, 2)
        z = ops.space_to_depth(x)
        assert z.shape == (1, 4, 1, 1)
        np.testing.assert_array_equal(z.ravel(), [1.0, 2.0, 3.0, 4.0])

    def test_round_trip_bit_exact(self):
        x = np.random.default_rng(9).normal(size=(1, 1, 8, 8))
        np.testing.assert_array_equal(ops.depth_to_space(ops.space_to_depth(x)), x)

    def test_indivisible_rejected(self):
        with pytest.raises(ShapeError, match="divisible"):
            ops.space_to_depth(np.zeros((1, 1, 3, 3)))


class TestReduceNorm:
    def test_identical_inputs(self):
        x = np.random.default_rng(10).normal(size=(1, 1, 3, 3))
        assert ops.reduce_norm(x, x, ops.L1) == 0.0
        assert ops.reduce_norm(x, x, ops.L2) == 0.0

    def test_uniform_difference(self):
        a = np.zeros((1, 1, 4, 4))
        b = np.full((1, 1, 4, 4), -0.1)
        assert ops.reduce_norm(a, b, ops.L1) == pytest.approx(0.1, abs=1e-15)
        assert ops.reduce_norm(a, b, ops.L2) == pytest.approx(0.01, abs=1e-15)

    def test_matches_elementwise_loop(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(2, 2, 3, 3))
        b = rng.normal(size=(2, 2, 3, 3))
        l1 = sum(abs(u - v) for u, v in zip(a.ravel(), b.ravel())) / a.size
        l2 = sum((u - v) ** 2 for u, v in zip(a.ravel(), b.ravel())) / a.size
        assert ops.reduce_norm(a, b, ops.L1) == pytest.approx(l1, abs=1e-12)
        assert ops.reduce_norm(a, b, ops.L2) == pytest.approx(l2, abs=1e-12)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            ops.reduce_norm(np.zeros((1, 1, 2, 2)), np.zeros((1, 1, 3, 3)))

    def test_empty_rejected(self):
        with pytest.raises(ShapeError):
            ops.reduce_norm(np.zeros((0, 1, 2, 2)), np.zeros((0, 1, 2, 2)))


class TestFiniteDiffGrad:
    def test_linear_function(self):
        g = ops.finite_diff_grad(lambda t: float(t.sum()), np.zeros((1, 1, 2, 2)))
        np.testing.assert_allclose(g, 1.0, atol=1e-9)

    def test_quadratic(self):
        x = np.random.default_rng(12).normal(size=(1, 1, 3, 3))
        g = ops.finite_diff_grad(lambda t: 0.5 * float(np.sum(t * t)), x.copy())
        np.testing.assert_allclose(g, x, atol=1e-9)

    def test_l1_sign_pattern(self):
        rng = np.random.default_rng(13)
        target = rng.normal(size=(1, 1, 3, 3))
        x = target + np.where(rng.normal(size=target.shape) > 0, 0.5, -0.5)
        g = ops.finite_diff_grad(
            lambda t: float(np.sum(np.abs(t - target))), x.copy(), 1e-5
        )
        np.testing.assert_allclose(g, np.sign(x - target), atol=1e-9)

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            ops.finite_diff_grad(lambda t: 0.0, np.zeros((1, 1, 1, 1)), step=0.0)
