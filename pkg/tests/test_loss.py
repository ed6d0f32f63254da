"""Composed loss: prior terms, totals, gradients, weight refresh."""

import numpy as np
import pytest

from manifold_loss import loss as loss_mod
from manifold_loss import manifolds as m
from manifold_loss import ops
from manifold_loss.loss import LossSpec
from manifold_loss.manifolds import RandomNetConfig
from manifold_loss.rng import ReinitPolicy


def images(seed, shape=(1, 1, 8, 8)):
    rng = np.random.default_rng(seed)
    gt = rng.normal(size=shape) * 0.25 + 0.5
    y = gt + rng.normal(size=shape) * 0.1
    return gt, y


def all_kinds_spec(lam=0.1, base=ops.L2):
    nets = [
        RandomNetConfig(kind="taylor", depth=2, channels=4, order_n=2),
        RandomNetConfig(kind="inn", depth=2, channels=4),
        RandomNetConfig(kind="cdc", depth=2, channels=4, theta=0.5),
        RandomNetConfig(kind="reverse", sigmas=(0.5, 1.0), iterations_k=3),
    ]
    return LossSpec(base_norm=base, lam=lam, nets=nets)


class TestPriorLoss:
    def test_identical_inputs_give_zero(self):
        spec = all_kinds_spec()
        w = loss_mod.refresh_weights(spec, 0, 0)
        gt, _ = images(0)
        assert loss_mod.prior_loss(spec, w, gt, gt) == 0.0

    def test_empty_ensemble_is_zero(self):
        gt, y = images(1)
        assert loss_mod.prior_loss(LossSpec(nets=[]), [], gt, y) == 0.0

    def test_single_cdc_matches_direct_convs(self):
        spec = LossSpec(
            base_norm=ops.L1,
            nets=[RandomNetConfig(kind="cdc", depth=1, channels=4, theta=0.0)],
        )
        w = loss_mod.refresh_weights(spec, 3, 0)
        gt, y = images(2)
        expected = ops.reduce_norm(
            ops.conv2d(gt, w[0].kernels[0]), ops.conv2d(y, w[0].kernels[0]), ops.L1
        )
        assert loss_mod.prior_loss(spec, w, gt, y) == pytest.approx(expected, abs=1e-12)

    def test_identical_ensemble_members_equal_single_net(self):
        net = RandomNetConfig(kind="cdc", depth=2, channels=4)
        single = LossSpec(nets=[net])
        triple = LossSpec(nets=[net, net, net])
        gt, y = images(3)
        ws = loss_mod.refresh_weights(single, 5, 0)
        # same weights for all members: mean of equal terms == the term
        wt = [ws[0]] * 3
        assert loss_mod.prior_loss(triple, wt, gt, y) == pytest.approx(
            loss_mod.prior_loss(single, ws, gt, y), rel=1e-15
        )

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ops.ShapeError):
            loss_mod.prior_loss(LossSpec(), [], np.zeros((1, 1, 4, 4)),
                                np.zeros((1, 1, 2, 2)))


class TestTotalLoss:
    def test_lambda_zero_reduces_to_base(self):
        spec = all_kinds_spec(lam=0.0)
        w = loss_mod.refresh_weights(spec, 0, 0)
        gt, y = images(4)
        total, base, _ = loss_mod.total_loss(spec, w, gt, y)
        assert total == base == ops.reduce_norm(gt, y, spec.base_norm)

    def test_perfect_prediction(self):
        spec = all_kinds_spec()
        w = loss_mod.refresh_weights(spec, 0, 0)
        gt, _ = images(5)
        assert loss_mod.total_loss(spec, w, gt, gt) == (0.0, 0.0, 0.0)

    def test_lambda_linearity(self):
        gt, y = images(6)
        nets = [RandomNetConfig(kind="cdc", depth=2, channels=4)]
        one = LossSpec(lam=1.0, nets=nets)
        two = LossSpec(lam=2.0, nets=nets)
        w = loss_mod.refresh_weights(one, 7, 0)
        t1, b1, p1 = loss_mod.total_loss(one, w, gt, y)
        t2, b2, p2 = loss_mod.total_loss(two, w, gt, y)
        assert p1 == p2 and b1 == b2
        assert t2 - b2 == pytest.approx(2.0 * (t1 - b1), rel=1e-12)

    def test_negative_lambda_rejected(self):
        with pytest.raises(ValueError, match="lambda"):
            LossSpec(lam=-1.0)


class TestTotalLossGrad:
    def test_l2_baseline_closed_form(self):
        spec = LossSpec(base_norm=ops.L2, lam=0.0)
        gt, y = images(7)
        g = loss_mod.total_loss_grad(spec, [], gt, y)
        np.testing.assert_allclose(g, 2.0 * (y - gt) / y.size, atol=1e-15)

    def test_stationary_at_perfect_prediction(self):
        spec = all_kinds_spec(base=ops.L2)
        w = loss_mod.refresh_weights(spec, 0, 0)
        gt, _ = images(8)
        g = loss_mod.total_loss_grad(spec, w, gt, gt.copy())
        np.testing.assert_allclose(g, 0.0, atol=1e-15)

    def test_matches_finite_differences_all_kinds(self):
        spec = all_kinds_spec(lam=0.3, base=ops.L2)
        w = loss_mod.refresh_weights(spec, 11, 0)
        gt, y = images(9)
        g = loss_mod.total_loss_grad(spec, w, gt, y)
        fd = ops.finite_diff_grad(
            lambda t: loss_mod.total_loss(spec, w, gt, t)[0], y.copy(), 1e-6
        )
        rel = np.linalg.norm(g - fd) / np.linalg.norm(fd)
        assert rel < 1e-5


class TestRefreshWeights:
    def test_once_policy_frozen_across_epochs(self):
        spec = LossSpec(nets=[RandomNetConfig(kind="cdc", reinit=ReinitPolicy.ONCE)])
        w0 = loss_mod.refresh_weights(spec, 42, 0)
        w7 = loss_mod.refresh_weights(spec, 42, 7)
        np.testing.assert_array_equal(w0[0].kernels[0].weights, w7[0].kernels[0].weights)

    def test_each_epoch_policy_redraws(self):
        spec = LossSpec(
            nets=[RandomNetConfig(kind="cdc", reinit=ReinitPolicy.EACH_EPOCH)]
        )
        w0 = loss_mod.refresh_weights(spec, 42, 0)
        w1 = loss_mod.refresh_weights(spec, 42, 1)
        assert not np.array_equal(w0[0].kernels[0].weights, w1[0].kernels[0].weights)

    def test_distinct_net_indices_get_distinct_weights(self):
        net = RandomNetConfig(kind="cdc")
        spec = LossSpec(nets=[net, net])
        w = loss_mod.refresh_weights(spec, 42, 0)
        assert not np.array_equal(w[0].kernels[0].weights, w[1].kernels[0].weights)

    def test_weights_depend_only_on_seed_index_epoch(self):
        spec = LossSpec(
            nets=[RandomNetConfig(kind="inn", reinit=ReinitPolicy.EACH_EPOCH)]
        )
        a = loss_mod.refresh_weights(spec, 9, 4)
        b = loss_mod.refresh_weights(spec, 9, 4)
        np.testing.assert_array_equal(
            a[0].blocks[0][0][0].weights, b[0].blocks[0][0][0].weights
        )
