"""Training loop for the desk-scale denoising task.

Fully deterministic given the experiment seeds: data, model init, batch
shuffling, and loss-network weight draws all come from seeded SplitMix64
streams, so two runs with the same config produce bit-identical metrics
(up to the wall-clock column).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import data as data_mod
from . import loss as loss_mod
from . import metrics
from .data import SyntheticDatasetSpec
from .loss import LossSpec
from .model import Adam, DenoiserModel, ModelConfig
from .rng import SeededRng, derive_epoch_seed


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class OptimizerConfig:
    lr: float = 1e-3
    epochs: int = 30
    batch: int = 16

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ValueError("epochs and batch must be >= 1")


@dataclass
class MetricsRecord:
    epoch: int
    base_loss: float
    prior_loss: float
    total_loss: float
    val_psnr: float
    val_ssim: float
    seconds: float


_SHUFFLE_STREAM = 0x7F


def _epoch_order(seed, epoch, n):
    """Deterministic permutation of n training indices for one epoch."""
    rng = SeededRng(derive_epoch_seed(seed, _SHUFFLE_STREAM, epoch))
    keys = rng.uniform(n)
    return np.argsort(keys, kind="stable")


def _load_split(spec: SyntheticDatasetSpec):
    train = [data_mod.gen_synthetic_pair(spec, i) for i in data_mod.train_indices(spec)]
    val = [data_mod.gen_synthetic_pair(spec, i) for i in data_mod.val_indices(spec)]
    stack = lambda pairs, j: np.concatenate([p[j] for p in pairs], axis=0)
    return (stack(train, 0), stack(train, 1)), (stack(val, 0), stack(val, 1))


def evaluate(model: DenoiserModel, clean, noisy):
    pred = model.forward(noisy)
    ps = [metrics.psnr(pred[i : i + 1], clean[i : i + 1]) for i in range(len(pred))]
    ss = [metrics.ssim(pred[i : i + 1], clean[i : i + 1]) for i in range(len(pred))]
    return float(np.mean(ps)), float(np.mean(ss))


def train(dataset: SyntheticDatasetSpec, model_cfg: ModelConfig,
          loss_spec: LossSpec, opt_cfg: OptimizerConfig, seed: int):
    """Run one training job; returns the per-epoch MetricsRecord list."""
    (tr_clean, tr_noisy), (va_clean, va_noisy) = _load_split(dataset)
    model = DenoiserModel(model_cfg, image_channels=1, seed=seed)
    optim = Adam(model, opt_cfg.lr)
    n = tr_clean.shape[0]
    records = []
    step = 0
    for epoch in range(opt_cfg.epochs):
        t0 = time.perf_counter()
        weights = loss_mod.refresh_weights(loss_spec, seed, epoch)
        order = _epoch_order(seed, epoch, n)
        sums = np.zeros(3)
        batches = 0
        for start in range(0, n, opt_cfg.batch):
            idx = order[start : start + opt_cfg.batch]
            gt, x = tr_clean[idx], tr_noisy[idx]
            if loss_spec.reinit_per_batch:
                weights = loss_mod.refresh_weights(loss_spec, seed, step)
            y, cache = model.forward(x, with_cache=True)
            total, base, prior = loss_mod.total_loss(loss_spec, weights, gt, y)
            if not np.isfinite(total):
                raise TrainingDiverged(epoch)
            grad_y = loss_mod.total_loss_grad(loss_spec, weights, gt, y)
            optim.step(model.backward(cache, grad_y))
            sums += (base, prior, total)
            batches += 1
            step += 1
        val_psnr, val_ssim = evaluate(model, va_clean, va_noisy)
        records.append(MetricsRecord(
            epoch=epoch,
            base_loss=sums[0] / batches,
            prior_loss=sums[1] / batches,
            total_loss=sums[2] / batches,
            val_psnr=val_psnr,
            val_ssim=val_ssim,
            seconds=time.perf_counter() - t0,
        ))
    return records, model
